// Shared record fixtures for the validation-parity suite. Each entry is a
// payload plus whether a correct validator should accept it.

export interface RecordFixture {
  name: string;
  payload: Record<string, unknown>;
  valid: boolean;
}

export function baseRecord(overrides: Record<string, unknown> = {}): Record<string, unknown> {
  return {
    case_id: "case-000",
    auditor_id: "auditor-1",
    detected_gradcam: true,
    detected_lime: true,
    image_quality: "clear",
    visibility_gradcam: "clearly_visible",
    visibility_lime: "partially_visible",
    defect_type: "crack",
    confidence_gradcam: 4,
    confidence_lime: 3,
    timestamp: 100.0,
    ...overrides,
  };
}

export const RECORD_FIXTURES: RecordFixture[] = [
  { name: "fully valid", payload: baseRecord(), valid: true },
  {
    name: "not detected with not_visible",
    payload: baseRecord({ detected_gradcam: false, visibility_gradcam: "not_visible" }),
    valid: true,
  },
  { name: "no defect seen", payload: baseRecord({ defect_type: "none" }), valid: true },
  { name: "empty case_id", payload: baseRecord({ case_id: "" }), valid: false },
  { name: "numeric case_id", payload: baseRecord({ case_id: 7 }), valid: false },
  { name: "null auditor_id", payload: baseRecord({ auditor_id: null }), valid: false },
  { name: "string detected flag", payload: baseRecord({ detected_gradcam: "yes" }), valid: false },
  { name: "numeric detected flag", payload: baseRecord({ detected_lime: 1 }), valid: false },
  { name: "unknown quality", payload: baseRecord({ image_quality: "blurry" }), valid: false },
  { name: "unknown visibility", payload: baseRecord({ visibility_gradcam: "visible" }), valid: false },
  { name: "null visibility", payload: baseRecord({ visibility_lime: null }), valid: false },
  { name: "unknown defect type", payload: baseRecord({ defect_type: "corrosion" }), valid: false },
  { name: "confidence too low", payload: baseRecord({ confidence_gradcam: 0 }), valid: false },
  { name: "confidence too high", payload: baseRecord({ confidence_gradcam: 6 }), valid: false },
  { name: "fractional confidence", payload: baseRecord({ confidence_lime: 3.5 }), valid: false },
  { name: "string confidence", payload: baseRecord({ confidence_lime: "3" }), valid: false },
  { name: "boolean confidence", payload: baseRecord({ confidence_lime: true }), valid: false },
  {
    name: "undetected but clearly visible",
    payload: baseRecord({ detected_gradcam: false, visibility_gradcam: "clearly_visible" }),
    valid: false,
  },
  {
    name: "undetected but partially visible",
    payload: baseRecord({ detected_lime: false, visibility_lime: "partially_visible" }),
    valid: false,
  },
  {
    name: "several fields wrong at once",
    payload: baseRecord({ case_id: "", image_quality: "x", confidence_lime: 9 }),
    valid: false,
  },
];
