// Client-side questionnaire validation. These rules are a transcription of
// the server's record validation: the server remains authoritative, but a
// form that passes here must never bounce with a 422.

import { CONFIDENCE_LEVELS, DEFECT_TYPES, FieldError, IMAGE_QUALITIES, VISIBILITIES } from "./types.js";

export function validateRecord(payload: Record<string, unknown>): FieldError[] {
  const errors: FieldError[] = [];
  const err = (field: string, message: string) => errors.push({ field, message });

  for (const name of ["case_id", "auditor_id"]) {
    const v = payload[name];
    if (typeof v !== "string" || v.length === 0) {
      err(name, "must be a nonempty string");
    }
  }
  for (const name of ["detected_gradcam", "detected_lime"]) {
    if (typeof payload[name] !== "boolean") {
      err(name, "must be a boolean");
    }
  }
  if (!(IMAGE_QUALITIES as readonly unknown[]).includes(payload["image_quality"])) {
    err("image_quality", `must be one of ${IMAGE_QUALITIES.join(", ")}`);
  }
  for (const name of ["visibility_gradcam", "visibility_lime"]) {
    if (!(VISIBILITIES as readonly unknown[]).includes(payload[name])) {
      err(name, `must be one of ${VISIBILITIES.join(", ")}`);
    }
  }
  if (!(DEFECT_TYPES as readonly unknown[]).includes(payload["defect_type"])) {
    err("defect_type", `must be one of ${DEFECT_TYPES.join(", ")}`);
  }
  for (const name of ["confidence_gradcam", "confidence_lime"]) {
    const v = payload[name];
    if (typeof v !== "number" || !Number.isInteger(v) ||
        !(CONFIDENCE_LEVELS as readonly number[]).includes(v)) {
      err(name, "must be an integer from 1 to 5");
    }
  }

  // cross-field: an undetected defect cannot have been visible
  for (const tool of ["gradcam", "lime"]) {
    const detected = payload[`detected_${tool}`];
    const visibility = payload[`visibility_${tool}`];
    if (detected === false &&
        (VISIBILITIES as readonly unknown[]).includes(visibility) &&
        visibility !== "not_visible") {
      err(`visibility_${tool}`, `must be not_visible when detected_${tool} is false`);
    }
  }
  return errors;
}
