// Shared types mirroring the review-service JSON API.

export const IMAGE_QUALITIES = ["clear", "underexposed", "overexposed", "noisy"] as const;
export const VISIBILITIES = ["clearly_visible", "partially_visible", "not_visible"] as const;
export const DEFECT_TYPES = ["crack", "lack_of_penetration", "porosity", "none"] as const;
export const CONFIDENCE_LEVELS = [1, 2, 3, 4, 5] as const;
export const EXPLAINERS = ["gradcam", "lime"] as const;

export type ImageQuality = (typeof IMAGE_QUALITIES)[number];
export type Visibility = (typeof VISIBILITIES)[number];
export type DefectType = (typeof DEFECT_TYPES)[number];
export type Explainer = (typeof EXPLAINERS)[number];

export type OverlayMode = "none" | "gradcam" | "lime" | "side_by_side";

export interface AuditCase {
  case_id: string;
  image_path: string;
  pred_class: string;
  probabilities: number[];
  gradcam_overlay_path: string;
  lime_overlay_path: string;
  status: "pending" | "reviewed";
}

export interface CaseListPage {
  cases: AuditCase[];
  total: number;
  page: number;
  page_size: number;
  pages: number;
}

export interface AuditRecordPayload {
  case_id: string;
  auditor_id: string;
  detected_gradcam: boolean;
  detected_lime: boolean;
  image_quality: ImageQuality;
  visibility_gradcam: Visibility;
  visibility_lime: Visibility;
  defect_type: DefectType;
  confidence_gradcam: number;
  confidence_lime: number;
  timestamp: number;
}

export interface FieldError {
  field: string;
  message: string;
}

export interface AggregateReport {
  n_records: number;
  quality_distribution: Record<string, number>;
  detection_rate: Record<string, number>;
  confidence_histogram: Record<string, number[]>;
  mean_confidence: Record<string, number>;
  per_quality_detection: Record<string, Record<string, number>>;
}
