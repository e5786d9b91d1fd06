"""Questionnaire record schema and validation.

One record captures a single auditor's structured answers for one case:
whether each explainer highlighted the defect, film quality, per-explainer
visibility and 1-5 confidence, and the defect type they saw. "Detected"
means the explainer highlighted the true defect region, not that the model
classified correctly.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

IMAGE_QUALITIES = ("clear", "underexposed", "overexposed", "noisy")
VISIBILITIES = ("clearly_visible", "partially_visible", "not_visible")
RECORD_DEFECT_TYPES = ("crack", "lack_of_penetration", "porosity", "none")
CONFIDENCE_LEVELS = (1, 2, 3, 4, 5)


class ValidationError(Exception):
    def __init__(self, errors: list[dict]):
        self.errors = errors
        super().__init__("; ".join(f"{e['field']}: {e['message']}" for e in errors))


@dataclass(frozen=True)
class AuditRecord:
    case_id: str
    auditor_id: str
    detected_gradcam: bool
    detected_lime: bool
    image_quality: str
    visibility_gradcam: str
    visibility_lime: str
    defect_type: str
    confidence_gradcam: int
    confidence_lime: int
    timestamp: float = field(default_factory=time.time)

    def to_json(self) -> dict:
        return {
            "case_id": self.case_id,
            "auditor_id": self.auditor_id,
            "detected_gradcam": self.detected_gradcam,
            "detected_lime": self.detected_lime,
            "image_quality": self.image_quality,
            "visibility_gradcam": self.visibility_gradcam,
            "visibility_lime": self.visibility_lime,
            "defect_type": self.defect_type,
            "confidence_gradcam": self.confidence_gradcam,
            "confidence_lime": self.confidence_lime,
            "timestamp": self.timestamp,
        }

    @staticmethod
    def from_json(d: dict) -> "AuditRecord":
        errors = validate_record(d)
        if errors:
            raise ValidationError(errors)
        return AuditRecord(
            case_id=d["case_id"],
            auditor_id=d["auditor_id"],
            detected_gradcam=d["detected_gradcam"],
            detected_lime=d["detected_lime"],
            image_quality=d["image_quality"],
            visibility_gradcam=d["visibility_gradcam"],
            visibility_lime=d["visibility_lime"],
            defect_type=d["defect_type"],
            confidence_gradcam=d["confidence_gradcam"],
            confidence_lime=d["confidence_lime"],
            timestamp=d.get("timestamp", time.time()),
        )


def validate_record(d: dict) -> list[dict]:
    """All field-level problems with a record payload; empty list = valid.

    The same checks run server-side on submission and client-side in the
    review UI.
    """
    errors = []

    def err(field_name: str, message: str) -> None:
        errors.append({"field": field_name, "message": message})

    for name in ("case_id", "auditor_id"):
        if not isinstance(d.get(name), str) or not d.get(name):
            err(name, "must be a nonempty string")
    for name in ("detected_gradcam", "detected_lime"):
        if not isinstance(d.get(name), bool):
            err(name, "must be a boolean")
    if d.get("image_quality") not in IMAGE_QUALITIES:
        err("image_quality", f"must be one of {IMAGE_QUALITIES}")
    for name in ("visibility_gradcam", "visibility_lime"):
        if d.get(name) not in VISIBILITIES:
            err(name, f"must be one of {VISIBILITIES}")
    if d.get("defect_type") not in RECORD_DEFECT_TYPES:
        err("defect_type", f"must be one of {RECORD_DEFECT_TYPES}")
    for name in ("confidence_gradcam", "confidence_lime"):
        v = d.get(name)
        if not isinstance(v, int) or isinstance(v, bool) or v not in CONFIDENCE_LEVELS:
            err(name, "must be an integer from 1 to 5")

    # cross-field: an undetected defect cannot have been visible
    for tool in ("gradcam", "lime"):
        detected = d.get(f"detected_{tool}")
        visibility = d.get(f"visibility_{tool}")
        if detected is False and visibility in VISIBILITIES and visibility != "not_visible":
            err(f"visibility_{tool}",
                f"must be not_visible when detected_{tool} is false")
    return errors
