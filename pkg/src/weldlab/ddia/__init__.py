"""Expert-audit workflow: persisted audit cases, structured questionnaire
records, aggregate statistics, and the JSON-over-HTTP review service."""

from .records import (AuditRecord, ValidationError, validate_record,
                      IMAGE_QUALITIES, VISIBILITIES, RECORD_DEFECT_TYPES)
from .store import AuditStore, StoreError, NotFoundError
from .aggregate import AggregateReport, aggregate

__all__ = [
    "AuditRecord", "ValidationError", "validate_record",
    "IMAGE_QUALITIES", "VISIBILITIES", "RECORD_DEFECT_TYPES",
    "AuditStore", "StoreError", "NotFoundError",
    "AggregateReport", "aggregate",
]
