"""Aggregate statistics over questionnaire records.

Everything is exact counting after latest-wins deduplication per
(case, auditor): film-quality distribution, per-explainer detection rates
and confidence histograms, and detection broken down by film quality.
"""

from __future__ import annotations

from dataclasses import dataclass

from .records import (AuditRecord, CONFIDENCE_LEVELS, IMAGE_QUALITIES,
                      ValidationError)

EXPLAINERS = ("gradcam", "lime")


@dataclass(frozen=True)
class AggregateReport:
    n_records: int
    quality_distribution: dict[str, float]
    detection_rate: dict[str, float]
    confidence_histogram: dict[str, list[int]]
    mean_confidence: dict[str, float]
    per_quality_detection: dict[str, dict[str, float]]

    def to_json(self) -> dict:
        return {
            "n_records": self.n_records,
            "quality_distribution": self.quality_distribution,
            "detection_rate": self.detection_rate,
            "confidence_histogram": self.confidence_histogram,
            "mean_confidence": self.mean_confidence,
            "per_quality_detection": self.per_quality_detection,
        }


def dedupe_latest(records: list[AuditRecord]) -> list[AuditRecord]:
    """Keep each (case, auditor)'s last record, preserving first-seen order
    of the pairs."""
    latest: dict[tuple[str, str], AuditRecord] = {}
    for r in records:
        latest[(r.case_id, r.auditor_id)] = r
    return list(latest.values())


def aggregate(records: list[AuditRecord]) -> AggregateReport:
    if not records:
        raise ValidationError([{"field": "records", "message": "no records to aggregate"}])
    deduped = dedupe_latest(records)
    n = len(deduped)

    quality_counts = {q: 0 for q in IMAGE_QUALITIES}
    detected = {tool: 0 for tool in EXPLAINERS}
    conf_hist = {tool: [0] * len(CONFIDENCE_LEVELS) for tool in EXPLAINERS}
    conf_sum = {tool: 0 for tool in EXPLAINERS}
    per_quality = {q: {tool: 0 for tool in EXPLAINERS} for q in IMAGE_QUALITIES}

    for r in deduped:
        quality_counts[r.image_quality] += 1
        for tool in EXPLAINERS:
            if getattr(r, f"detected_{tool}"):
                detected[tool] += 1
                per_quality[r.image_quality][tool] += 1
            conf = getattr(r, f"confidence_{tool}")
            conf_hist[tool][conf - 1] += 1
            conf_sum[tool] += conf

    per_quality_rate = {
        q: {tool: (per_quality[q][tool] / quality_counts[q] if quality_counts[q] else 0.0)
            for tool in EXPLAINERS}
        for q in IMAGE_QUALITIES
    }
    return AggregateReport(
        n_records=n,
        quality_distribution={q: quality_counts[q] / n for q in IMAGE_QUALITIES},
        detection_rate={tool: detected[tool] / n for tool in EXPLAINERS},
        confidence_histogram=conf_hist,
        mean_confidence={tool: conf_sum[tool] / n for tool in EXPLAINERS},
        per_quality_detection=per_quality_rate,
    )
