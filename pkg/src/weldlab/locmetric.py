"""Localization quality of explanation maps against expert masks.

Recall is the fraction of annotated defect pixels covered by the map, in
either soft form (sum(L*G)/sum(G) on the normalized map) or binary form
(threshold the map at tau first). Both per-image averaging and dataset
pooling of the sums are provided, since they weight images differently.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .explain import ExplanationMap

SOFT = "soft"
BINARY = "binary"
DEFECT_TYPES = ("crack", "lack_of_penetration", "porosity")


class LocMetricError(Exception):
    pass


@dataclass(frozen=True)
class GroundTruthMask:
    mask: np.ndarray           # binary, same size as the image
    image_path: str
    defect_type: str
    annotator: str = ""

    def __post_init__(self):
        vals = np.unique(self.mask)
        if not np.all(np.isin(vals, (0, 1))):
            raise LocMetricError(f"mask for {self.image_path} is not binary")
        if self.mask.sum() == 0:
            raise LocMetricError(f"mask for {self.image_path} has no positive pixels")
        if self.defect_type not in DEFECT_TYPES:
            raise LocMetricError(f"unknown defect_type {self.defect_type!r}")


@dataclass(frozen=True)
class RecallRecord:
    image_path: str
    recall: float
    mode: str
    threshold: float | None = None

    def __post_init__(self):
        if self.mode == BINARY and self.threshold is None:
            raise LocMetricError("binary mode requires a threshold")
        if not 0.0 <= self.recall <= 1.0:
            raise LocMetricError(f"recall outside [0,1]: {self.recall}")

    def to_json(self) -> dict:
        return {"image_path": self.image_path, "recall": self.recall,
                "mode": self.mode, "threshold": self.threshold}


def binarize_heatmap(emap: ExplanationMap, tau: float) -> np.ndarray:
    """Cellwise threshold of a normalized map: 1 iff value >= tau."""
    if not 0.0 <= tau <= 1.0:
        raise LocMetricError(f"tau must be in [0,1], got {tau}")
    if not emap.normalized:
        raise LocMetricError("heatmap must be normalized before binarization")
    return (emap.values >= tau).astype(np.uint8)


def recall(emap: ExplanationMap, gt: GroundTruthMask, mode: str = BINARY,
           tau: float = 0.5) -> RecallRecord:
    """Fraction of annotated defect pixels covered by the map."""
    if emap.values.shape != gt.mask.shape:
        raise LocMetricError(
            f"map shape {emap.values.shape} != mask shape {gt.mask.shape} "
            f"for {gt.image_path} (upsample the map first)")
    denom = float(gt.mask.sum())
    if mode == SOFT:
        num = float((emap.normalize().values * gt.mask).sum())
        threshold = None
    elif mode == BINARY:
        num = float((binarize_heatmap(emap.normalize(), tau) * gt.mask).sum())
        threshold = tau
    else:
        raise LocMetricError(f"unknown mode {mode!r}")
    return RecallRecord(image_path=gt.image_path, recall=num / denom,
                        mode=mode, threshold=threshold)


def average_recall(records: list[RecallRecord]) -> float:
    """Arithmetic mean of per-image recalls."""
    if not records:
        raise LocMetricError("cannot average an empty record list")
    modes = {r.mode for r in records}
    if len(modes) > 1:
        raise LocMetricError(f"mixed recall modes: {modes}")
    return float(np.mean([r.recall for r in records]))


def pooled_recall(pairs: list[tuple[ExplanationMap, GroundTruthMask]],
                  mode: str = BINARY, tau: float = 0.5) -> float:
    """Global-sum reading: all numerators pooled over all denominators."""
    if not pairs:
        raise LocMetricError("cannot pool an empty pair list")
    num = 0.0
    denom = 0.0
    for emap, gt in pairs:
        if emap.values.shape != gt.mask.shape:
            raise LocMetricError(f"shape mismatch for {gt.image_path}")
        norm = emap.normalize()
        if mode == SOFT:
            num += float((norm.values * gt.mask).sum())
        elif mode == BINARY:
            num += float((binarize_heatmap(norm, tau) * gt.mask).sum())
        else:
            raise LocMetricError(f"unknown mode {mode!r}")
        denom += float(gt.mask.sum())
    return num / denom


def build_report(records: list[RecallRecord],
                 pairs: list[tuple[ExplanationMap, GroundTruthMask]],
                 mode: str, tau: float | None) -> dict:
    """Report payload: per-image records, aggregates, per-defect breakdowns."""
    by_type: dict[str, list[float]] = {}
    for record, (_, gt) in zip(records, pairs):
        by_type.setdefault(gt.defect_type, []).append(record.recall)
    return {
        "mode": mode,
        "tau": tau,
        "n_images": len(records),
        "average_recall": average_recall(records),
        "pooled_recall": pooled_recall(pairs, mode=mode, tau=tau if tau is not None else 0.5),
        "per_defect_type": {t: {"n": len(v), "average_recall": float(np.mean(v))}
                            for t, v in sorted(by_type.items())},
        "records": [r.to_json() for r in records],
    }


def load_annotations(path: str | Path) -> list[dict]:
    """Annotation manifest: one JSON object per line with image_path,
    mask_path, defect_type (and optional annotator, class_index)."""
    rows = []
    with Path(path).open() as f:
        for line in f:
            if line.strip():
                rows.append(json.loads(line))
    if not rows:
        raise LocMetricError(f"{path}: empty annotation manifest")
    return rows
