"""Audit-case creation: run inference on a film, render both explanation
overlays, and persist the pending case atomically."""

from __future__ import annotations

import logging
import uuid
from pathlib import Path

import numpy as np
import torch
from PIL import Image

from ..dataset import PreprocessSpec, preprocess
from ..explain import LimeConfig, grad_cam, lime_explain, render_overlay
from .store import AuditCase, AuditStore

logger = logging.getLogger(__name__)


def create_case(image_path: str | Path, model: torch.nn.Module,
                store: AuditStore, overlay_dir: str | Path,
                class_names: tuple[str, ...],
                spec: PreprocessSpec | None = None,
                lime_config: LimeConfig | None = None,
                seed: int = 0, case_id: str | None = None) -> AuditCase:
    """Build one pending case; nothing is persisted if any step fails."""
    spec = spec or PreprocessSpec()
    overlay_dir = Path(overlay_dir)
    overlay_dir.mkdir(parents=True, exist_ok=True)
    case_id = case_id or uuid.uuid4().hex[:12]

    tensor = preprocess(str(image_path), spec)
    model.eval()
    with torch.no_grad():
        probs = torch.softmax(model(tensor.unsqueeze(0)), dim=1)[0]
    pred_index = int(probs.argmax())

    # display image matches the overlay geometry (the preprocessed size)
    with Image.open(image_path) as im:
        h, w = spec.target_size
        display = np.asarray(im.convert("RGB").resize((w, h), Image.BILINEAR))

    gc_map = grad_cam(model, tensor, pred_index).normalize()
    gc_overlay = render_overlay(display, gc_map, alpha=0.5)
    lime_map = lime_explain(model, tensor, pred_index,
                            config=lime_config, seed=seed).normalize()
    lime_overlay = render_overlay(display, lime_map, alpha=0.9)

    gc_path = overlay_dir / f"{case_id}_gradcam.png"
    lime_path = overlay_dir / f"{case_id}_lime.png"
    written = []
    try:
        Image.fromarray(gc_overlay).save(gc_path)
        written.append(gc_path)
        Image.fromarray(lime_overlay).save(lime_path)
        written.append(lime_path)
        case = AuditCase(
            case_id=case_id,
            image_path=str(image_path),
            pred_class=class_names[pred_index],
            probabilities=[float(p) for p in probs],
            gradcam_overlay_path=gc_path.name,
            lime_overlay_path=lime_path.name,
        )
        store.add_case(case)
    except Exception:
        for p in written:
            p.unlink(missing_ok=True)
        raise
    logger.info("created case %s (%s, p=%.3f)", case_id,
                class_names[pred_index], float(probs[pred_index]))
    return case
