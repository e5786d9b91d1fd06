"""Saliency explanations for a trained classifier: gradient-weighted class
activation maps and locally weighted linear surrogates over superpixels.

The activation map is ReLU(sum_k alpha_k A^k) where alpha_k is the spatial
mean of d(logit_c)/dA^k over the target layer's feature maps, bilinearly
upsampled to the input size. The surrogate explainer perturbs superpixel
masks, weights samples by exp(-D(x,z)^2 / sigma^2), and fits a weighted
least-squares linear model whose coefficients become per-segment relevance.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np
import torch
import torch.nn.functional as F
from skimage.segmentation import find_boundaries, slic

from .trainer import cam_layer_path, _get_submodule

logger = logging.getLogger(__name__)

GRAD_CAM = "grad_cam"
LIME = "lime"


class ExplainError(Exception):
    pass


@dataclass
class ExplanationMap:
    method: str
    values: np.ndarray  # 2-D, aligned to the input image
    class_index: int
    normalized: bool = False
    segments: np.ndarray | None = None  # superpixel labels (surrogate method only)

    def normalize(self) -> "ExplanationMap":
        """Min-max map to [0,1]; a constant map becomes all zeros."""
        if self.normalized:
            return self
        v = self.values
        lo, hi = float(v.min()), float(v.max())
        if hi - lo < 1e-12:
            out = np.zeros_like(v)
        else:
            out = (v - lo) / (hi - lo)
        return replace(self, values=out, normalized=True)


@dataclass
class LimeConfig:
    n_segments: int = 50
    n_samples: int = 1000
    kernel_width: float | None = None  # default 0.25 * sqrt(n_segments)
    distance: str = "cosine"           # or "euclidean", over binary masks
    top_k_segments: int = 5

    def __post_init__(self):
        if self.n_samples < self.n_segments + 1:
            raise ExplainError("n_samples must exceed n_segments (surrogate "
                               "regression would be underdetermined)")
        if self.distance not in ("cosine", "euclidean"):
            raise ExplainError(f"unknown distance {self.distance!r}")

    def sigma(self, n_segments: int) -> float:
        return self.kernel_width if self.kernel_width is not None \
            else 0.25 * math.sqrt(n_segments)


def grad_cam(model: torch.nn.Module, image: torch.Tensor, class_index: int,
             target_layer=None) -> ExplanationMap:
    """Unnormalized activation map for ``class_index``, upsampled to the
    input's spatial size. ``target_layer`` may be a module, a dotted path, or
    None (architecture default). Model weights are untouched."""
    if image.dim() == 3:
        image = image.unsqueeze(0)
    if target_layer is None:
        arch = getattr(model, "weldlab_arch", None)
        if arch is None:
            raise ExplainError("no target_layer given and model has no "
                               "registered architecture")
        target_layer = cam_layer_path(arch)
    if isinstance(target_layer, str):
        target_layer = _get_submodule(model, target_layer)

    captured: dict = {}

    def hook(_module, _inputs, output):
        captured["activations"] = output

    handle = target_layer.register_forward_hook(hook)
    was_training = model.training
    model.eval()
    try:
        # grad flows from the input so frozen backbones still yield a graph
        x = image.clone().requires_grad_(True)
        with torch.enable_grad():
            logits = model(x)
        activations = captured.get("activations")
        if activations is None or activations.dim() != 4:
            raise ExplainError("target layer produced no spatial activations")
        score = logits[0, class_index]
        with torch.enable_grad():
            grads = torch.autograd.grad(score, activations, retain_graph=False)[0]
    finally:
        handle.remove()
        model.train(was_training)

    alpha = grads.mean(dim=(2, 3), keepdim=True)          # (1, K, 1, 1)
    cam = F.relu((alpha * activations).sum(dim=1, keepdim=True))
    cam = F.interpolate(cam, size=image.shape[-2:], mode="bilinear",
                        align_corners=False)
    values = cam[0, 0].detach().cpu().numpy()
    return ExplanationMap(method=GRAD_CAM, values=values,
                          class_index=class_index, normalized=False)


def grad_cam_reference(feature_maps: np.ndarray, gradients: np.ndarray) -> np.ndarray:
    """Loop transcription of the activation-map formula at feature-map
    resolution; the independent oracle for :func:`grad_cam`."""
    k, h, w = feature_maps.shape
    z = h * w
    out = np.zeros((h, w))
    for ki in range(k):
        alpha = 0.0
        for i in range(h):
            for j in range(w):
                alpha += gradients[ki, i, j]
        alpha /= z
        for i in range(h):
            for j in range(w):
                out[i, j] += alpha * feature_maps[ki, i, j]
    return np.maximum(out, 0.0)


def _mask_distances(masks: np.ndarray, distance: str) -> np.ndarray:
    """Distance from each binary mask to the all-ones mask (the unperturbed
    instance)."""
    ones = np.ones(masks.shape[1])
    if distance == "euclidean":
        return np.linalg.norm(masks - ones, axis=1)
    norms = np.linalg.norm(masks, axis=1) * np.linalg.norm(ones)
    sims = np.divide(masks @ ones, norms, out=np.zeros(len(masks)), where=norms > 0)
    return 1.0 - sims


def fit_mask_surrogate(masks: np.ndarray, predictions: np.ndarray,
                       weights: np.ndarray) -> np.ndarray:
    """Weighted least-squares linear fit of predictions on masks (plus
    intercept); returns per-segment coefficients. Falls back to a ridge
    solve when the weighted system is singular."""
    n, k = masks.shape
    x = np.column_stack([masks.astype(float), np.ones(n)])
    sw = np.sqrt(weights)
    a = x * sw[:, None]
    b = predictions * sw
    try:
        coef, _, rank, _ = np.linalg.lstsq(a, b, rcond=None)
        if rank < k + 1:
            raise np.linalg.LinAlgError("rank deficient")
    except np.linalg.LinAlgError:
        logger.warning("singular surrogate system; using ridge fallback")
        gram = a.T @ a + 1e-6 * np.eye(k + 1)
        coef = np.linalg.solve(gram, a.T @ b)
    return coef[:k]


def explain_masks(predict_fn, n_segments: int, config: LimeConfig,
                  seed: int) -> np.ndarray:
    """Core perturbation loop over binary segment masks.

    ``predict_fn(masks) -> predictions`` scores a (n_samples, n_segments)
    batch of masks; how masks become model inputs is the caller's concern.
    Returns the surrogate coefficients, deterministic under ``seed``.
    """
    rng = np.random.default_rng(seed)
    masks = rng.integers(0, 2, size=(config.n_samples, n_segments)).astype(np.int8)
    predictions = np.asarray(predict_fn(masks), dtype=float)
    sigma = config.sigma(n_segments)
    dists = _mask_distances(masks, config.distance)
    weights = np.exp(-(dists ** 2) / sigma ** 2)
    return fit_mask_surrogate(masks, predictions, weights)


def lime_explain(model: torch.nn.Module, image: torch.Tensor, class_index: int,
                 config: LimeConfig | None = None, seed: int = 0,
                 batch_size: int = 64) -> ExplanationMap:
    """Superpixel surrogate explanation of ``class_index``'s probability.

    ``image`` is a preprocessed (3, H, W) tensor. Masked-out segments are
    replaced by the per-image mean (channelwise), keeping perturbed inputs
    in-distribution for radiographs.
    """
    config = config or LimeConfig()
    if image.dim() == 4:
        image = image[0]
    img_np = image.permute(1, 2, 0).cpu().numpy()
    # segment on a [0,1] rescaling; the model still sees the original tensor
    lo, hi = img_np.min(), img_np.max()
    seg_input = (img_np - lo) / (hi - lo) if hi > lo else np.zeros_like(img_np)
    # convert2lab off: radiographs are replicated grayscale, not true color
    segments = slic(seg_input, n_segments=config.n_segments, channel_axis=2,
                    start_label=0, enforce_connectivity=True, convert2lab=False)
    labels = np.unique(segments)
    if len(labels) < 2:
        raise ExplainError("image did not segment into >= 2 superpixels")
    # relabel to consecutive 0..k-1
    remap = {lab: i for i, lab in enumerate(labels)}
    segments = np.vectorize(remap.get)(segments)
    k = len(labels)

    fill = image.mean(dim=(1, 2), keepdim=True)  # channelwise mean fill
    seg_tensor = torch.from_numpy(segments).long()
    was_training = model.training
    model.eval()

    def predict(masks: np.ndarray) -> np.ndarray:
        probs = np.empty(len(masks))
        with torch.no_grad():
            for start in range(0, len(masks), batch_size):
                chunk = masks[start:start + batch_size]
                batch = []
                for m in chunk:
                    keep = torch.from_numpy(m.astype(np.float32))[seg_tensor]  # (H, W)
                    batch.append(image * keep + fill * (1 - keep))
                logits = model(torch.stack(batch))
                p = torch.softmax(logits, dim=1)[:, class_index]
                probs[start:start + len(chunk)] = p.cpu().numpy()
        return probs

    try:
        coefs = explain_masks(predict, k, config, seed)
    finally:
        model.train(was_training)

    values = coefs[segments]
    return ExplanationMap(method=LIME, values=values, class_index=class_index,
                          normalized=False, segments=segments)


def _to_uint8_rgb(image) -> np.ndarray:
    arr = np.asarray(image)
    if arr.dtype != np.uint8:
        arr = np.clip(arr, 0.0, 1.0)
        arr = (arr * 255).astype(np.uint8)
    if arr.ndim == 2:
        arr = np.stack([arr] * 3, axis=-1)
    return arr


def render_overlay(image, emap: ExplanationMap, alpha: float = 0.5,
                   top_k: int = 5) -> np.ndarray:
    """Overlay rendering for auditors; returns an (H, W, 3) uint8 array.

    Continuous maps blend a jet colormap at opacity ``alpha`` scaled by the
    map value; segment maps outline the top-k segments. The all-zero map and
    alpha=0 reproduce the input.
    """
    if not emap.normalized:
        raise ExplainError("overlay requires a normalized map")
    base = _to_uint8_rgb(image).astype(np.float64)
    if emap.method == LIME and emap.segments is not None:
        if emap.values.max() <= 0:
            return base.astype(np.uint8)
        seg_scores = {}
        for lab in np.unique(emap.segments):
            seg_scores[lab] = emap.values[emap.segments == lab].max()
        top = sorted(seg_scores, key=seg_scores.get, reverse=True)
        top = [lab for lab in top if seg_scores[lab] > 0][:top_k]
        out = base.copy()
        for lab in top:
            boundary = find_boundaries(emap.segments == lab, mode="thick")
            out[boundary] = (1 - alpha) * out[boundary] + alpha * np.array([255.0, 255.0, 0.0])
        return np.clip(out, 0, 255).astype(np.uint8)

    import matplotlib
    cmap = matplotlib.colormaps["jet"]
    heat = cmap(emap.values)[..., :3] * 255.0
    weight = alpha * emap.values[..., None]
    out = (1 - weight) * base + weight * heat
    return np.clip(out, 0, 255).astype(np.uint8)
