"""Corpus ingestion, stratified splitting, class balancing, and preprocessing.

The corpus lives on disk as ``<root>/<class_name>/*.png|jpg``. A manifest
indexes every sample together with its split and provenance; it is persisted
as line-delimited JSON (one header line, then one object per sample).
"""

from __future__ import annotations

import hashlib
import json
import logging
import random
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import torch
from PIL import Image, ImageEnhance

logger = logging.getLogger(__name__)

# Fixed class order; confusion-matrix axes and manifest headers rely on it.
CLASS_NAMES = ("crack", "lack_of_penetration", "no_defect", "porosity")

IMAGE_EXTENSIONS = {".png", ".jpg", ".jpeg", ".bmp"}

TRAIN = "train"
VAL = "val"
ORIGINAL = "original"
AUGMENTED = "augmented"


class DatasetError(Exception):
    """Structural problem with the corpus or manifest."""


@dataclass(frozen=True)
class SampleEntry:
    path: str            # relative to the manifest root
    label: str
    split: str | None = None
    origin: str = ORIGINAL
    augment_seed: int | None = None

    def __post_init__(self):
        if self.origin == AUGMENTED and self.augment_seed is None:
            raise DatasetError(f"augmented sample {self.path} lacks augment_seed")
        if self.origin == AUGMENTED and self.split != TRAIN:
            raise DatasetError(f"augmented sample {self.path} outside train split")

    def to_json(self) -> dict:
        return {
            "path": self.path,
            "label": self.label,
            "split": self.split,
            "origin": self.origin,
            "augment_seed": self.augment_seed,
        }

    @staticmethod
    def from_json(obj: dict) -> "SampleEntry":
        return SampleEntry(
            path=obj["path"],
            label=obj["label"],
            split=obj.get("split"),
            origin=obj.get("origin", ORIGINAL),
            augment_seed=obj.get("augment_seed"),
        )


@dataclass(frozen=True)
class DatasetManifest:
    samples: tuple[SampleEntry, ...]
    class_names: tuple[str, ...] = CLASS_NAMES
    root: str = "."

    def __post_init__(self):
        if len(self.class_names) != 4:
            raise DatasetError(f"expected 4 classes, got {len(self.class_names)}")
        seen = set()
        for s in self.samples:
            if s.label not in self.class_names:
                raise DatasetError(f"unknown label {s.label!r} for {s.path}")
            if s.path in seen:
                raise DatasetError(f"duplicate sample path {s.path}")
            seen.add(s.path)

    def counts(self, split: str | None = None) -> dict[str, int]:
        out = {c: 0 for c in self.class_names}
        for s in self.samples:
            if split is None or s.split == split:
                out[s.label] += 1
        return out

    def subset(self, split: str) -> tuple[SampleEntry, ...]:
        return tuple(s for s in self.samples if s.split == split)

    def save(self, path: str | Path) -> None:
        path = Path(path)
        with path.open("w") as f:
            header = {"class_names": list(self.class_names), "root": str(self.root)}
            f.write(json.dumps(header) + "\n")
            for s in self.samples:
                f.write(json.dumps(s.to_json()) + "\n")

    @staticmethod
    def load(path: str | Path) -> "DatasetManifest":
        path = Path(path)
        with path.open() as f:
            lines = [json.loads(line) for line in f if line.strip()]
        if not lines or "class_names" not in lines[0]:
            raise DatasetError(f"{path}: missing manifest header")
        header, rows = lines[0], lines[1:]
        return DatasetManifest(
            samples=tuple(SampleEntry.from_json(r) for r in rows),
            class_names=tuple(header["class_names"]),
            root=header["root"],
        )


@dataclass(frozen=True)
class PreprocessSpec:
    target_size: tuple[int, int] = (224, 224)  # (height, width)
    normalization_mean: tuple[float, float, float] = (0.485, 0.456, 0.406)
    normalization_std: tuple[float, float, float] = (0.229, 0.224, 0.225)
    grayscale_to_rgb: bool = True

    def __post_init__(self):
        if any(d <= 0 for d in self.target_size):
            raise DatasetError(f"non-positive target_size {self.target_size}")
        if any(s <= 0 for s in self.normalization_std):
            raise DatasetError(f"non-positive normalization_std {self.normalization_std}")


def load_manifest(root: str | Path, class_names: tuple[str, ...] = CLASS_NAMES) -> DatasetManifest:
    """Index every readable image under ``root/<class>/``.

    Missing class directories are structural errors; unreadable images are
    skipped with a warning unless a class ends up empty.
    """
    root = Path(root)
    samples = []
    for cls in class_names:
        cls_dir = root / cls
        if not cls_dir.is_dir():
            raise DatasetError(f"missing class directory: {cls_dir}")
        kept = 0
        for p in sorted(cls_dir.iterdir()):
            if p.suffix.lower() not in IMAGE_EXTENSIONS:
                continue
            try:
                with Image.open(p) as im:
                    im.verify()
            except Exception as exc:
                logger.warning("skipping unreadable image %s: %s", p, exc)
                continue
            samples.append(SampleEntry(path=str(p.relative_to(root)), label=cls))
            kept += 1
        if kept == 0:
            raise DatasetError(f"class directory {cls_dir} has no readable images")
    logger.info("indexed %d samples: %s",
                len(samples),
                {c: sum(1 for s in samples if s.label == c) for c in class_names})
    return DatasetManifest(samples=tuple(samples), class_names=class_names, root=str(root))


def split_manifest(manifest: DatasetManifest, val_fraction: float, seed: int) -> DatasetManifest:
    """Assign a stratified train/val split, deterministic under ``seed``."""
    if not 0 < val_fraction < 1:
        raise DatasetError(f"val_fraction must be in (0,1), got {val_fraction}")
    if any(s.split is not None for s in manifest.samples):
        raise DatasetError("manifest already split")
    rng = random.Random(seed)
    assigned: dict[str, str] = {}
    for cls in manifest.class_names:
        paths = sorted(s.path for s in manifest.samples if s.label == cls)
        if len(paths) < 2:
            raise DatasetError(f"class {cls} has {len(paths)} sample(s); cannot stratify")
        rng.shuffle(paths)
        n_val = int(round(val_fraction * len(paths)))
        n_val = min(max(n_val, 1), len(paths) - 1)
        for p in paths[:n_val]:
            assigned[p] = VAL
        for p in paths[n_val:]:
            assigned[p] = TRAIN
    samples = tuple(replace(s, split=assigned[s.path]) for s in manifest.samples)
    return replace(manifest, samples=samples)


def _augment_seed_for(seed: int, label: str, index: int) -> int:
    digest = hashlib.sha256(f"{seed}:{label}:{index}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


def apply_augmentation(image: Image.Image, augment_seed: int) -> Image.Image:
    """Deterministic label-preserving augmentation: flips, small rotation,
    brightness jitter."""
    rng = random.Random(augment_seed)
    out = image
    if rng.random() < 0.5:
        out = out.transpose(Image.FLIP_LEFT_RIGHT)
    if rng.random() < 0.5:
        out = out.transpose(Image.FLIP_TOP_BOTTOM)
    angle = rng.uniform(-10.0, 10.0)
    out = out.rotate(angle, resample=Image.BILINEAR)
    factor = rng.uniform(0.9, 1.1)
    out = ImageEnhance.Brightness(out).enhance(factor)
    return out


def balance_classes(manifest: DatasetManifest, seed: int,
                    materialize: bool = True) -> DatasetManifest:
    """Top up every class's train count to the max train class count with
    augmented copies of its own train samples.

    With ``materialize=True`` the augmented image files are written under the
    manifest root; otherwise only manifest entries are created (the files can
    be produced later with :func:`materialize_augmented`).
    """
    if any(s.split is None for s in manifest.samples):
        raise DatasetError("manifest must be split before balancing")
    train_counts = manifest.counts(TRAIN)
    target = max(train_counts.values())
    new_entries: list[SampleEntry] = []
    for cls in manifest.class_names:
        deficit = target - train_counts[cls]
        if deficit == 0:
            continue
        sources = sorted(
            (s for s in manifest.subset(TRAIN)
             if s.label == cls and s.origin == ORIGINAL),
            key=lambda s: s.path)
        rng = random.Random(_augment_seed_for(seed, cls, -1))
        order = list(sources)
        rng.shuffle(order)
        for i in range(deficit):
            src = order[i % len(order)]
            aug_seed = _augment_seed_for(seed, cls, i)
            stem = Path(src.path).stem
            aug_path = str(Path(src.path).parent / f"{stem}__aug{i}_{aug_seed % 10**6}.png")
            new_entries.append(SampleEntry(
                path=aug_path, label=cls, split=TRAIN,
                origin=AUGMENTED, augment_seed=aug_seed))
            if materialize:
                with Image.open(Path(manifest.root) / src.path) as im:
                    out = apply_augmentation(im.convert("RGB"), aug_seed)
                dest = Path(manifest.root) / aug_path
                dest.parent.mkdir(parents=True, exist_ok=True)
                out.save(dest)
    return replace(manifest, samples=manifest.samples + tuple(new_entries))


def preprocess(image: Image.Image | str | Path, spec: PreprocessSpec) -> torch.Tensor:
    """Resize and normalize one image to a (3, H, W) float tensor.

    Per-channel value is ``(pixel/255 - mean) / std``. Grayscale films are
    replicated to 3 channels.
    """
    if isinstance(image, (str, Path)):
        path = Path(image)
        try:
            with Image.open(path) as im:
                im.load()
                return preprocess(im, spec)
        except OSError as exc:
            raise DatasetError(f"cannot decode image {path}: {exc}") from exc
    if spec.grayscale_to_rgb or image.mode != "RGB":
        image = image.convert("RGB")
    h, w = spec.target_size
    image = image.resize((w, h), Image.BILINEAR)
    arr = np.asarray(image, dtype=np.float32) / 255.0  # (H, W, 3)
    mean = np.asarray(spec.normalization_mean, dtype=np.float32)
    std = np.asarray(spec.normalization_std, dtype=np.float32)
    arr = (arr - mean) / std
    return torch.from_numpy(np.ascontiguousarray(arr.transpose(2, 0, 1)))


class ManifestImageDataset(torch.utils.data.Dataset):
    """Torch dataset over a manifest split; augmented entries without a file
    on disk are regenerated from their source image and seed."""

    def __init__(self, manifest: DatasetManifest, split: str, spec: PreprocessSpec):
        self.manifest = manifest
        self.entries = manifest.subset(split)
        self.spec = spec
        self.class_index = {c: i for i, c in enumerate(manifest.class_names)}

    def __len__(self) -> int:
        return len(self.entries)

    def __getitem__(self, idx: int) -> tuple[torch.Tensor, int]:
        entry = self.entries[idx]
        path = Path(self.manifest.root) / entry.path
        if entry.origin == AUGMENTED and not path.exists():
            src = _augmented_source_path(self.manifest.root, entry.path)
            with Image.open(src) as im:
                img = apply_augmentation(im.convert("RGB"), entry.augment_seed)
            tensor = preprocess(img, self.spec)
        else:
            tensor = preprocess(path, self.spec)
        return tensor, self.class_index[entry.label]


def _augmented_source_path(root: str | Path, aug_path: str) -> Path:
    p = Path(aug_path)
    stem = p.stem.split("__aug")[0]
    parent = Path(root) / p.parent
    for ext in sorted(IMAGE_EXTENSIONS):
        candidate = parent / f"{stem}{ext}"
        if candidate.exists():
            return candidate
    raise DatasetError(f"source image for augmented entry {aug_path} not found")


def materialize_augmented(manifest: DatasetManifest) -> int:
    """Write any augmented entries that are not yet on disk; returns count."""
    written = 0
    for entry in manifest.samples:
        if entry.origin != AUGMENTED:
            continue
        dest = Path(manifest.root) / entry.path
        if dest.exists():
            continue
        src = _augmented_source_path(manifest.root, entry.path)
        with Image.open(src) as im:
            out = apply_augmentation(im.convert("RGB"), entry.augment_seed)
        dest.parent.mkdir(parents=True, exist_ok=True)
        out.save(dest)
        written += 1
    return written
