import numpy as np
import pytest
import torch
from PIL import Image

from weldlab import dataset as ds


@pytest.fixture
def tiny_corpus(tmp_path):
    """4-class corpus with 6 images per class."""
    rng = np.random.default_rng(0)
    for cls in ds.CLASS_NAMES:
        (tmp_path / cls).mkdir()
        for i in range(6):
            arr = rng.integers(0, 255, (32, 32), dtype=np.uint8)
            Image.fromarray(arr).save(tmp_path / cls / f"{cls}_{i}.png")
    return tmp_path


class TensorPairs(torch.utils.data.Dataset):
    """Labeled tensor dataset with the class_index attribute the trainer
    expects on manifest datasets."""

    def __init__(self, x, y, class_names=("a", "b")):
        self.x, self.y = x, y
        self.class_names = tuple(class_names)
        self.class_index = {c: i for i, c in enumerate(class_names)}

    def __len__(self):
        return len(self.x)

    def __getitem__(self, i):
        return self.x[i], self.y[i]


def separable_image_set(n: int, size: int = 64, seed: int = 42):
    """2-class linearly separable synthetic films: bright band at the top
    (class 0) or the bottom (class 1) over noise."""
    rng = np.random.default_rng(seed)
    xs, ys = [], []
    for i in range(n):
        label = i % 2
        img = rng.normal(0, 0.3, (3, size, size)).astype(np.float32)
        band = slice(0, size // 3) if label == 0 else slice(-size // 3, None)
        img[:, band, :] += 2.0
        xs.append(img)
        ys.append(label)
    return torch.tensor(np.stack(xs)), torch.tensor(ys)


def make_record(**overrides) -> dict:
    base = dict(
        case_id="case-1",
        auditor_id="auditor-1",
        detected_gradcam=True,
        detected_lime=True,
        image_quality="clear",
        visibility_gradcam="clearly_visible",
        visibility_lime="partially_visible",
        defect_type="crack",
        confidence_gradcam=4,
        confidence_lime=3,
        timestamp=100.0,
    )
    base.update(overrides)
    return base
