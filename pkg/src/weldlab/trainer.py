"""Pretrained backbones, freeze policies, optimizers, and the training loop.

Eight torchvision backbones are supported, each with a replaceable
classifier head. Three freeze policies control which parameters train; the
"early layers" cut per architecture is a data table below and can be
overridden. Training is cross-entropy with early stopping on validation
accuracy and best-weight restoration.
"""

from __future__ import annotations

import copy
import logging
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
import torch
import torch.nn as nn
from torch.utils.data import DataLoader
from torchvision import models

logger = logging.getLogger(__name__)


class ConfigurationError(Exception):
    pass


class NonFiniteLossError(Exception):
    """Training loss became NaN/inf; the trial is reported failed upstream."""


class Architecture(str, Enum):
    resnet18 = "resnet18"
    densenet121 = "densenet121"
    efficientnet_b0 = "efficientnet_b0"
    efficientnet_v2_s = "efficientnet_v2_s"
    mobilenet_v2 = "mobilenet_v2"
    wide_resnet50_2 = "wide_resnet50_2"
    shufflenet_v2_x0_5 = "shufflenet_v2_x0_5"
    squeezenet1_0 = "squeezenet1_0"


class TransferMode(str, Enum):
    freeze_early_layers = "freeze_early_layers"
    freeze_all = "freeze_all"
    fine_tune_all = "fine_tune_all"


class OptimizerId(str, Enum):
    adam = "adam"
    adamw = "adamw"
    sgd = "sgd"
    rmsprop = "rmsprop"
    adagrad = "adagrad"
    adadelta = "adadelta"
    adamax = "adamax"


# Per-architecture metadata: torchvision builder, the classifier-head module
# path, the top-level module paths frozen under freeze_early_layers (first
# half of the parameter-bearing blocks), and the spatial layer Grad-CAM
# attaches to by default.
_ARCH_TABLE: dict[str, dict] = {
    "resnet18": dict(
        builder=models.resnet18,
        head="fc",
        early=["conv1", "bn1", "layer1", "layer2"],
        cam_layer="layer4",
    ),
    "wide_resnet50_2": dict(
        builder=models.wide_resnet50_2,
        head="fc",
        early=["conv1", "bn1", "layer1", "layer2"],
        cam_layer="layer4",
    ),
    "densenet121": dict(
        builder=models.densenet121,
        head="classifier",
        early=["features.conv0", "features.norm0",
               "features.denseblock1", "features.transition1",
               "features.denseblock2", "features.transition2"],
        cam_layer="features",
    ),
    "efficientnet_b0": dict(
        builder=models.efficientnet_b0,
        head="classifier.1",
        early=[f"features.{i}" for i in range(5)],
        cam_layer="features",
    ),
    "efficientnet_v2_s": dict(
        builder=models.efficientnet_v2_s,
        head="classifier.1",
        early=[f"features.{i}" for i in range(4)],
        cam_layer="features",
    ),
    "mobilenet_v2": dict(
        builder=models.mobilenet_v2,
        head="classifier.1",
        early=[f"features.{i}" for i in range(10)],
        cam_layer="features",
    ),
    "shufflenet_v2_x0_5": dict(
        builder=models.shufflenet_v2_x0_5,
        head="fc",
        early=["conv1", "stage2"],
        cam_layer="conv5",
    ),
    "squeezenet1_0": dict(
        builder=models.squeezenet1_0,
        head="classifier.1",
        early=["features.0", "features.3", "features.4",
               "features.5", "features.7"],
        cam_layer="features",
    ),
}


def _get_submodule(model: nn.Module, path: str) -> nn.Module:
    mod = model
    for part in path.split("."):
        mod = getattr(mod, part) if not part.isdigit() else mod[int(part)]
    return mod


def _set_submodule(model: nn.Module, path: str, new: nn.Module) -> None:
    parts = path.split(".")
    parent = model
    for part in parts[:-1]:
        parent = getattr(parent, part) if not part.isdigit() else parent[int(part)]
    last = parts[-1]
    if last.isdigit():
        parent[int(last)] = new
    else:
        setattr(parent, last, new)


def head_path(arch: Architecture | str) -> str:
    return _ARCH_TABLE[Architecture(arch).value]["head"]


def cam_layer_path(arch: Architecture | str) -> str:
    return _ARCH_TABLE[Architecture(arch).value]["cam_layer"]


def early_frozen_paths(arch: Architecture | str) -> list[str]:
    return list(_ARCH_TABLE[Architecture(arch).value]["early"])


def build_model(arch: Architecture | str, num_classes: int,
                pretrained: bool = True) -> nn.Module:
    """Build a backbone and swap its classifier head for ``num_classes``
    outputs. Non-head weights keep the pretrained values when asked."""
    if num_classes < 2:
        raise ConfigurationError(f"num_classes must be >= 2, got {num_classes}")
    try:
        entry = _ARCH_TABLE[Architecture(arch).value]
    except ValueError:
        raise ConfigurationError(f"unknown architecture: {arch!r}") from None
    model = entry["builder"](weights="DEFAULT" if pretrained else None)
    path = entry["head"]
    old = _get_submodule(model, path)
    if isinstance(old, nn.Linear):
        new: nn.Module = nn.Linear(old.in_features, num_classes)
    elif isinstance(old, nn.Conv2d):  # squeezenet classifies with a 1x1 conv
        new = nn.Conv2d(old.in_channels, num_classes, kernel_size=1)
    else:
        raise ConfigurationError(f"unsupported head module {type(old)} at {path}")
    _set_submodule(model, path, new)
    if hasattr(model, "num_classes"):
        model.num_classes = num_classes
    model.weldlab_arch = Architecture(arch).value
    return model


def _head_param_names(model: nn.Module, arch: str) -> set[str]:
    prefix = _ARCH_TABLE[arch]["head"] + "."
    return {n for n, _ in model.named_parameters() if n.startswith(prefix)}


def apply_transfer_mode(model: nn.Module, mode: TransferMode | str,
                        early_override: list[str] | None = None) -> nn.Module:
    """Set requires_grad per freeze policy; returns the same model."""
    mode = TransferMode(mode)
    arch = getattr(model, "weldlab_arch", None)
    if arch is None:
        raise ConfigurationError("model was not produced by build_model")
    head_names = _head_param_names(model, arch)
    if mode is TransferMode.fine_tune_all:
        for p in model.parameters():
            p.requires_grad_(True)
    elif mode is TransferMode.freeze_all:
        for n, p in model.named_parameters():
            p.requires_grad_(n in head_names)
    else:
        frozen_prefixes = tuple(p + "." for p in (early_override or _ARCH_TABLE[arch]["early"]))
        for n, p in model.named_parameters():
            frozen = n.startswith(frozen_prefixes) and n not in head_names
            p.requires_grad_(not frozen)
    return model


_OPTIMIZERS = {
    "adam": torch.optim.Adam,
    "adamw": torch.optim.AdamW,
    "sgd": torch.optim.SGD,
    "rmsprop": torch.optim.RMSprop,
    "adagrad": torch.optim.Adagrad,
    "adadelta": torch.optim.Adadelta,
    "adamax": torch.optim.Adamax,
}


def build_optimizer(opt: OptimizerId | str, trainable_params, lr: float) -> torch.optim.Optimizer:
    """Standard update rules with published default secondary constants; only
    the learning rate is tuned."""
    if lr <= 0:
        raise ConfigurationError(f"learning rate must be positive, got {lr}")
    try:
        cls = _OPTIMIZERS[OptimizerId(opt).value]
    except ValueError:
        raise ConfigurationError(f"unknown optimizer: {opt!r}") from None
    params = list(trainable_params)
    if not params:
        raise ConfigurationError("no trainable parameters")
    return cls(params, lr=lr)


@dataclass
class ConfusionMatrix:
    counts: np.ndarray  # rows = true class, cols = predicted class
    class_names: tuple[str, ...]

    @property
    def accuracy(self) -> float:
        total = int(self.counts.sum())
        return float(np.trace(self.counts)) / total if total else 0.0

    def to_dict(self) -> dict:
        return {"counts": self.counts.tolist(), "class_names": list(self.class_names)}

    @staticmethod
    def from_dict(d: dict) -> "ConfusionMatrix":
        return ConfusionMatrix(np.asarray(d["counts"], dtype=np.int64),
                               tuple(d["class_names"]))


@dataclass
class TrainReport:
    epoch_history: list[tuple[float, float]]  # (train_loss, val_accuracy)
    best_val_accuracy: float
    best_epoch: int  # 1-based
    stopped_early: bool
    confusion: ConfusionMatrix | None = None

    def to_dict(self) -> dict:
        return {
            "epoch_history": [list(e) for e in self.epoch_history],
            "best_val_accuracy": self.best_val_accuracy,
            "best_epoch": self.best_epoch,
            "stopped_early": self.stopped_early,
            "confusion": self.confusion.to_dict() if self.confusion else None,
        }

    @staticmethod
    def from_dict(d: dict) -> "TrainReport":
        conf = d.get("confusion")
        return TrainReport(
            epoch_history=[tuple(e) for e in d["epoch_history"]],
            best_val_accuracy=d["best_val_accuracy"],
            best_epoch=d["best_epoch"],
            stopped_early=d["stopped_early"],
            confusion=ConfusionMatrix.from_dict(conf) if conf else None,
        )


class EarlyStopping:
    """Stops after ``patience`` consecutive epochs without strict improvement
    in validation accuracy. Ties count toward patience."""

    def __init__(self, patience: int = 5):
        if patience < 1:
            raise ConfigurationError(f"patience must be >= 1, got {patience}")
        self.patience = patience
        self.best = -math.inf
        self.best_epoch = 0
        self.stale = 0

    def update(self, epoch: int, val_accuracy: float) -> bool:
        """Record one epoch (1-based); returns True when training should stop."""
        if val_accuracy > self.best:
            self.best = val_accuracy
            self.best_epoch = epoch
            self.stale = 0
        else:
            self.stale += 1
        return self.stale >= self.patience


def scripted_stop_epoch(val_accuracies: list[float], patience: int = 5,
                        max_epochs: int = 100) -> tuple[int, int, bool]:
    """Replay a validation-accuracy sequence through the stopping rule.

    Returns (epochs_run, best_epoch, stopped_early).
    """
    stopper = EarlyStopping(patience)
    epochs_run = 0
    for epoch, acc in enumerate(val_accuracies[:max_epochs], start=1):
        epochs_run = epoch
        if stopper.update(epoch, acc):
            return epochs_run, stopper.best_epoch, True
    return epochs_run, stopper.best_epoch, False


def evaluate(model: nn.Module, dataset, batch_size: int = 32,
             class_names: tuple[str, ...] | None = None,
             device: str = "cpu") -> tuple[float, ConfusionMatrix]:
    """Accuracy and confusion matrix over a labeled dataset, in manifest
    order (no shuffling) for determinism."""
    if len(dataset) == 0:
        raise ConfigurationError("evaluation dataset is empty")
    if class_names is None:
        if hasattr(dataset, "manifest"):
            class_names = tuple(dataset.manifest.class_names)
        else:
            class_names = getattr(dataset, "class_names", None)
    loader = DataLoader(dataset, batch_size=batch_size, shuffle=False)
    model.eval()
    all_true, all_pred = [], []
    with torch.no_grad():
        for x, y in loader:
            logits = model(x.to(device))
            all_pred.append(logits.argmax(dim=1).cpu())
            all_true.append(y)
    true = torch.cat(all_true).numpy()
    pred = torch.cat(all_pred).numpy()
    n = int(max(true.max(), pred.max())) + 1 if class_names is None else len(class_names)
    counts = np.zeros((n, n), dtype=np.int64)
    np.add.at(counts, (true, pred), 1)
    names = class_names or tuple(str(i) for i in range(n))
    cm = ConfusionMatrix(counts, tuple(names))
    return cm.accuracy, cm


def train_with_early_stopping(model: nn.Module, train_set, val_set,
                              opt: OptimizerId | str, lr: float,
                              batch_size: int, max_epochs: int = 100,
                              patience: int = 5, seed: int | None = None,
                              device: str = "cpu",
                              class_names: tuple[str, ...] | None = None) -> TrainReport:
    """Cross-entropy training with early stopping on validation accuracy and
    best-weight restoration."""
    if len(train_set) == 0 or len(val_set) == 0:
        raise ConfigurationError("train and val sets must be nonempty")
    generator = torch.Generator()
    if seed is not None:
        generator.manual_seed(seed)
        torch.manual_seed(seed)
    loader = DataLoader(train_set, batch_size=batch_size, shuffle=True,
                        generator=generator)
    optimizer = build_optimizer(opt, (p for p in model.parameters() if p.requires_grad), lr)
    criterion = nn.CrossEntropyLoss()
    stopper = EarlyStopping(patience)
    history: list[tuple[float, float]] = []
    best_state = None
    model.to(device)
    epochs_run = 0
    for epoch in range(1, max_epochs + 1):
        model.train()
        losses = []
        for x, y in loader:
            optimizer.zero_grad()
            loss = criterion(model(x.to(device)), y.to(device))
            if not torch.isfinite(loss):
                raise NonFiniteLossError(
                    f"non-finite loss at epoch {epoch} (lr={lr}, opt={opt})")
            loss.backward()
            optimizer.step()
            losses.append(float(loss.detach()))
        val_acc, _ = evaluate(model, val_set, batch_size=batch_size,
                              class_names=class_names, device=device)
        history.append((float(np.mean(losses)), val_acc))
        epochs_run = epoch
        improved = val_acc > stopper.best
        stop = stopper.update(epoch, val_acc)
        if improved:
            best_state = copy.deepcopy(model.state_dict())
        logger.debug("epoch %d: loss=%.4f val_acc=%.4f", epoch, history[-1][0], val_acc)
        if stop:
            break
    if best_state is not None:
        model.load_state_dict(best_state)
    _, confusion = evaluate(model, val_set, batch_size=batch_size,
                            class_names=class_names, device=device)
    return TrainReport(
        epoch_history=history,
        best_val_accuracy=stopper.best,
        best_epoch=stopper.best_epoch,
        stopped_early=epochs_run < max_epochs,
        confusion=confusion,
    )


def save_checkpoint(path, model: nn.Module, report: TrainReport,
                    config: dict | None = None, num_classes: int = 4) -> None:
    torch.save({
        "arch": getattr(model, "weldlab_arch"),
        "num_classes": num_classes,
        "state_dict": model.state_dict(),
        "report": report.to_dict(),
        "config": config or {},
    }, path)


def load_checkpoint(path, device: str = "cpu") -> tuple[nn.Module, TrainReport, dict]:
    blob = torch.load(path, map_location=device, weights_only=False)
    model = build_model(blob["arch"], blob["num_classes"], pretrained=False)
    model.load_state_dict(blob["state_dict"])
    model.eval()
    return model, TrainReport.from_dict(blob["report"]), blob.get("config", {})
