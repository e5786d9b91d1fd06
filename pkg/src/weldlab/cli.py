"""Command-line entry point.

Subcommands: ``data prepare``, ``search run|best|export``, ``train best``,
``explain``, ``locmetric eval``, ``ddia serve|report|export|create``.
Every artifact-producing command writes a ``run.json`` provenance file
(resolved configuration, seeds, versions, wall time) into its output
directory. A declarative JSON config file may supply defaults; explicit
flags win. Unknown config keys are rejected.
"""

from __future__ import annotations

import json
import platform
import sys
import time
from pathlib import Path

import click
import numpy as np

from . import __version__
from . import dataset as ds
from . import locmetric as lm
from . import search as se
from . import trainer as tr

CONFIG_KEYS = {
    "dataset_root", "manifest", "val_fraction", "balance", "trials", "sampler",
    "study_seed", "split_seed", "balance_seed", "max_epochs", "patience",
    "pretrained", "image_size", "out_dir", "lr_range", "batch_sizes",
    "architectures", "modes", "optimizers",
}


def load_config(path: str | None) -> dict:
    if path is None:
        return {}
    cfg = json.loads(Path(path).read_text())
    unknown = set(cfg) - CONFIG_KEYS
    if unknown:
        raise click.ClickException(f"unknown config keys: {sorted(unknown)}")
    return cfg


def resolve(cfg: dict, key: str, flag_value, default):
    """Flag beats config file beats default."""
    if flag_value is not None:
        return flag_value
    return cfg.get(key, default)


def write_run_json(out_dir: Path, command: str, resolved: dict, started: float) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    payload = {
        "command": command,
        "config": resolved,
        "versions": {"weldlab": __version__, "python": platform.python_version()},
        "wall_time_s": round(time.monotonic() - started, 3),
    }
    (out_dir / "run.json").write_text(json.dumps(payload, indent=2, sort_keys=True))


def build_space(cfg: dict) -> se.SearchSpace:
    kwargs = {}
    if "architectures" in cfg:
        kwargs["architectures"] = tuple(cfg["architectures"])
    if "modes" in cfg:
        kwargs["modes"] = tuple(cfg["modes"])
    if "optimizers" in cfg:
        kwargs["optimizers"] = tuple(cfg["optimizers"])
    if "lr_range" in cfg:
        kwargs["lr_range"] = tuple(cfg["lr_range"])
    if "batch_sizes" in cfg:
        kwargs["batch_sizes"] = tuple(cfg["batch_sizes"])
    return se.SearchSpace(**kwargs)


def load_datasets(root: str, image_size: int, val_fraction: float, seed: int):
    root_path = Path(root)
    manifest_file = root_path if root_path.suffix == ".jsonl" else root_path / "manifest.jsonl"
    if manifest_file.exists():
        manifest = ds.DatasetManifest.load(manifest_file)
    else:
        manifest = ds.load_manifest(root_path)
        manifest = ds.split_manifest(manifest, val_fraction, seed)
    spec = ds.PreprocessSpec(target_size=(image_size, image_size))
    train_set = ds.ManifestImageDataset(manifest, ds.TRAIN, spec)
    val_set = ds.ManifestImageDataset(manifest, ds.VAL, spec)
    return manifest, train_set, val_set


@click.group()
def main():
    """Weld-radiograph defect classification workbench."""


# ---------------------------------------------------------------- data

@main.group()
def data():
    """Corpus preparation."""


@data.command("prepare")
@click.option("--root", required=True, type=click.Path(exists=True))
@click.option("--config", "config_path", type=click.Path(exists=True))
@click.option("--val-fraction", type=float, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--balance/--no-balance", default=True)
@click.option("--out", type=click.Path(), default=None,
              help="manifest path (default <root>/manifest.jsonl)")
def data_prepare(root, config_path, val_fraction, seed, balance, out):
    """Index, split, and balance the corpus; writes manifest.jsonl."""
    started = time.monotonic()
    cfg = load_config(config_path)
    val_fraction = resolve(cfg, "val_fraction", val_fraction, 0.2)
    seed = resolve(cfg, "split_seed", seed, 0)
    manifest = ds.load_manifest(root)
    manifest = ds.split_manifest(manifest, val_fraction, seed)
    if balance:
        manifest = ds.balance_classes(manifest, resolve(cfg, "balance_seed", None, seed))
    out_path = Path(out) if out else Path(root) / "manifest.jsonl"
    manifest.save(out_path)
    counts = manifest.counts(ds.TRAIN)
    click.echo(f"wrote {out_path} ({len(manifest.samples)} samples, train counts {counts})")
    write_run_json(out_path.parent, "data prepare",
                   {"root": str(root), "val_fraction": val_fraction,
                    "split_seed": seed, "balance": balance}, started)


# ---------------------------------------------------------------- search

@main.group()
def search():
    """Configuration search."""


@search.command("run")
@click.option("--data", "data_root", required=True, type=click.Path(exists=True))
@click.option("--config", "config_path", type=click.Path(exists=True))
@click.option("--trials", type=int, default=None)
@click.option("--sampler", type=click.Choice(["random", "adaptive"]), default=None)
@click.option("--seed", type=int, default=None)
@click.option("--max-epochs", type=int, default=None)
@click.option("--patience", type=int, default=None)
@click.option("--pretrained/--no-pretrained", default=None)
@click.option("--image-size", type=int, default=None)
@click.option("--out", type=click.Path(), default="study")
def search_run(data_root, config_path, trials, sampler, seed, max_epochs,
               patience, pretrained, image_size, out):
    """Run (or resume) a study; log flushed after every trial."""
    started = time.monotonic()
    cfg = load_config(config_path)
    trials = resolve(cfg, "trials", trials, 50)
    sampler = resolve(cfg, "sampler", sampler, "random")
    study_seed = resolve(cfg, "study_seed", seed, 0)
    max_epochs = resolve(cfg, "max_epochs", max_epochs, 100)
    patience = resolve(cfg, "patience", patience, 5)
    pretrained = resolve(cfg, "pretrained", pretrained, True)
    image_size = resolve(cfg, "image_size", image_size, 224)
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)

    _, train_set, val_set = load_datasets(
        data_root, image_size, cfg.get("val_fraction", 0.2),
        cfg.get("split_seed", study_seed))
    space = build_space(cfg)
    log_path = out_dir / "study.jsonl"
    try:
        log = se.run_study(space, (train_set, val_set), n_trials=trials,
                           sampler=sampler, study_seed=study_seed,
                           log_path=log_path, budget=(max_epochs, patience),
                           pretrained=pretrained)
    except KeyboardInterrupt:
        click.echo("study interrupted; resume with the same command", err=True)
        sys.exit(3)
    resolved = {"data": str(data_root), "trials": trials, "sampler": sampler,
                "study_seed": study_seed, "max_epochs": max_epochs,
                "patience": patience, "pretrained": pretrained,
                "image_size": image_size}
    write_run_json(out_dir, "search run", resolved, started)
    config, result = se.best_trial(log)
    click.echo(f"best trial {config.trial_id}: objective={result.objective:.4f} "
               f"{config.categoricals()} lr={config.lr:.3g}")


@search.command("best")
@click.option("--log", "log_path", required=True, type=click.Path(exists=True))
def search_best(log_path):
    """Print the best completed trial."""
    log = se.StudyLog.load(log_path)
    try:
        config, result = se.best_trial(log)
    except se.SearchError as exc:
        raise click.ClickException(str(exc))
    click.echo(json.dumps({"config": config.to_json(),
                           "objective": result.objective}, indent=2))


@search.command("export")
@click.option("--log", "log_path", required=True, type=click.Path(exists=True))
@click.option("--out", type=click.Path(), default="analysis")
def search_export(log_path, out):
    """Write parallel-coordinates, scatter, and box-plot tables."""
    started = time.monotonic()
    log = se.StudyLog.load(log_path)
    written = se.write_analysis(log, out)
    write_run_json(Path(out), "search export", {"log": str(log_path)}, started)
    for p in written:
        click.echo(str(p))


# ---------------------------------------------------------------- train

@main.group()
def train():
    """Model training."""


@train.command("best")
@click.option("--log", "log_path", required=True, type=click.Path(exists=True))
@click.option("--data", "data_root", required=True, type=click.Path(exists=True))
@click.option("--config", "config_path", type=click.Path(exists=True))
@click.option("--max-epochs", type=int, default=None)
@click.option("--patience", type=int, default=None)
@click.option("--pretrained/--no-pretrained", default=None)
@click.option("--image-size", type=int, default=None)
@click.option("--out", type=click.Path(), default="best_model")
def train_best(log_path, data_root, config_path, max_epochs, patience,
               pretrained, image_size, out):
    """Retrain the study's best configuration and save a checkpoint."""
    started = time.monotonic()
    cfg = load_config(config_path)
    max_epochs = resolve(cfg, "max_epochs", max_epochs, 100)
    patience = resolve(cfg, "patience", patience, 5)
    pretrained = resolve(cfg, "pretrained", pretrained, True)
    image_size = resolve(cfg, "image_size", image_size, 224)
    log = se.StudyLog.load(log_path)
    config, logged = se.best_trial(log)
    manifest, train_set, val_set = load_datasets(
        data_root, image_size, cfg.get("val_fraction", 0.2),
        cfg.get("split_seed", log.study_seed))
    import torch
    torch.manual_seed(config.seed)  # replay the head init the study used
    model = tr.build_model(config.arch, len(manifest.class_names), pretrained=pretrained)
    tr.apply_transfer_mode(model, config.mode)
    report = tr.train_with_early_stopping(
        model, train_set, val_set, config.opt, config.lr, config.batch_size,
        max_epochs=max_epochs, patience=patience, seed=config.seed,
        class_names=tuple(manifest.class_names))
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    ckpt = out_dir / f"trial_{config.trial_id}.ckpt"
    tr.save_checkpoint(ckpt, model, report, config.to_json(),
                       num_classes=len(manifest.class_names))
    (out_dir / "train_report.json").write_text(json.dumps(report.to_dict(), indent=2))
    write_run_json(out_dir, "train best",
                   {"log": str(log_path), "data": str(data_root),
                    "config": config.to_json(), "logged_objective": logged.objective,
                    "max_epochs": max_epochs, "patience": patience,
                    "pretrained": pretrained, "image_size": image_size}, started)
    click.echo(f"saved {ckpt} (best_val_accuracy={report.best_val_accuracy:.4f}, "
               f"logged {logged.objective:.4f})")


# ---------------------------------------------------------------- explain

@main.command("explain")
@click.option("--method", type=click.Choice(["gradcam", "lime", "both"]), default="both")
@click.option("--image", "image_path", required=True, type=click.Path(exists=True))
@click.option("--checkpoint", required=True, type=click.Path(exists=True))
@click.option("--class-index", type=int, default=None,
              help="class to explain (default: the prediction)")
@click.option("--image-size", type=int, default=224)
@click.option("--seed", type=int, default=0)
@click.option("--alpha", type=float, default=0.5)
@click.option("--out", type=click.Path(), default="explanations")
def explain_cmd(method, image_path, checkpoint, class_index, image_size,
                seed, alpha, out):
    """Write raw explanation grids, JSON sidecars, and overlay PNGs."""
    import torch
    from PIL import Image

    from . import explain as ex

    started = time.monotonic()
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    model, _, _ = tr.load_checkpoint(checkpoint)
    spec = ds.PreprocessSpec(target_size=(image_size, image_size))
    tensor = ds.preprocess(image_path, spec)
    if class_index is None:
        with torch.no_grad():
            class_index = int(model(tensor.unsqueeze(0)).argmax())
    with Image.open(image_path) as im:
        display = np.asarray(im.convert("RGB").resize((image_size, image_size),
                                                      Image.BILINEAR))
    stem = Path(image_path).stem
    methods = ["gradcam", "lime"] if method == "both" else [method]
    for m in methods:
        if m == "gradcam":
            emap = ex.grad_cam(model, tensor, class_index).normalize()
        else:
            emap = ex.lime_explain(model, tensor, class_index, seed=seed).normalize()
        np.save(out_dir / f"{stem}_{m}.npy", emap.values.astype(np.float32))
        (out_dir / f"{stem}_{m}.json").write_text(json.dumps({
            "method": emap.method, "class_index": emap.class_index,
            "image_path": str(image_path), "normalized": emap.normalized}))
        overlay = ex.render_overlay(display, emap, alpha=alpha)
        Image.fromarray(overlay).save(out_dir / f"{stem}_{m}_overlay.png")
        click.echo(f"wrote {stem}_{m} map + overlay")
    write_run_json(out_dir, "explain",
                   {"method": method, "image": str(image_path),
                    "checkpoint": str(checkpoint), "class_index": class_index,
                    "seed": seed, "alpha": alpha}, started)


# ---------------------------------------------------------------- locmetric

@main.group("locmetric")
def locmetric_group():
    """Explanation localization scoring."""


@locmetric_group.command("eval")
@click.option("--checkpoint", required=True, type=click.Path(exists=True))
@click.option("--annotations", required=True, type=click.Path(exists=True))
@click.option("--mode", type=click.Choice([lm.SOFT, lm.BINARY]), default=lm.BINARY)
@click.option("--tau", type=float, default=0.5)
@click.option("--image-size", type=int, default=224)
@click.option("--out", type=click.Path(), default="recall_report.json")
def locmetric_eval(checkpoint, annotations, mode, tau, image_size, out):
    """Score activation maps against expert masks over the annotated set."""
    import torch
    from PIL import Image

    from . import explain as ex

    started = time.monotonic()
    model, _, _ = tr.load_checkpoint(checkpoint)
    spec = ds.PreprocessSpec(target_size=(image_size, image_size))
    rows = lm.load_annotations(annotations)
    base = Path(annotations).parent
    records, pairs = [], []
    for row in rows:
        image_path = base / row["image_path"]
        mask_path = base / row.get("mask_path", f"{Path(row['image_path']).stem}_mask.png")
        with Image.open(mask_path) as mimg:
            mask = (np.asarray(mimg.convert("L")) > 0).astype(np.uint8)
        gt = lm.GroundTruthMask(mask=mask, image_path=str(image_path),
                                defect_type=row["defect_type"],
                                annotator=row.get("annotator", ""))
        tensor = ds.preprocess(image_path, spec)
        if "class_index" in row:
            class_index = row["class_index"]
        else:
            with torch.no_grad():
                class_index = int(model(tensor.unsqueeze(0)).argmax())
        emap = ex.grad_cam(model, tensor, class_index).normalize()
        if emap.values.shape != mask.shape:  # map upsampled to mask resolution
            t = torch.from_numpy(emap.values)[None, None]
            t = torch.nn.functional.interpolate(t, size=mask.shape,
                                                mode="bilinear", align_corners=False)
            emap = ex.ExplanationMap(emap.method, t[0, 0].numpy(),
                                     emap.class_index, normalized=True)
        pairs.append((emap, gt))
        records.append(lm.recall(emap, gt, mode=mode, tau=tau))
    report = lm.build_report(records, pairs, mode,
                             tau if mode == lm.BINARY else None)
    Path(out).write_text(json.dumps(report, indent=2))
    write_run_json(Path(out).parent if Path(out).parent != Path("") else Path("."),
                   "locmetric eval",
                   {"checkpoint": str(checkpoint), "annotations": str(annotations),
                    "mode": mode, "tau": tau, "image_size": image_size}, started)
    click.echo(f"average_recall={report['average_recall']:.4f} "
               f"pooled_recall={report['pooled_recall']:.4f} over {report['n_images']} images")


# ---------------------------------------------------------------- ddia

@main.group()
def ddia():
    """Expert audit service."""


@ddia.command("create")
@click.option("--store", "store_path", required=True, type=click.Path())
@click.option("--checkpoint", required=True, type=click.Path(exists=True))
@click.option("--images", required=True, type=click.Path(exists=True),
              help="image file or directory of films")
@click.option("--cases", "cases_dir", type=click.Path(), default="cases",
              help="directory for overlay artifacts")
@click.option("--image-size", type=int, default=224)
@click.option("--seed", type=int, default=0)
def ddia_create(store_path, checkpoint, images, cases_dir, image_size, seed):
    """Create pending audit cases for one film or a directory of films."""
    from .ddia.cases import create_case
    from .ddia.store import AuditStore

    started = time.monotonic()
    model, _, config = tr.load_checkpoint(checkpoint)
    store = AuditStore(store_path)
    spec = ds.PreprocessSpec(target_size=(image_size, image_size))
    images = Path(images)
    files = sorted(p for p in images.iterdir()
                   if p.suffix.lower() in ds.IMAGE_EXTENSIONS) \
        if images.is_dir() else [images]
    created = 0
    for f in files:
        create_case(f, model, store, cases_dir, ds.CLASS_NAMES, spec=spec, seed=seed)
        created += 1
    write_run_json(Path(cases_dir), "ddia create",
                   {"store": str(store_path), "checkpoint": str(checkpoint),
                    "images": str(images), "seed": seed,
                    "image_size": image_size}, started)
    click.echo(f"created {created} pending case(s)")


@ddia.command("serve")
@click.option("--store", "store_path", required=True, type=click.Path())
@click.option("--cases", "cases_dir", required=True, type=click.Path(exists=True))
@click.option("--host", default="127.0.0.1")
@click.option("--port", type=int, default=8000)
def ddia_serve(store_path, cases_dir, host, port):
    """Serve the review API plus overlay artifacts."""
    import uvicorn

    from .ddia.api import create_app
    from .ddia.store import AuditStore

    app = create_app(AuditStore(store_path), overlay_root=cases_dir)
    uvicorn.run(app, host=host, port=port)


@ddia.command("report")
@click.option("--store", "store_path", required=True, type=click.Path(exists=True))
@click.option("--out", type=click.Path(), default="report.json")
def ddia_report(store_path, out):
    """Write the aggregate report for all submitted records."""
    from .ddia import aggregate
    from .ddia.store import AuditStore

    store = AuditStore(store_path)
    records = store.all_records()
    if not records:
        raise click.ClickException("store has no records")
    Path(out).write_text(json.dumps(aggregate(records).to_json(), indent=2))
    click.echo(f"wrote {out} ({len(records)} records)")


@ddia.command("export")
@click.option("--store", "store_path", required=True, type=click.Path(exists=True))
@click.option("--out", type=click.Path(), default="records.jsonl")
def ddia_export(store_path, out):
    """Dump the full record history as line-delimited JSON."""
    from .ddia.store import AuditStore

    count = AuditStore(store_path).export_records(out)
    click.echo(f"wrote {out} ({count} records)")


if __name__ == "__main__":
    main()
