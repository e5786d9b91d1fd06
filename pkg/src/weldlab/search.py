"""Configuration search over backbones, freeze policies, optimizers, and
hyperparameters.

Two samplers are provided: a seeded random sampler (uniform over
categoricals, log-uniform over learning rate) and an adaptive density-ratio
sampler. The adaptive sampler splits the history at the top-25% objective
quantile, models good and bad configurations separately (smoothed categorical
counts; a Gaussian kernel mixture over log learning rate), draws candidates
from the good model, and keeps the candidate with the highest good/bad
density ratio. It falls back to random for the first 10 trials.

The study log is line-delimited JSON, flushed after every trial, so an
interrupted study resumes from disk.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import random
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import torch

from .trainer import (Architecture, OptimizerId, TransferMode,
                      apply_transfer_mode, build_model,
                      train_with_early_stopping)

logger = logging.getLogger(__name__)

N_STARTUP_TRIALS = 10   # random warmup before the adaptive model kicks in
N_CANDIDATES = 24       # candidates drawn per adaptive suggestion
GOOD_FRACTION = 0.25    # history split quantile

COMPLETED = "completed"
FAILED = "failed"


class SearchError(Exception):
    pass


@dataclass(frozen=True)
class SearchSpace:
    architectures: tuple[str, ...] = tuple(a.value for a in Architecture)
    modes: tuple[str, ...] = tuple(m.value for m in TransferMode)
    optimizers: tuple[str, ...] = tuple(o.value for o in OptimizerId)
    lr_range: tuple[float, float] = (1e-5, 1e-2)
    batch_sizes: tuple[int, ...] = (16, 32, 64)

    def __post_init__(self):
        lo, hi = self.lr_range
        if not (0 < lo < hi):
            raise SearchError(f"invalid lr_range {self.lr_range}")
        if not (self.architectures and self.modes and self.optimizers and self.batch_sizes):
            raise SearchError("all categorical sets must be nonempty")

    def contains(self, config: "TrialConfig") -> bool:
        lo, hi = self.lr_range
        return (config.arch in self.architectures
                and config.mode in self.modes
                and config.opt in self.optimizers
                and config.batch_size in self.batch_sizes
                and lo <= config.lr <= hi)


@dataclass(frozen=True)
class TrialConfig:
    arch: str
    mode: str
    opt: str
    lr: float
    batch_size: int
    trial_id: int
    seed: int

    def to_json(self) -> dict:
        return {"arch": self.arch, "mode": self.mode, "opt": self.opt,
                "lr": self.lr, "batch_size": self.batch_size,
                "trial_id": self.trial_id, "seed": self.seed}

    @staticmethod
    def from_json(d: dict) -> "TrialConfig":
        return TrialConfig(d["arch"], d["mode"], d["opt"], d["lr"],
                           d["batch_size"], d["trial_id"], d["seed"])

    def categoricals(self) -> tuple:
        return (self.arch, self.mode, self.opt, self.batch_size)


@dataclass(frozen=True)
class TrialResult:
    objective: float
    status: str = COMPLETED
    wall_time: float = 0.0
    report: dict | None = None

    def __post_init__(self):
        if self.status == FAILED and self.objective != 0.0:
            raise SearchError("failed trials carry objective 0.0")
        if not 0.0 <= self.objective <= 1.0:
            raise SearchError(f"objective outside [0,1]: {self.objective}")

    def to_json(self) -> dict:
        return {"objective": self.objective, "status": self.status,
                "wall_time": self.wall_time, "report": self.report}

    @staticmethod
    def from_json(d: dict) -> "TrialResult":
        return TrialResult(d["objective"], d["status"], d["wall_time"], d.get("report"))


@dataclass
class StudyLog:
    sampler_name: str
    study_seed: int
    trials: list[tuple[TrialConfig, TrialResult]] = field(default_factory=list)

    def append(self, config: TrialConfig, result: TrialResult) -> None:
        if self.trials and config.trial_id <= self.trials[-1][0].trial_id:
            raise SearchError("trial_ids must be strictly increasing")
        self.trials.append((config, result))

    def save(self, path: str | Path) -> None:
        with Path(path).open("w") as f:
            f.write(self._header_line())
            for config, result in self.trials:
                f.write(self._trial_line(config, result))

    def append_to_file(self, path: str | Path) -> None:
        """Flush only the latest trial; the file must already hold the rest."""
        path = Path(path)
        if not path.exists() or path.stat().st_size == 0:
            with path.open("w") as f:
                f.write(self._header_line())
        with path.open("a") as f:
            config, result = self.trials[-1]
            f.write(self._trial_line(config, result))

    def _header_line(self) -> str:
        return json.dumps({"sampler_name": self.sampler_name,
                           "study_seed": self.study_seed}) + "\n"

    @staticmethod
    def _trial_line(config: TrialConfig, result: TrialResult) -> str:
        return json.dumps({"config": config.to_json(),
                           "result": result.to_json()}) + "\n"

    @staticmethod
    def load(path: str | Path) -> "StudyLog":
        with Path(path).open() as f:
            lines = [json.loads(line) for line in f if line.strip()]
        if not lines or "sampler_name" not in lines[0]:
            raise SearchError(f"{path}: missing study header")
        log = StudyLog(lines[0]["sampler_name"], lines[0]["study_seed"])
        for row in lines[1:]:
            log.append(TrialConfig.from_json(row["config"]),
                       TrialResult.from_json(row["result"]))
        return log


def derive_seed(study_seed: int, trial_id: int, tag: str = "") -> int:
    digest = hashlib.sha256(f"{study_seed}:{trial_id}:{tag}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


def _random_config(space: SearchSpace, trial_id: int, seed: int) -> TrialConfig:
    rng = random.Random(seed)
    lo, hi = space.lr_range
    return TrialConfig(
        arch=rng.choice(space.architectures),
        mode=rng.choice(space.modes),
        opt=rng.choice(space.optimizers),
        lr=math.exp(rng.uniform(math.log(lo), math.log(hi))),
        batch_size=rng.choice(space.batch_sizes),
        trial_id=trial_id,
        seed=seed,
    )


def _categorical_probs(values: list, choices: tuple, smoothing: float = 1.0) -> np.ndarray:
    counts = np.full(len(choices), smoothing)
    index = {c: i for i, c in enumerate(choices)}
    for v in values:
        counts[index[v]] += 1
    return counts / counts.sum()


class _LogNormalMixture:
    """Parzen estimator over log learning rate, truncated to the search range."""

    def __init__(self, log_lrs: np.ndarray, log_range: tuple[float, float]):
        self.centers = np.asarray(log_lrs, dtype=float)
        self.lo, self.hi = log_range
        span = self.hi - self.lo
        if len(self.centers) > 1:
            scott = self.centers.std(ddof=1) * len(self.centers) ** (-0.2)
        else:
            scott = 0.0
        self.bandwidth = float(np.clip(scott, span / 20.0, span))

    def sample(self, rng: random.Random) -> float:
        center = self.centers[rng.randrange(len(self.centers))]
        for _ in range(100):
            x = rng.gauss(center, self.bandwidth)
            if self.lo <= x <= self.hi:
                return x
        return min(max(center, self.lo), self.hi)

    def log_pdf(self, x: float) -> float:
        z = (x - self.centers) / self.bandwidth
        comps = -0.5 * z * z - math.log(self.bandwidth * math.sqrt(2 * math.pi))
        return float(np.logaddexp.reduce(comps) - math.log(len(self.centers)))


EXPLORE_FRACTION = 0.1  # uniform mixed into the candidate-sampling density


def _adaptive_config(space: SearchSpace, history: StudyLog,
                     trial_id: int, seed: int) -> TrialConfig:
    # Duplicate categorical combos add no information (and lock the good set
    # onto one combo): keep only the best result per combo.
    best_per: dict[tuple, tuple[TrialConfig, TrialResult]] = {}
    for c, r in history.trials:
        key = c.categoricals()
        if key not in best_per or r.objective > best_per[key][1].objective:
            best_per[key] = (c, r)
    trials = list(best_per.values())
    seen = set(best_per)

    objectives = np.array([r.objective for _, r in trials])
    n_good = max(1, math.ceil(GOOD_FRACTION * len(trials)))
    order = np.argsort(-objectives, kind="stable")
    good = [trials[i][0] for i in order[:n_good]]
    bad = [trials[i][0] for i in order[n_good:]] or good

    dims = [("arch", space.architectures), ("mode", space.modes),
            ("opt", space.optimizers), ("batch_size", space.batch_sizes)]
    good_probs = {name: _categorical_probs([getattr(c, name) for c in good], choices)
                  for name, choices in dims}
    bad_probs = {name: _categorical_probs([getattr(c, name) for c in bad], choices)
                 for name, choices in dims}

    log_range = (math.log(space.lr_range[0]), math.log(space.lr_range[1]))
    good_lr = _LogNormalMixture(np.log([c.lr for c in good]), log_range)
    bad_lr = _LogNormalMixture(np.log([c.lr for c in bad]), log_range)

    rng = random.Random(seed)
    candidates: list[tuple[float, TrialConfig]] = []
    for _ in range(N_CANDIDATES):
        values = {}
        score = 0.0
        for name, choices in dims:
            pg = good_probs[name]
            p = (1 - EXPLORE_FRACTION) * pg \
                + EXPLORE_FRACTION * np.full(len(choices), 1 / len(choices))
            i = rng.choices(range(len(choices)), weights=p, k=1)[0]
            values[name] = choices[i]
            score += math.log(pg[i]) - math.log(bad_probs[name][i])
        log_lr = good_lr.sample(rng)
        score += good_lr.log_pdf(log_lr) - bad_lr.log_pdf(log_lr)
        candidates.append((score, TrialConfig(
            arch=values["arch"], mode=values["mode"], opt=values["opt"],
            lr=math.exp(log_lr), batch_size=values["batch_size"],
            trial_id=trial_id, seed=seed)))
    candidates.sort(key=lambda sc: -sc[0])
    # prefer the best-scoring candidate whose combo is not yet evaluated
    for _, config in candidates:
        if config.categoricals() not in seen:
            return config
    return candidates[0][1]


def sample_config(space: SearchSpace, history: StudyLog | None,
                  sampler: str, trial_id: int, seed: int) -> TrialConfig:
    """Draw the next configuration; ``sampler`` is 'random' or 'adaptive'."""
    if sampler not in ("random", "adaptive"):
        raise SearchError(f"unknown sampler: {sampler!r}")
    n_history = len(history.trials) if history else 0
    if sampler == "random" or n_history < N_STARTUP_TRIALS:
        return _random_config(space, trial_id, seed)
    return _adaptive_config(space, history, trial_id, seed)


def run_trial(config: TrialConfig, data, budget: tuple[int, int] = (100, 5),
              pretrained: bool = True, device: str = "cpu") -> TrialResult:
    """Train one configuration end to end; failures become failed results."""
    max_epochs, patience = budget
    train_set, val_set = data
    start = time.monotonic()
    try:
        num_classes = len(getattr(train_set, "class_index", ())) or 4
        torch.manual_seed(config.seed)  # head init must replay on retrain
        model = build_model(config.arch, num_classes, pretrained=pretrained)
        apply_transfer_mode(model, config.mode)
        report = train_with_early_stopping(
            model, train_set, val_set, config.opt, config.lr,
            config.batch_size, max_epochs=max_epochs, patience=patience,
            seed=config.seed, device=device)
        return TrialResult(objective=report.best_val_accuracy,
                           status=COMPLETED,
                           wall_time=time.monotonic() - start,
                           report=report.to_dict())
    except Exception as exc:  # trial isolation: a bad config must not kill the study
        logger.warning("trial %d failed: %s", config.trial_id, exc)
        return TrialResult(objective=0.0, status=FAILED,
                           wall_time=time.monotonic() - start,
                           report={"error": str(exc)})


def run_study(space: SearchSpace, data=None, n_trials: int = 50,
              sampler: str = "random", study_seed: int = 0,
              log_path: str | Path | None = None,
              budget: tuple[int, int] = (100, 5),
              trial_fn=None, pretrained: bool = True,
              device: str = "cpu") -> StudyLog:
    """Run (or resume) a study of ``n_trials`` configurations.

    ``trial_fn(config) -> float | TrialResult`` replaces real training when
    given (mock trainers, synthetic objectives). With a ``log_path`` the log
    is flushed after every trial and an existing file is resumed.
    """
    if n_trials < 1:
        raise SearchError(f"n_trials must be >= 1, got {n_trials}")
    log = None
    if log_path is not None and Path(log_path).exists() and Path(log_path).stat().st_size > 0:
        log = StudyLog.load(log_path)
        if log.sampler_name != sampler or log.study_seed != study_seed:
            raise SearchError("existing log does not match sampler/seed; refusing to resume")
    if log is None:
        log = StudyLog(sampler_name=sampler, study_seed=study_seed)
    while len(log.trials) < n_trials:
        trial_id = len(log.trials)
        seed = derive_seed(study_seed, trial_id)
        config = sample_config(space, log, sampler, trial_id, seed)
        if trial_fn is not None:
            out = trial_fn(config)
            result = out if isinstance(out, TrialResult) else TrialResult(objective=float(out))
        else:
            result = run_trial(config, data, budget=budget,
                               pretrained=pretrained, device=device)
        log.append(config, result)
        if log_path is not None:
            log.append_to_file(log_path)
        logger.info("trial %d: objective=%.4f (%s)", trial_id,
                    result.objective, config.categoricals())
    return log


def best_trial(log: StudyLog) -> tuple[TrialConfig, TrialResult]:
    """Max-objective completed trial; ties broken by lowest trial_id."""
    completed = [(c, r) for c, r in log.trials if r.status == COMPLETED]
    if not completed:
        raise SearchError("no completed trials in study log")
    return max(completed, key=lambda cr: (cr[1].objective, -cr[0].trial_id))


def box_stats(values: list[float]) -> dict:
    """Box-plot statistics: quartiles, 1.5*IQR whiskers, explicit outliers."""
    arr = np.asarray(values, dtype=float)
    q1, med, q3 = np.percentile(arr, [25, 50, 75])
    iqr = q3 - q1
    lo_fence, hi_fence = q1 - 1.5 * iqr, q3 + 1.5 * iqr
    inside = arr[(arr >= lo_fence) & (arr <= hi_fence)]
    return {
        "q1": float(q1), "median": float(med), "q3": float(q3),
        "whisker_low": float(inside.min()), "whisker_high": float(inside.max()),
        "outliers": sorted(float(v) for v in arr[(arr < lo_fence) | (arr > hi_fence)]),
        "n": int(arr.size),
    }


def export_analysis(log: StudyLog) -> dict:
    """Analysis tables: parallel-coordinates rows, per-dimension scatter
    tables, and per-mode objective box-plot statistics."""
    if not log.trials:
        raise SearchError("cannot export analysis of an empty log")
    parallel = [{"batch_size": c.batch_size, "lr": c.lr, "mode": c.mode,
                 "arch": c.arch, "opt": c.opt, "objective": r.objective}
                for c, r in log.trials]
    scatter = {dim: [[getattr(c, dim), r.objective] for c, r in log.trials]
               for dim in ("batch_size", "lr", "mode", "arch", "opt")}
    by_mode: dict[str, list[float]] = {}
    for c, r in log.trials:
        by_mode.setdefault(c.mode, []).append(r.objective)
    mode_boxplot = {mode: box_stats(vals) for mode, vals in sorted(by_mode.items())}
    return {"parallel_coords": parallel, "scatter": scatter,
            "mode_boxplot": mode_boxplot}


def write_analysis(log: StudyLog, out_dir: str | Path) -> list[Path]:
    """Write the analysis tables as CSV/JSON files under ``out_dir``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    tables = export_analysis(log)
    written = []

    pc_path = out_dir / "parallel_coords.csv"
    cols = ["batch_size", "lr", "mode", "arch", "opt", "objective"]
    with pc_path.open("w") as f:
        f.write(",".join(cols) + "\n")
        for row in tables["parallel_coords"]:
            f.write(",".join(str(row[c]) for c in cols) + "\n")
    written.append(pc_path)

    bp_path = out_dir / "mode_boxplot.csv"
    with bp_path.open("w") as f:
        f.write("mode,q1,median,q3,whisker_low,whisker_high,n,outliers\n")
        for mode, st in tables["mode_boxplot"].items():
            outliers = ";".join(str(v) for v in st["outliers"])
            f.write(f"{mode},{st['q1']},{st['median']},{st['q3']},"
                    f"{st['whisker_low']},{st['whisker_high']},{st['n']},{outliers}\n")
    written.append(bp_path)

    sc_path = out_dir / "scatter.json"
    sc_path.write_text(json.dumps(tables["scatter"], indent=2))
    written.append(sc_path)
    return written
