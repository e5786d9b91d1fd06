import json
import math

import numpy as np
import pytest

from weldlab import search as se


SMALL_SPACE = se.SearchSpace(
    architectures=("squeezenet1_0", "resnet18"),
    modes=("freeze_all", "fine_tune_all"),
    optimizers=("sgd", "adam"),
    lr_range=(1e-4, 1e-2),
    batch_sizes=(8, 16),
)

# Synthetic objective with a known optimum, used instead of real training.
SYNTH_BEST = ("densenet121", "fine_tune_all", "adamw", 16)


def synthetic_objective(config: se.TrialConfig) -> float:
    space = se.SearchSpace()
    dims = [
        (config.arch, SYNTH_BEST[0], space.architectures, 0.30),
        (config.mode, SYNTH_BEST[1], space.modes, 0.25),
        (config.opt, SYNTH_BEST[2], space.optimizers, 0.25),
        (config.batch_size, SYNTH_BEST[3], space.batch_sizes, 0.10),
    ]
    score = 0.0
    for value, best, choices, weight in dims:
        if value == best:
            term = 1.0
        elif value in choices:
            term = 0.6 - 0.04 * choices.index(value)
        else:
            term = 0.5
        score += weight * term
    score += 0.10 * math.exp(-((math.log10(config.lr) + 4.0) ** 2) / 2.0)
    return score


def test_space_validation():
    with pytest.raises(se.SearchError):
        se.SearchSpace(lr_range=(1e-2, 1e-5))
    with pytest.raises(se.SearchError):
        se.SearchSpace(architectures=())


def test_random_configs_stay_in_space_and_are_deterministic():
    for trial_id in range(50):
        seed = se.derive_seed(7, trial_id)
        a = se.sample_config(SMALL_SPACE, None, "random", trial_id, seed)
        b = se.sample_config(SMALL_SPACE, None, "random", trial_id, seed)
        assert a == b
        assert SMALL_SPACE.contains(a)


def test_random_configs_hit_all_choices():
    seen_arch, seen_opt = set(), set()
    for trial_id in range(200):
        c = se.sample_config(SMALL_SPACE, None, "random", trial_id,
                             se.derive_seed(0, trial_id))
        seen_arch.add(c.arch)
        seen_opt.add(c.opt)
    assert seen_arch == set(SMALL_SPACE.architectures)
    assert seen_opt == set(SMALL_SPACE.optimizers)


def test_unknown_sampler():
    with pytest.raises(se.SearchError):
        se.sample_config(SMALL_SPACE, None, "grid", 0, 1)


def test_trial_result_invariants():
    with pytest.raises(se.SearchError):
        se.TrialResult(objective=0.5, status=se.FAILED)
    with pytest.raises(se.SearchError):
        se.TrialResult(objective=1.5)


def test_log_roundtrip(tmp_path):
    log = se.run_study(SMALL_SPACE, n_trials=12, sampler="random", study_seed=3,
                       trial_fn=synthetic_objective)
    path = tmp_path / "study.jsonl"
    log.save(path)
    loaded = se.StudyLog.load(path)
    assert loaded.trials == log.trials
    assert loaded.sampler_name == "random"
    assert loaded.study_seed == 3


def test_log_rejects_nonmonotonic_ids():
    log = se.StudyLog("random", 0)
    c = se._random_config(SMALL_SPACE, 5, 1)
    log.append(c, se.TrialResult(0.5))
    with pytest.raises(se.SearchError):
        log.append(c, se.TrialResult(0.6))


def test_log_header_required(tmp_path):
    path = tmp_path / "bad.jsonl"
    path.write_text('{"config": {}, "result": {}}\n')
    with pytest.raises(se.SearchError):
        se.StudyLog.load(path)


def test_incremental_flush_equals_full_save(tmp_path):
    inc = tmp_path / "inc.jsonl"
    log = se.run_study(SMALL_SPACE, n_trials=8, sampler="random", study_seed=1,
                       log_path=inc, trial_fn=synthetic_objective)
    full = tmp_path / "full.jsonl"
    log.save(full)
    assert inc.read_text() == full.read_text()


def test_resume_continues_from_log(tmp_path):
    path = tmp_path / "study.jsonl"
    se.run_study(SMALL_SPACE, n_trials=5, sampler="random", study_seed=9,
                 log_path=path, trial_fn=synthetic_objective)
    resumed = se.run_study(SMALL_SPACE, n_trials=12, sampler="random",
                           study_seed=9, log_path=path,
                           trial_fn=synthetic_objective)
    direct = se.run_study(SMALL_SPACE, n_trials=12, sampler="random",
                          study_seed=9, trial_fn=synthetic_objective)
    assert [c for c, _ in resumed.trials] == [c for c, _ in direct.trials]
    assert [c.trial_id for c, _ in resumed.trials] == list(range(12))


def test_resume_mismatched_seed_refused(tmp_path):
    path = tmp_path / "study.jsonl"
    se.run_study(SMALL_SPACE, n_trials=3, sampler="random", study_seed=9,
                 log_path=path, trial_fn=synthetic_objective)
    with pytest.raises(se.SearchError):
        se.run_study(SMALL_SPACE, n_trials=6, sampler="random", study_seed=10,
                     log_path=path, trial_fn=synthetic_objective)


def test_failed_trials_excluded_from_best():
    log = se.StudyLog("random", 0)
    configs = [se._random_config(SMALL_SPACE, i, i) for i in range(3)]
    log.append(configs[0], se.TrialResult(0.4))
    log.append(configs[1], se.TrialResult(0.0, status=se.FAILED))
    log.append(configs[2], se.TrialResult(0.4))
    config, result = se.best_trial(log)
    assert config.trial_id == 0  # tie broken by lowest trial_id
    assert result.objective == 0.4


def test_best_trial_all_failed():
    log = se.StudyLog("random", 0)
    log.append(se._random_config(SMALL_SPACE, 0, 0),
               se.TrialResult(0.0, status=se.FAILED))
    with pytest.raises(se.SearchError):
        se.best_trial(log)


def test_failing_trial_fn_does_not_kill_study():
    def flaky(config):
        if config.trial_id % 3 == 0:
            raise RuntimeError("boom")
        return synthetic_objective(config)

    def wrapped(config):
        try:
            return flaky(config)
        except Exception:
            return se.TrialResult(0.0, status=se.FAILED)

    log = se.run_study(SMALL_SPACE, n_trials=9, sampler="random", study_seed=2,
                       trial_fn=wrapped)
    statuses = [r.status for _, r in log.trials]
    assert statuses.count(se.FAILED) == 3
    assert len(log.trials) == 9


def test_adaptive_configs_stay_in_space():
    log = se.run_study(SMALL_SPACE, n_trials=30, sampler="adaptive",
                       study_seed=4, trial_fn=synthetic_objective)
    assert all(SMALL_SPACE.contains(c) for c, _ in log.trials)


def test_adaptive_is_deterministic():
    a = se.run_study(se.SearchSpace(), n_trials=25, sampler="adaptive",
                     study_seed=6, trial_fn=synthetic_objective)
    b = se.run_study(se.SearchSpace(), n_trials=25, sampler="adaptive",
                     study_seed=6, trial_fn=synthetic_objective)
    assert a.trials == b.trials


def test_adaptive_beats_random_on_synthetic_objective():
    deltas = []
    for seed in range(5):
        ad = se.run_study(se.SearchSpace(), n_trials=40, sampler="adaptive",
                          study_seed=seed, trial_fn=synthetic_objective)
        rn = se.run_study(se.SearchSpace(), n_trials=40, sampler="random",
                          study_seed=seed, trial_fn=synthetic_objective)
        deltas.append(se.best_trial(ad)[1].objective
                      - se.best_trial(rn)[1].objective)
    assert np.mean(deltas) >= 0.0


def test_random_best_so_far_monotone():
    log = se.run_study(se.SearchSpace(), n_trials=40, sampler="random",
                       study_seed=0, trial_fn=synthetic_objective)
    best = -1.0
    for _, r in log.trials:
        best = max(best, r.objective)
        assert max(x.objective for _, x in log.trials[:log.trials.index((_, r)) + 1]) == best


def test_box_stats_oracle():
    values = [1, 2, 3, 4, 5, 6, 7, 8, 9, 100]
    st = se.box_stats(values)
    q1, med, q3 = np.percentile(values, [25, 50, 75])
    assert st["q1"] == q1 and st["median"] == med and st["q3"] == q3
    iqr = q3 - q1
    inside = [v for v in values if q1 - 1.5 * iqr <= v <= q3 + 1.5 * iqr]
    assert st["whisker_low"] == min(inside)
    assert st["whisker_high"] == max(inside)
    assert st["outliers"] == [100.0]


def test_box_stats_constant_values():
    st = se.box_stats([0.5] * 8)
    assert st["q1"] == st["median"] == st["q3"] == 0.5
    assert st["outliers"] == []


def test_export_analysis_tables(tmp_path):
    log = se.run_study(SMALL_SPACE, n_trials=15, sampler="random", study_seed=5,
                       trial_fn=synthetic_objective)
    tables = se.export_analysis(log)
    assert len(tables["parallel_coords"]) == 15
    assert set(tables["scatter"]) == {"batch_size", "lr", "mode", "arch", "opt"}
    assert all(len(pts) == 15 for pts in tables["scatter"].values())
    modes_seen = {c.mode for c, _ in log.trials}
    assert set(tables["mode_boxplot"]) == modes_seen

    files = se.write_analysis(log, tmp_path / "analysis")
    names = {p.name for p in files}
    assert names == {"parallel_coords.csv", "mode_boxplot.csv", "scatter.json"}
    rows = (tmp_path / "analysis" / "parallel_coords.csv").read_text().strip().splitlines()
    assert len(rows) == 16  # header + trials
    scatter = json.loads((tmp_path / "analysis" / "scatter.json").read_text())
    assert scatter["lr"][0][1] == log.trials[0][1].objective


def test_derive_seed_distinct():
    seeds = {se.derive_seed(0, t, tag) for t in range(20) for tag in ("", "aug")}
    assert len(seeds) == 40
