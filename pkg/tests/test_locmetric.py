import numpy as np
import pytest

from weldlab import locmetric as lm
from weldlab.explain import ExplanationMap


def _emap(values, normalized=True):
    return ExplanationMap("grad_cam", np.asarray(values, dtype=float), 0,
                          normalized=normalized)


def _gt(mask, defect_type="crack", path="img.png"):
    return lm.GroundTruthMask(np.asarray(mask, dtype=np.uint8), path, defect_type)


def test_mask_validation():
    with pytest.raises(lm.LocMetricError):
        _gt([[0, 2], [0, 0]])
    with pytest.raises(lm.LocMetricError):
        _gt([[0, 0], [0, 0]])
    with pytest.raises(lm.LocMetricError):
        _gt([[1, 0], [0, 0]], defect_type="no_defect")


def test_binarize_threshold_edge():
    emap = _emap([[0.0, 0.5], [0.49, 1.0]])
    out = lm.binarize_heatmap(emap, 0.5)
    assert out.tolist() == [[0, 1], [0, 1]]  # >= tau counts as covered
    with pytest.raises(lm.LocMetricError):
        lm.binarize_heatmap(emap, 1.5)
    with pytest.raises(lm.LocMetricError):
        lm.binarize_heatmap(_emap([[0.0, 2.0]], normalized=False), 0.5)


def test_recall_hand_computed():
    # mask covers 4 pixels; thresholded map covers 3 of them -> 0.75
    values = [[1.0, 1.0, 0.0],
              [1.0, 0.0, 0.0],
              [0.0, 0.0, 1.0]]
    mask = [[1, 1, 0],
            [1, 1, 0],
            [0, 0, 0]]
    rec = lm.recall(_emap(values), _gt(mask), mode=lm.BINARY, tau=0.5)
    assert rec.recall == pytest.approx(0.75)
    assert rec.threshold == 0.5


def test_recall_soft_hand_computed():
    values = [[0.2, 0.8], [0.0, 1.0]]
    mask = [[1, 1], [0, 1]]
    rec = lm.recall(_emap(values), _gt(mask), mode=lm.SOFT)
    assert rec.recall == pytest.approx((0.2 + 0.8 + 1.0) / 3)
    assert rec.threshold is None


def test_recall_shape_mismatch():
    with pytest.raises(lm.LocMetricError):
        lm.recall(_emap(np.ones((4, 4))), _gt(np.ones((8, 8))))


def test_recall_bounds_property():
    rng = np.random.default_rng(0)
    for _ in range(50):
        values = rng.random((8, 8))
        mask = (rng.random((8, 8)) > 0.5).astype(np.uint8)
        if mask.sum() == 0:
            mask[0, 0] = 1
        for mode, tau in ((lm.BINARY, 0.3), (lm.SOFT, 0.5)):
            rec = lm.recall(_emap(values), _gt(mask), mode=mode, tau=tau)
            assert 0.0 <= rec.recall <= 1.0


def test_recall_matches_pixel_loop_oracle():
    rng = np.random.default_rng(1)
    for _ in range(20):
        values = rng.random((8, 8))
        mask = (rng.random((8, 8)) > 0.6).astype(np.uint8)
        if mask.sum() == 0:
            mask[3, 3] = 1
        rec = lm.recall(_emap(values), _gt(mask), mode=lm.BINARY, tau=0.5)
        hit = total = 0
        for i in range(8):
            for j in range(8):
                if mask[i, j] == 1:
                    total += 1
                    if values[i, j] >= 0.5:
                        hit += 1
        assert rec.recall == pytest.approx(hit / total, abs=1e-12)


def test_average_recall_arithmetic_mean():
    records = [lm.RecallRecord(f"i{k}.png", r, lm.SOFT)
               for k, r in enumerate([0.5, 0.75, 1.0])]
    assert lm.average_recall(records) == pytest.approx(0.75)


def test_average_recall_rejects_mixed_modes():
    records = [lm.RecallRecord("a.png", 0.5, lm.SOFT),
               lm.RecallRecord("b.png", 0.5, lm.BINARY, threshold=0.5)]
    with pytest.raises(lm.LocMetricError):
        lm.average_recall(records)
    with pytest.raises(lm.LocMetricError):
        lm.average_recall([])


def test_pooled_vs_average_weighting():
    # big image fully covered, small image uncovered: pooled is dominated by
    # the big mask, average weights both images equally
    big = (_emap(np.ones((10, 10))), _gt(np.ones((10, 10)), path="big.png"))
    small = (_emap(np.zeros((2, 2))), _gt([[1, 0], [0, 0]], path="small.png"))
    pooled = lm.pooled_recall([big, small], mode=lm.BINARY, tau=0.5)
    assert pooled == pytest.approx(100 / 101)
    records = [lm.recall(e, g, mode=lm.BINARY, tau=0.5) for e, g in (big, small)]
    assert lm.average_recall(records) == pytest.approx(0.5)


def test_record_invariants():
    with pytest.raises(lm.LocMetricError):
        lm.RecallRecord("a.png", 0.5, lm.BINARY)  # no threshold
    with pytest.raises(lm.LocMetricError):
        lm.RecallRecord("a.png", 1.1, lm.SOFT)


def test_build_report_breakdown():
    pairs = []
    rng = np.random.default_rng(4)
    for k, dt in enumerate(["crack", "crack", "porosity", "lack_of_penetration"]):
        values = rng.random((6, 6))
        mask = np.zeros((6, 6), dtype=np.uint8)
        mask[k, :3] = 1
        pairs.append((_emap(values), _gt(mask, defect_type=dt, path=f"{k}.png")))
    records = [lm.recall(e, g, mode=lm.BINARY, tau=0.5) for e, g in pairs]
    report = lm.build_report(records, pairs, mode=lm.BINARY, tau=0.5)
    assert report["n_images"] == 4
    assert set(report["per_defect_type"]) == {"crack", "porosity", "lack_of_penetration"}
    assert report["per_defect_type"]["crack"]["n"] == 2
    crack_recalls = [r.recall for r, (_, g) in zip(records, pairs)
                     if g.defect_type == "crack"]
    assert report["per_defect_type"]["crack"]["average_recall"] == \
        pytest.approx(np.mean(crack_recalls))
    assert report["average_recall"] == pytest.approx(lm.average_recall(records))


def test_load_annotations(tmp_path):
    path = tmp_path / "ann.jsonl"
    path.write_text(
        '{"image_path": "a.png", "mask_path": "a_mask.png", "defect_type": "crack"}\n'
        '\n'
        '{"image_path": "b.png", "mask_path": "b_mask.png", "defect_type": "porosity"}\n')
    rows = lm.load_annotations(path)
    assert len(rows) == 2 and rows[1]["defect_type"] == "porosity"
    empty = tmp_path / "empty.jsonl"
    empty.write_text("")
    with pytest.raises(lm.LocMetricError):
        lm.load_annotations(empty)
