import csv
import io
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

import oracles
from terraseg import Config
from terraseg.evaluate import (TRUTH_GROUND, TRUTH_IGNORED, TRUTH_NON_GROUND, ConfusionCounts,
                               Metrics, accumulate_confusion, compute_metrics, density_mask,
                               map_truth_label, metrics_table, predicted_ground, terrain_rmse)

GROUND_IDS = {40, 44, 48, 49, 60, 72}
IGNORE_IDS = {0, 1, 70}


class TestTruthMapping:
    @pytest.mark.parametrize("sid,want", [
        (40, TRUTH_GROUND), (44, TRUTH_GROUND), (72, TRUTH_GROUND), (60, TRUTH_GROUND),
        (10, TRUTH_NON_GROUND), (50, TRUTH_NON_GROUND), (81, TRUTH_NON_GROUND),
        (0, TRUTH_IGNORED), (1, TRUTH_IGNORED), (70, TRUTH_IGNORED),
    ])
    def test_ids(self, sid, want):
        assert map_truth_label(sid) == want

    def test_instance_bits_dropped(self):
        assert map_truth_label(0x00150028) == TRUTH_GROUND

    def test_array(self):
        assert map_truth_label(np.array([40, 10, 0])).tolist() == [1, 0, 2]

    def test_predicted_codes(self, cfg):
        pred = predicted_ground(np.array([40, 1, 48, 10]), cfg)
        assert pred.tolist() == [True, False, True, False]


class TestMetrics:
    def test_worked_example(self):
        m = compute_metrics(ConfusionCounts(tp=9, fp=1, tn=9, fn=1))
        assert m.precision == pytest.approx(0.9) and m.recall == pytest.approx(0.9)
        assert m.f1 == pytest.approx(0.9) and m.accuracy == pytest.approx(0.9)
        assert m.iou == pytest.approx(9 / 11)

    def test_all_correct(self):
        m = compute_metrics(ConfusionCounts(tp=5, tn=5))
        assert (m.precision, m.recall, m.f1, m.accuracy, m.iou) == (1.0, 1.0, 1.0, 1.0, 1.0)

    def test_no_positives_undefined(self):
        m = compute_metrics(ConfusionCounts(tn=7))
        assert m.precision is None and m.recall is None and m.iou is None and m.f1 is None
        assert m.accuracy == 1.0

    def test_empty(self):
        assert compute_metrics(ConfusionCounts()) == Metrics(None, None, None, None, None)

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            ConfusionCounts(tp=-1)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            accumulate_confusion(np.zeros(3, bool), np.zeros(4))

    @given(st.integers(0, 10**6), st.integers(0, 10**6), st.integers(0, 10**6), st.integers(0, 10**6))
    def test_identities(self, tp, fp, tn, fn):
        m = compute_metrics(ConfusionCounts(tp, fp, tn, fn))
        if m.f1 is not None:
            assert abs(m.iou - m.f1 / (2 - m.f1)) <= 1e-12
            assert m.iou <= m.f1 + 1e-15
        for v in (m.precision, m.recall, m.f1, m.accuracy, m.iou):
            assert v is None or 0.0 <= v <= 1.0
        if m.precision and m.recall:
            assert m.f1 == pytest.approx(2 * m.precision * m.recall / (m.precision + m.recall), rel=1e-12)


class TestConfusion:
    ids = np.array(sorted(GROUND_IDS | IGNORE_IDS | {10, 11, 50, 51, 80, 81}), dtype=np.uint32)

    def test_brute_force_tally(self, rng):
        truth = rng.choice(self.ids, 5000) | (rng.integers(0, 8, 5000).astype(np.uint32) << 16)
        pred = rng.random(5000) < 0.5
        got = accumulate_confusion(pred, truth)
        assert (got.tp, got.fp, got.tn, got.fn) == oracles.confusion(pred, truth, GROUND_IDS, IGNORE_IDS)
        assert got.total == int((~np.isin(truth & 0xFFFF, list(IGNORE_IDS))).sum())

    def test_permutation_invariant(self, rng):
        truth = rng.choice(self.ids, 2000)
        pred = rng.random(2000) < 0.3
        perm = rng.permutation(2000)
        assert accumulate_confusion(pred, truth) == accumulate_confusion(pred[perm], truth[perm])

    def test_frames_add(self, rng):
        truth = rng.choice(self.ids, 3000)
        pred = rng.random(3000) < 0.6
        whole = accumulate_confusion(pred, truth)
        parts = accumulate_confusion(pred[:1000], truth[:1000]) + accumulate_confusion(pred[1000:], truth[1000:])
        assert whole == parts

    def test_empty_frame(self):
        assert accumulate_confusion(np.zeros(0, bool), np.zeros(0, np.uint32)) == ConfusionCounts()


class TestTerrain:
    def test_rmse(self):
        est = np.array([[1.0, 2.0], [3.0, 9.0]])
        truth = np.array([[1.0, 1.0], [1.0, 0.0]])
        mask = np.array([[True, True], [True, False]])
        assert terrain_rmse(est, truth, mask) == pytest.approx(math.sqrt(5 / 3), rel=1e-12)

    def test_rmse_random_offsets(self, rng):
        truth = rng.normal(size=100)
        off = rng.normal(0, 0.3, 100)
        want = math.sqrt(sum(o * o for o in off.tolist()) / 100)
        assert terrain_rmse(truth + off, truth, np.ones(100, bool)) == pytest.approx(want, rel=1e-9)

    def test_rmse_empty_mask(self):
        assert terrain_rmse(np.zeros(3), np.ones(3), np.zeros(3, bool)) is None

    def test_density_threshold(self):
        # 27 points per m^2 at 0.33 m cells is 2.9403 points
        hits = np.array([2, 3, 30])
        assert density_mask(hits, 0.33).tolist() == [False, True, True]


class TestTable:
    def test_layout(self):
        rows = {
            "00": compute_metrics(ConfusionCounts(tp=9, fp=1, tn=9, fn=1)),
            "01": compute_metrics(ConfusionCounts(tp=1, fp=0, tn=1, fn=0)),
        }
        parsed = list(csv.reader(io.StringIO(metrics_table(rows))))
        assert parsed[0] == ["seq", "precision", "recall", "f1", "accuracy", "iou"]
        assert [r[0] for r in parsed[1:]] == ["00", "01", "average"]
        assert float(parsed[1][5]) == 9 / 11
        assert float(parsed[3][5]) == pytest.approx((9 / 11 + 1) / 2, rel=1e-15)

    def test_undefined_written_empty(self):
        parsed = list(csv.reader(io.StringIO(metrics_table({"x": compute_metrics(ConfusionCounts(tn=1))}))))
        assert parsed[1][1] == "" and parsed[2][1] == "" and parsed[1][4] == "1.0"
