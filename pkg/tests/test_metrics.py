"""Evaluation metrics.

Threshold-accuracy cases are hand-derived:
* ratio 1.2 < 1.25 so delta1 = 100;
* ratio 1.3: 1.3 >= 1.25 but 1.3 < 1.5625 = 1.25^2, so delta1 = 0, delta2 = 100.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import pytest

from depthforge import ErrorCdf, cdf, error_cdf, evaluate
from depthforge.errors import InputError, NoOverlapError
from depthforge.metrics import comparison_table, format_comparison

from conftest import make_depth

REFERENCE_FILE = Path(__file__).resolve().parent.parent / "data" / "reference_nyu200.json"


class TestEvaluate:
    def test_perfect_prediction(self):
        m = make_depth(np.full((6, 6), 2.0))
        report = evaluate(m, m)
        assert report.rmse == 0 and report.mae == 0 and report.rel == 0
        assert report.delta1 == report.delta2 == report.delta3 == 100.0
        assert report.pixel_count == 36

    def test_twenty_percent_scale_error(self):
        truth = make_depth(np.full((4, 4), 2.0))
        pred = make_depth(np.full((4, 4), 2.4))
        report = evaluate(truth, pred)
        assert report.rel == pytest.approx(0.2, abs=1e-12)
        assert report.delta1 == 100.0  # 1.2 < 1.25

    def test_ratio_one_point_three_thresholds(self):
        truth = make_depth(np.array([[2.0]]))
        pred = make_depth(np.array([[2.6]]))
        report = evaluate(truth, pred)
        assert report.delta1 == 0.0
        assert report.delta2 == 100.0
        assert report.delta3 == 100.0

    def test_boundary_ratio_is_strict(self):
        truth = make_depth(np.array([[1.0]]))
        pred = make_depth(np.array([[1.25]]))  # ratio exactly 1.25: excluded
        assert evaluate(truth, pred).delta1 == 0.0

    def test_rmse_at_least_mae_on_random_maps(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            truth = make_depth(rng.uniform(0.5, 5.0, (8, 8)))
            pred = make_depth(rng.uniform(0.5, 5.0, (8, 8)))
            report = evaluate(truth, pred)
            assert report.rmse >= report.mae - 1e-12
            assert report.delta1 <= report.delta2 <= report.delta3

    def test_rmse_equals_mae_for_constant_error(self):
        truth = make_depth(np.full((5, 5), 2.0))
        pred = make_depth(np.full((5, 5), 2.3))
        report = evaluate(truth, pred)
        assert report.rmse == pytest.approx(report.mae, rel=1e-12)

    def test_delta_symmetric_under_swap(self):
        rng = np.random.default_rng(1)
        truth = make_depth(rng.uniform(0.5, 5.0, (8, 8)))
        pred = make_depth(rng.uniform(0.5, 5.0, (8, 8)))
        a = evaluate(truth, pred)
        b = evaluate(pred, truth)
        assert a.delta1 == b.delta1 and a.delta2 == b.delta2 and a.delta3 == b.delta3

    def test_hand_computed_rmse_mae_rel(self):
        truth = make_depth(np.array([[1.0, 2.0]]))
        pred = make_depth(np.array([[1.5, 1.0]]))
        report = evaluate(truth, pred)
        # errors: 0.5, -1.0
        assert report.mae == pytest.approx(0.75)
        assert report.rmse == pytest.approx(np.sqrt((0.25 + 1.0) / 2))
        assert report.rel == pytest.approx((0.5 / 1.0 + 1.0 / 2.0) / 2)

    def test_no_overlap(self):
        a = make_depth(np.ones((2, 2)), np.zeros((2, 2), bool))
        with pytest.raises(NoOverlapError):
            evaluate(a, make_depth(np.ones((2, 2))))


class TestCdf:
    def _maps(self):
        truth = make_depth(np.full((2, 2), 1.0))
        pred = make_depth(np.array([[1.1, 1.2], [1.3, 1.4]]))
        return truth, pred

    def test_counting_case(self):
        truth, pred = self._maps()
        # |errors| = 0.1, 0.2, 0.3, 0.4; threshold 0.25 covers half
        assert cdf(truth, pred, [0.25])[0] == pytest.approx(0.5)

    def test_zero_threshold(self):
        truth, pred = self._maps()
        assert cdf(truth, pred, [0.0])[0] == 0.0
        same = cdf(truth, truth, [0.0])
        assert same[0] == 1.0  # exactly-zero errors count

    def test_max_error_threshold_reaches_one(self):
        truth, pred = self._maps()
        assert cdf(truth, pred, [0.4])[0] == 1.0

    def test_sorted_errors_reproduce_k_over_n(self):
        rng = np.random.default_rng(2)
        truth = make_depth(rng.uniform(1, 4, (10, 10)))
        pred = make_depth(rng.uniform(1, 4, (10, 10)))
        c = error_cdf(truth, pred)
        fractions = c.at(c.errors)
        np.testing.assert_allclose(fractions, np.arange(1, 101) / 100)

    def test_monotone_in_threshold(self):
        truth, pred = self._maps()
        values = cdf(truth, pred, np.linspace(0, 0.5, 20))
        assert np.all(np.diff(values) >= 0)
        assert np.all((values >= 0) & (values <= 1))


class TestReferenceComparison:
    def test_reference_file_ingestion(self):
        reference = json.loads(REFERENCE_FILE.read_text())
        assert reference["smd"] == {"mae": 0.107, "rmse": 0.211, "rel": 0.039}
        ours = evaluate(
            make_depth(np.full((4, 4), 2.0)), make_depth(np.full((4, 4), 2.1))
        )
        rows = comparison_table(ours, reference)
        assert [r["name"] for r in rows] == sorted(reference)
        smd_row = next(r for r in rows if r["name"] == "smd")
        assert smd_row["mae_ref"] == 0.107
        assert smd_row["mae_ours"] == pytest.approx(0.1, abs=1e-12)
        assert smd_row["mae_delta"] == pytest.approx(0.1 - 0.107, abs=1e-12)
        text = format_comparison(rows)
        assert "smd" in text and "mae" in text

    def test_malformed_reference_rejected(self):
        ours = evaluate(make_depth(np.ones((2, 2))), make_depth(np.ones((2, 2))))
        with pytest.raises(InputError):
            comparison_table(ours, {"bad": 3.0})


class TestErrorCdfType:
    def test_requires_values(self):
        with pytest.raises(InputError):
            ErrorCdf(np.empty(0))
