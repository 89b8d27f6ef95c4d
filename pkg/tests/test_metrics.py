import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from advsurv.metrics import (
    PredictionSet,
    concordance_index,
    coverage_intervals,
    evaluate_predictions,
    normalized_relative_error,
    relative_absolute_error,
)
from helpers import ci_brute_force


def make_pred(t, l, point, t_max=None, spread=0.0, n_samples=25):
    """PredictionSet whose per-record sample median equals `point`."""
    t = np.asarray(t, dtype=float)
    point = np.asarray(point, dtype=float)
    offsets = np.linspace(-spread, spread, n_samples)
    samples = point[:, None] + offsets[None, :]
    samples = np.maximum(samples, 1e-9)
    return PredictionSet(t, np.asarray(l), samples, t_max or float(t.max()))


class TestConcordance:
    def test_perfect_ordering_scores_one(self):
        t = np.array([1.0, 2.0, 3.0, 4.0])
        l = np.ones(4, dtype=int)
        assert concordance_index(t, l, -t, higher_risk="larger_score") == 1.0
        assert concordance_index(t, l, t, higher_risk="smaller_time") == 1.0

    def test_constant_predictions_score_half(self):
        t = np.array([1.0, 2.0, 3.0, 4.0])
        l = np.ones(4, dtype=int)
        assert concordance_index(t, l, np.zeros(4)) == 0.5

    def test_matches_brute_force_on_mixed_instance(self):
        rng = np.random.default_rng(0)
        t = rng.uniform(0.5, 5.0, 12)
        l = rng.integers(0, 2, 12)
        l[0] = 1
        risk = rng.standard_normal(12)
        assert concordance_index(t, l, risk) == ci_brute_force(t, l, risk)

    def test_matches_brute_force_with_ties_everywhere(self):
        rng = np.random.default_rng(1)
        for _ in range(50):
            n = rng.integers(3, 15)
            t = rng.integers(1, 5, n).astype(float)  # many time ties
            l = rng.integers(0, 2, n)
            if not ((l == 1) & (t < t.max())).any():
                continue
            risk = rng.integers(-2, 3, n).astype(float)  # many score ties
            assert concordance_index(t, l, risk) == ci_brute_force(t, l, risk)

    def test_no_comparable_pairs_raises(self):
        with pytest.raises(ValueError, match="comparable"):
            concordance_index(np.array([1.0, 2.0]), np.array([0, 0]), np.array([1.0, 2.0]))

    def test_unknown_orientation_rejected(self):
        with pytest.raises(ValueError, match="orientation"):
            concordance_index(np.array([1.0, 2.0]), np.array([1, 1]), np.array([1.0, 2.0]),
                              higher_risk="bogus")

    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=40, deadline=None)
    def test_invariant_under_strictly_increasing_transform(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(4, 12))
        t = rng.uniform(0.5, 8.0, n)
        l = rng.integers(0, 2, n)
        if not ((l == 1) & (t < t.max())).any():
            return
        pred_times = rng.uniform(0.5, 8.0, n)
        base = concordance_index(t, l, pred_times, higher_risk="smaller_time")
        transformed = concordance_index(
            t, l, np.exp(pred_times) + pred_times**3, higher_risk="smaller_time"
        )
        assert base == transformed

    def test_antisymmetry_on_tie_free_instance(self):
        rng = np.random.default_rng(3)
        t = np.sort(rng.uniform(0.5, 5.0, 10)) + np.arange(10) * 1e-3
        l = np.ones(10, dtype=int)
        risk = rng.permutation(10).astype(float)
        forward = concordance_index(t, l, risk)
        backward = concordance_index(t, l, -risk)
        assert forward + backward == pytest.approx(1.0)


class TestErrors:
    def test_censored_rae_zero_when_prediction_beyond(self):
        pred = make_pred([5.0, 5.0], [0, 0], [7.0, 5.0], t_max=10.0)
        np.testing.assert_array_equal(relative_absolute_error(pred), [0.0, 0.0])

    def test_noncensored_rae_example(self):
        pred = make_pred([100.0], [1], [150.0], t_max=500.0)
        assert relative_absolute_error(pred)[0] == pytest.approx(0.10)

    def test_nre_examples(self):
        pred = make_pred([10.0, 10.0, 10.0], [1, 0, 1], [10.0, 12.0, 4.0], t_max=100.0)
        nre = normalized_relative_error(pred)
        assert nre[0] == 0.0
        assert nre[1] == 0.0  # censored and overestimated: no error
        assert nre[2] == pytest.approx(-0.06)

    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=30, deadline=None)
    def test_rae_equals_abs_nre_for_events(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(2, 20))
        pred = make_pred(
            rng.uniform(0.5, 9.0, n), np.ones(n, dtype=int), rng.uniform(0.5, 9.0, n), t_max=10.0
        )
        np.testing.assert_allclose(
            relative_absolute_error(pred), np.abs(normalized_relative_error(pred))
        )


class TestCoverage:
    def test_constant_samples_have_zero_width(self):
        samples = np.full((3, 30), 2.5)
        pred = PredictionSet(np.array([1.0, 2.0, 3.0]), np.array([1, 1, 0]), samples, 3.0)
        cov = coverage_intervals(pred)
        np.testing.assert_array_equal(cov["widths"], 0.0)

    def test_uniform_grid_width_matches_quantile_oracle(self):
        samples = np.arange(1.0, 201.0)[None, :]
        pred = PredictionSet(np.array([100.0]), np.array([1]), samples, 200.0)
        cov = coverage_intervals(pred, level=0.95)
        # linear-interpolation quantiles of 1..200: width = 0.95 * 199
        assert cov["widths"][0] == pytest.approx(0.95 * 199)

    def test_truth_outside_central_interval_is_uncovered(self):
        samples = np.concatenate([[0.01], np.linspace(10, 20, 98), [100.0]])[None, :]
        pred = PredictionSet(np.array([99.0]), np.array([1]), samples, 100.0)
        cov = coverage_intervals(pred)
        assert samples.min() < 99.0 < samples.max()
        assert cov["coverage_fraction"] == 0.0

    def test_insufficient_samples_rejected(self):
        pred = PredictionSet(np.array([1.0]), np.array([1]), np.ones((1, 5)), 1.0)
        with pytest.raises(ValueError, match="20 samples"):
            coverage_intervals(pred)


class TestPredictionSetAndReport:
    def test_point_is_median_with_midpoint_convention(self):
        samples = np.array([[1.0, 2.0, 3.0, 4.0]])
        pred = PredictionSet(np.array([2.0]), np.array([1]), samples, 4.0)
        assert pred.point[0] == 2.5
        odd = PredictionSet(np.array([2.0]), np.array([1]), np.array([[1.0, 2.0, 3.0]]), 4.0)
        assert odd.point[0] == 2.0

    def test_report_fields_and_serialization(self):
        rng = np.random.default_rng(4)
        n = 40
        t = rng.uniform(1, 10, n)
        l = rng.integers(0, 2, n)
        l[:4] = 1
        samples = rng.uniform(1, 10, (n, 50))
        report = evaluate_predictions(PredictionSet(t, l, samples, 10.0))
        data = report.to_dict()
        for key in (
            "ci",
            "rae_noncensored_median",
            "rae_noncensored_q25",
            "rae_noncensored_q75",
            "rae_censored_median",
            "nre_values",
            "interval_width_median_noncensored",
            "interval_width_median_censored",
            "coverage_fraction",
        ):
            assert key in data
        assert 0.0 <= data["ci"] <= 1.0
        assert len(data["nre_values"]) == n
        assert report.to_json() == report.to_json()  # deterministic serialization

    def test_degenerate_constant_model_scores_half(self):
        rng = np.random.default_rng(5)
        t = rng.uniform(1, 10, 30)
        l = np.ones(30, dtype=int)
        samples = np.full((30, 25), 5.0)
        report = evaluate_predictions(PredictionSet(t, l, samples, 10.0))
        assert report.ci == 0.5
