import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from riskdispatch import (
    ForecastModel,
    ScenarioSet,
    estimate_covariance,
    reserve_boosted,
    reserve_min,
    reserve_order_statistic,
    sample,
)
from riskdispatch.forecast import (
    drop_incomplete_rows,
    load_forecast_model,
    load_trace_csv,
    order_statistic_index,
    psd_repair,
    save_forecast_model,
    write_trace_csv,
)
from riskdispatch.experiments import generate_synthetic_trace


def two_pass_covariance(history: np.ndarray) -> np.ndarray:
    """Independent oracle: explicit two-pass unbiased covariance."""
    history = np.asarray(history, dtype=float)
    n_rows, n_cols = history.shape
    mean = history.sum(axis=0) / n_rows
    out = np.zeros((n_cols, n_cols))
    for row in history:
        dev = row - mean
        out += np.outer(dev, dev)
    return out / (n_rows - 1)


class TestEstimateCovariance:
    def test_two_point_hand_value(self):
        cov = estimate_covariance(np.array([[1.0, 0.0], [0.0, 1.0]]))
        assert np.allclose(cov, [[0.5, -0.5], [-0.5, 0.5]])

    def test_identical_rows_zero(self):
        with pytest.warns(UserWarning, match="constant"):
            cov = estimate_covariance(np.tile([3.0, 7.0], (10, 1)))
        assert np.allclose(cov, 0.0)

    def test_against_two_pass_oracle_on_trace(self):
        trace = generate_synthetic_trace(589, 7, seed=3)
        clean, _ = drop_incomplete_rows(trace)
        cov = estimate_covariance(clean)
        oracle = two_pass_covariance(clean)
        scale = np.abs(oracle).max()
        assert np.abs(cov - oracle).max() <= 1e-10 * scale

    def test_too_short_history(self):
        with pytest.raises(ValueError, match="at least 2"):
            estimate_covariance(np.array([[1.0, 2.0]]))


@settings(max_examples=50, deadline=None)
@given(st.integers(min_value=1, max_value=6), st.integers(min_value=0, max_value=2**32 - 1))
def test_psd_repair_idempotent_on_psd(n, seed):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((n, n))
    psd = a @ a.T
    assert np.abs(psd_repair(psd) - psd).max() <= 1e-10 * max(1.0, np.abs(psd).max())


def test_psd_repair_clamps_negative_eigenvalues():
    indefinite = np.array([[1.0, 2.0], [2.0, 1.0]])
    repaired = psd_repair(indefinite)
    assert np.linalg.eigvalsh(repaired).min() >= -1e-12
    assert np.abs(repaired - repaired.T).max() == 0.0


class TestSampling:
    def test_degenerate_covariance_returns_mean(self):
        model = ForecastModel(mean=[4.0, 5.0], covariance=np.zeros((2, 2)))
        drawn = sample(model, 50, seed=9)
        assert np.all(drawn.samples == [4.0, 5.0])

    def test_moments_w1(self):
        model = ForecastModel(mean=[10.0], covariance=[[4.0]])
        drawn = sample(model, 100_000, seed=5)
        assert abs(drawn.samples.mean() - 10.0) <= 0.05
        assert abs(drawn.samples.var(ddof=1) - 4.0) <= 0.15

    def test_determinism(self):
        model = ForecastModel(mean=[1.0, 2.0], covariance=np.eye(2))
        a = sample(model, 64, seed=123)
        b = sample(model, 64, seed=123)
        assert np.array_equal(a.samples, b.samples)
        c = sample(model, 64, seed=124)
        assert np.any(c.samples != a.samples)

    def test_capacity_clipping_flag(self):
        model = ForecastModel(mean=[0.0], covariance=[[100.0]])
        unclipped = sample(model, 200, seed=1)
        assert unclipped.samples.min() < 0.0
        clipped = sample(model, 200, seed=1, clip_capacity=np.array([5.0]))
        assert clipped.samples.min() >= 0.0
        assert clipped.samples.max() <= 5.0

    def test_singular_covariance_sampled_via_eigenfactor(self):
        # Rank-1 covariance: draws must stay on the mean + span(v) line.
        v = np.array([1.0, -2.0])
        model = ForecastModel(mean=[0.0, 0.0], covariance=np.outer(v, v))
        drawn = sample(model, 100, seed=2)
        cross = drawn.samples @ np.array([2.0, 1.0])  # orthogonal direction
        assert np.abs(cross).max() <= 1e-10


class TestReserves:
    def test_min_basic(self):
        scen = ScenarioSet(samples=np.array([[3.0], [1.0], [2.0]]), seed=0)
        assert reserve_min(scen).z_res[0] == 1.0

    def test_min_truncates_negative(self):
        scen = ScenarioSet(samples=np.array([[-0.5], [2.0]]), seed=0)
        res = reserve_min(scen)
        assert res.z_res[0] == 0.0
        assert res.method == "min"

    def test_min_below_all_nonnegative_samples(self, rng):
        scen = ScenarioSet(samples=np.abs(rng.normal(5, 2, size=(40, 3))), seed=0)
        res = reserve_min(scen)
        assert np.all(res.z_res <= scen.samples + 1e-15)

    def test_boosted(self):
        scen = ScenarioSet(samples=np.array([[1.0, 0.0], [2.0, 3.0]]), seed=0)
        res = reserve_boosted(scen, np.array([0.5, 0.5]))
        assert np.allclose(res.z_res, [1.5, 0.5])
        assert res.method == "min-plus-delta"

    def test_boost_zero_equals_min(self, rng):
        scen = ScenarioSet(samples=rng.normal(2, 1, size=(30, 4)), seed=0)
        assert np.array_equal(reserve_boosted(scen, np.zeros(4)).z_res, reserve_min(scen).z_res)

    def test_boost_applies_after_truncation(self):
        scen = ScenarioSet(samples=np.array([[-1.0], [3.0]]), seed=0)
        res = reserve_boosted(scen, np.array([0.2]))
        assert res.z_res[0] == pytest.approx(0.2)

    def test_boost_dimension_mismatch(self):
        scen = ScenarioSet(samples=np.zeros((3, 2)), seed=0)
        with pytest.raises(ValueError, match="length"):
            reserve_boosted(scen, np.array([0.1]))

    def test_order_statistic_index(self):
        assert order_statistic_index(0.05, 100) == 95
        assert order_statistic_index(0.2, 5) == 4

    def test_order_statistic_small_case(self):
        scen = ScenarioSet(samples=np.array([[5.0], [4.0], [3.0], [2.0], [1.0]]), seed=0)
        res = reserve_order_statistic(scen, 0.2)
        assert res.z_res[0] == 2.0
        assert res.method == "order-statistic"
        assert res.alpha == 0.2

    def test_order_statistic_matches_sort_oracle(self, rng):
        for _ in range(25):
            s = int(rng.integers(2, 200))
            w = int(rng.integers(1, 8))
            alpha = float(rng.uniform(0.01, 0.5))
            scen = ScenarioSet(samples=rng.normal(1, 2, size=(s, w)), seed=0)
            res = reserve_order_statistic(scen, alpha)
            k = int(np.ceil((1 - alpha) * s))
            for m in range(w):
                column = sorted(scen.samples[:, m], reverse=True)
                assert res.z_res[m] == max(0.0, column[k - 1])

    def test_order_statistic_at_rank_s_equals_min(self, rng):
        samples = np.abs(rng.normal(3, 1, size=(50, 3)))
        scen = ScenarioSet(samples=samples, seed=0)
        res = reserve_order_statistic(scen, 1e-9)
        assert np.array_equal(res.z_res, reserve_min(scen).z_res)

    def test_order_statistic_coverage_property(self, rng):
        scen = ScenarioSet(samples=rng.normal(0, 1, size=(73, 4)), seed=0)
        alpha = 0.13
        k = order_statistic_index(alpha, 73)
        ordered = np.sort(scen.samples, axis=0)[::-1]
        raw = ordered[k - 1]
        counts = (scen.samples >= raw).sum(axis=0)
        assert np.all(counts >= k)

    def test_alpha_outside_unit_interval_rejected(self):
        scen = ScenarioSet(samples=np.zeros((3, 1)), seed=0)
        for bad in (0.0, 1.0, -0.1, 1.5):
            with pytest.raises(ValueError):
                reserve_order_statistic(scen, bad)


@settings(max_examples=40, deadline=None)
@given(
    st.integers(min_value=2, max_value=60),
    st.integers(min_value=1, max_value=5),
    st.floats(min_value=0.01, max_value=0.45),
    st.floats(min_value=0.01, max_value=0.45),
    st.integers(min_value=0, max_value=2**31 - 1),
)
def test_order_statistic_monotone_in_alpha(s, w, a1, a2, seed):
    lo, hi = min(a1, a2), max(a1, a2)
    scen = ScenarioSet(samples=np.random.default_rng(seed).normal(0, 3, size=(s, w)), seed=0)
    res_lo = reserve_order_statistic(scen, lo)
    res_hi = reserve_order_statistic(scen, hi)
    assert np.all(res_lo.z_res <= res_hi.z_res + 1e-15)


class TestTraceIo:
    def test_roundtrip_with_missing_cells(self, tmp_path):
        trace = np.array([[0.1, 0.2], [np.nan, 0.4], [0.5, 0.6]])
        path = tmp_path / "trace.csv"
        write_trace_csv(path, trace)
        clean, dropped, names = load_trace_csv(path)
        assert dropped == 1
        assert names == ["farm_1", "farm_2"]
        assert np.allclose(clean, [[0.1, 0.2], [0.5, 0.6]])

    def test_header_required(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("")
        with pytest.raises(ValueError, match="header"):
            load_trace_csv(path)


def test_forecast_model_roundtrip(tmp_path):
    model = ForecastModel(
        mean=[1.0, 2.0], covariance=[[2.0, 0.5], [0.5, 1.0]], farm_order=(5, 9)
    )
    path = tmp_path / "model.json"
    save_forecast_model(model, path)
    again = load_forecast_model(path)
    assert np.array_equal(again.mean, model.mean)
    assert np.array_equal(again.covariance, model.covariance)
    assert again.farm_order == (5, 9)


def test_forecast_model_rejects_asymmetric():
    with pytest.raises(ValueError, match="symmetric"):
        ForecastModel(mean=[0.0, 0.0], covariance=[[1.0, 0.5], [0.2, 1.0]])


def test_forecast_model_repairs_near_psd():
    nearly = np.array([[1.0, 1.0], [1.0, 1.0 - 1e-12]])
    model = ForecastModel(mean=[0.0, 0.0], covariance=nearly)
    assert np.linalg.eigvalsh(model.covariance).min() >= -1e-15
