import numpy as np
import pytest

from conftest import make_ts
from oracles import sr_saliency_direct
from ymir.detectors import (
    DetectorSpec,
    SeriesView,
    fit_detector,
    lower_median,
    mad_scale,
    register_user_detector,
    score_detector,
    unregister_user_detector,
)
from ymir.detectors.spectral import spectral_residual_saliency, spectral_residual_score
from ymir.detectors.statistical import (
    chebyshev_score,
    mediff_score,
    moving_average_score,
    shesd_residual_score,
)
from ymir.errors import (
    ContractError,
    FitError,
    ParameterError,
    RegistryError,
    ShapeError,
    SizeError,
)

ALL_KINDS = ("moving_average", "chebyshev", "mediff", "shesd", "spectral_residual",
             "isolation_forest", "lof", "vae_recon")


def fit_kind(kind, train, **params):
    if kind in ("mediff", "shesd"):
        params.setdefault("p", 8)
    if kind == "vae_recon":
        params.setdefault("w_v", 8)
        params.setdefault("epochs", 3)
    if kind == "spectral_residual":
        params.setdefault("omega", 16)
    if kind == "lof":
        params.setdefault("k_neighbors", 5)
    return fit_detector(DetectorSpec(kind, params), train)


def periodic_train(T=96, n=2, p=8, seed=0):
    rng = np.random.default_rng(seed)
    t = np.arange(T)
    base = np.stack([np.sin(2 * np.pi * t / p), np.cos(2 * np.pi * t / p)], axis=1)
    return make_ts(base + rng.normal(0, 0.05, size=(T, n)))


class TestLowerMedian:
    def test_odd(self):
        assert lower_median(np.array([3.0, 1.0, 2.0])) == 2.0

    def test_even_takes_lower(self):
        assert lower_median(np.array([4.0, 1.0, 3.0, 2.0])) == 2.0

    def test_mad_scale(self):
        # values 1..5: median 3, abs devs [2,1,0,1,2], median dev 1
        assert mad_scale(np.arange(1.0, 6.0)) == pytest.approx(1.4826)


class TestMovingAverage:
    def test_constant_is_zero(self):
        assert np.all(moving_average_score(np.full(50, 3.3), w=10) == 0.0)

    def test_step_scores_max_at_step(self):
        x = np.concatenate([np.zeros(30), np.full(30, 10.0)])
        scores = moving_average_score(x, w=4)
        assert int(np.argmax(scores)) == 30
        # oracle: |10 - 0| / (0 + 1e-8)
        assert scores[30] == pytest.approx(10.0 / 1e-8)

    def test_short_series_uses_prefix(self):
        scores = moving_average_score(np.array([1.0, 2.0, 3.0]), w=10)
        assert scores.shape == (3,) and np.isfinite(scores).all()

    def test_prefix_rule_uses_first_window_stats(self):
        x = np.array([0.0, 8.0, 0.0, 8.0, 0.0, 8.0])
        scores = moving_average_score(x, w=4)
        m, s = x[:4].mean(), x[:4].std()
        assert scores[1] == pytest.approx(abs(8.0 - m) / (s + 1e-8))


class TestChebyshev:
    def test_at_mean_is_zero(self):
        assert chebyshev_score(np.array([5.0]), mu=5.0, sigma=2.0)[0] == 0.0

    def test_z_two_gives_three_quarters(self):
        assert chebyshev_score(np.array([9.0]), mu=5.0, sigma=2.0)[0] == pytest.approx(0.75)

    def test_monotone_and_bounded(self):
        z = np.linspace(0, 50, 400)
        scores = chebyshev_score(z, mu=0.0, sigma=1.0)
        assert np.all(np.diff(scores) >= 0)
        assert scores.max() < 1.0

    def test_zero_sigma_guard(self):
        scores = chebyshev_score(np.array([1.0]), mu=0.0, sigma=0.0)
        assert np.isfinite(scores).all() and scores[0] > 0.99


class TestMediff:
    def test_periodic_steady_state_zero(self):
        p, m = 8, 3
        x = np.tile(np.arange(8.0), 12)
        scores = mediff_score(x, p=p, m=m)
        assert np.all(scores[m * p :] == 0.0)

    def test_corrupted_point_is_argmax(self):
        p, m = 8, 3
        rng = np.random.default_rng(3)
        x = np.tile(np.sin(np.arange(8.0)), 12) + rng.normal(0, 0.01, 96)
        x[70] += 5.0
        scores = mediff_score(x, p=p, m=m)
        assert int(np.argmax(scores)) == 70
        # direct formula oracle at the corrupted point
        lags = np.sort(x[[70 - 8, 70 - 16, 70 - 24]], kind="stable")
        d70 = abs(x[70] - lags[1])
        d_all = []
        for t in range(96):
            if t >= m * p:
                ls = np.sort(x[t - m * p : t : p], kind="stable")
                d_all.append(abs(x[t] - ls[(m - 1) // 2]))
            elif t == 0:
                d_all.append(0.0)
            else:
                win = np.sort(x[max(0, t - p) : t], kind="stable")
                d_all.append(abs(x[t] - win[(len(win) - 1) // 2]))
        d_all = np.array(d_all)
        mad = 1.4826 * lower_median(np.abs(d_all - lower_median(d_all)))
        assert scores[70] == pytest.approx(d70 / (mad + 1e-8))

    def test_all_equal_is_zero(self):
        assert np.all(mediff_score(np.full(40, 7.0), p=4, m=3) == 0.0)

    def test_period_too_small(self):
        with pytest.raises(ParameterError):
            mediff_score(np.arange(40.0), p=1)


class TestShesd:
    def test_seasonal_pattern_scores_zero(self):
        x = np.tile(np.array([1.0, 5.0, 2.0, 7.0]), 10)
        assert np.all(shesd_residual_score(x, p=4) == 0.0)

    def test_spike_magnitude(self):
        rng = np.random.default_rng(5)
        p = 4
        x = np.tile(np.array([1.0, 5.0, 2.0, 7.0]), 20) + rng.normal(0, 0.3, 80)
        # place the point exactly ten raw MADs above its seasonal baseline
        phases = np.arange(80) % p
        pm = np.array([lower_median(x[phases == f]) for f in range(p)])
        g = lower_median(x - pm[phases])
        raw_mad = mad_scale(_shesd_residuals(x, p)) / 1.4826
        x2 = x.copy()
        x2[41] = pm[41 % p] + g + 10.0 * raw_mad
        scores = shesd_residual_score(x2, p=p)
        assert scores[41] == pytest.approx(10.0 / 1.4826, rel=0.10)

    def test_too_short(self):
        with pytest.raises(ParameterError):
            shesd_residual_score(np.arange(7.0), p=4)


def _shesd_residuals(x, p):
    phases = np.arange(len(x)) % p
    pm = np.array([lower_median(x[phases == f]) for f in range(p)])
    de = x - pm[phases]
    return de - lower_median(de)


class TestSpectralResidual:
    def test_constant_scores_zero(self):
        assert np.all(spectral_residual_score(np.full(64, 2.0), omega=16) == 0.0)

    def test_impulse_scores_max_at_impulse(self):
        x = np.zeros(128)
        x[77] = 1.0
        scores = spectral_residual_score(x, omega=16)
        assert int(np.argmax(scores)) == 77

    def test_saliency_matches_direct_dft(self, rng):
        for _ in range(5):
            window = rng.normal(size=16)
            mine = spectral_residual_saliency(window, q=3)
            direct = sr_saliency_direct(window, q=3)
            np.testing.assert_allclose(mine, direct, rtol=1e-9, atol=1e-12)

    def test_output_shape_and_range(self, rng):
        x = rng.normal(size=100)
        scores = spectral_residual_score(x, omega=32)
        assert scores.shape == (100,)
        assert np.isfinite(scores).all() and (scores >= 0).all()

    def test_window_must_be_power_of_two(self):
        with pytest.raises(ParameterError):
            spectral_residual_score(np.zeros(100), omega=48)

    def test_window_exceeds_length(self):
        with pytest.raises(SizeError):
            spectral_residual_score(np.zeros(10), omega=16)


class TestFitScoreDispatch:
    def test_chebyshev_state(self):
        ts = make_ts(np.column_stack([np.arange(10.0), np.ones(10)]))
        det = fit_kind("chebyshev", ts)
        np.testing.assert_allclose(det.mu, [4.5, 1.0])

    def test_lof_too_short(self):
        ts = make_ts(np.arange(4.0)[:, None])
        with pytest.raises(FitError, match="k_neighbors"):
            fit_detector(DetectorSpec("lof", {"k_neighbors": 5}), ts)

    def test_unknown_kind(self):
        with pytest.raises(RegistryError):
            fit_detector(DetectorSpec("nope"), make_ts([[1.0], [2.0]]))

    def test_unknown_param(self):
        with pytest.raises(ParameterError):
            fit_kind("moving_average", periodic_train(), bogus=3)

    @pytest.mark.parametrize("kind", ALL_KINDS)
    def test_determinism_bit_identical(self, kind):
        train = periodic_train(seed=9)
        d1 = fit_kind(kind, train, seed=42)
        d2 = fit_kind(kind, train, seed=42)
        assert np.array_equal(score_detector(d1, train), score_detector(d2, train))

    @pytest.mark.parametrize("kind", ALL_KINDS)
    def test_output_contract_fuzz(self, kind, rng):
        train = periodic_train(seed=1)
        det = fit_kind(kind, train, seed=7)
        for trial in range(3):
            vals = rng.normal(0, 3, size=(64, 2)) + rng.uniform(-5, 5)
            scores = score_detector(det, make_ts(vals))
            assert scores.shape == (64,)
            assert np.isfinite(scores).all() and (scores >= 0).all()

    @pytest.mark.parametrize("kind", ALL_KINDS)
    def test_metric_count_mismatch(self, kind):
        det = fit_kind(kind, periodic_train())
        with pytest.raises(ShapeError):
            score_detector(det, make_ts(np.ones((64, 3))))

    def test_univariate_max_combine(self):
        # metric 0 flat, metric 1 carries a step: combined score equals the
        # max of the per-metric scores
        T = 60
        m0 = np.full(T, 1.0)
        m1 = np.concatenate([np.zeros(30), np.full(30, 9.0)])
        ts = make_ts(np.column_stack([m0, m1]))
        det = fit_kind("moving_average", ts, w=4)
        combined = score_detector(det, ts)
        s0 = moving_average_score(m0, w=4)
        s1 = moving_average_score(m1, w=4)
        np.testing.assert_array_equal(combined, np.maximum(s0, s1))

    @pytest.mark.parametrize("kind", ALL_KINDS)
    def test_state_roundtrip(self, kind):
        from ymir.detectors import detector_from_state

        train = periodic_train(seed=2)
        det = fit_kind(kind, train, seed=11)
        clone = detector_from_state(det.state_dict())
        assert np.array_equal(score_detector(det, train), score_detector(clone, train))


class TestUserDetectors:
    def test_register_and_run(self):
        name = register_user_detector(
            "threshold_gt_100",
            lambda train, params: {"limit": params.get("limit", 100.0)},
            lambda state, ts: np.maximum(ts.values.max(axis=1) - state["limit"], 0.0),
        )
        try:
            ts = make_ts(np.array([[50.0], [150.0], [80.0]]))
            det = fit_detector(DetectorSpec(name), ts)
            np.testing.assert_array_equal(score_detector(det, ts), [0.0, 50.0, 0.0])
        finally:
            unregister_user_detector("threshold_gt_100")

    def test_duplicate_name_rejected(self):
        register_user_detector("dup", lambda t, p: None, lambda s, t: np.zeros(t.length))
        try:
            with pytest.raises(RegistryError):
                register_user_detector("dup", lambda t, p: None, lambda s, t: np.zeros(t.length))
        finally:
            unregister_user_detector("dup")

    def test_negative_scores_rejected(self):
        name = register_user_detector(
            "negative", lambda t, p: None, lambda s, ts: np.full(ts.length, -1.0)
        )
        try:
            ts = make_ts([[1.0], [2.0]])
            det = fit_detector(DetectorSpec(name), ts)
            with pytest.raises(ContractError, match="negative"):
                score_detector(det, ts)
        finally:
            unregister_user_detector("negative")
