import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pericausal.core import InsufficientHistoryError, ModelConfig, SingularFitError, TimeSeriesEnsemble
from pericausal.estimation import (
    DegreesOfFreedomError,
    compute_lagged_moments,
    compute_reference_stats,
    fit_svar_ensemble,
    schur_complement,
)
from pericausal.simulation import SvarSpec, simulate_svar


def gaussian_lag_ensemble(cov, R, seed, p):
    """Epochs of length p+1 whose lag vector at t=p is N(0, cov), newest first."""
    z = np.random.default_rng(seed).multivariate_normal(np.zeros(2 * p), cov, size=R)
    data = np.zeros((R, 2, p + 1))
    for ch in range(2):
        data[:, ch, :p] = z[:, ch * p:(ch + 1) * p][:, ::-1]
    return TimeSeriesEnsemble(data)


class TestFit:
    def test_noise_free_recovery(self):
        rng = np.random.default_rng(0)
        R, T = 6, 5
        data = np.zeros((R, 2, T))
        data[:, :, 0] = rng.standard_normal((R, 2))
        data[:, 1, 1:] = rng.standard_normal((R, T - 1))
        for t in range(1, T):
            data[:, 0, t] = 0.5 * data[:, 0, t - 1] + 0.25 * data[:, 1, t - 1]
        m = fit_svar_ensemble(data, ModelConfig(1))
        np.testing.assert_allclose(m.a[:, 0], 0.5, atol=1e-12)
        np.testing.assert_allclose(m.b[:, 0], 0.25, atol=1e-12)
        np.testing.assert_allclose(m.intercept[:, 0], 0.0, atol=1e-12)
        assert np.all(m.sigma2[:, 0] < 1e-25)

    def test_recovers_spec_within_ols_bounds(self):
        a, b, c, d = [0.5, -0.2], [0.3, 0.1], [0.0, 0.0], [0.4, -0.1]
        spec = SvarSpec.constant(a, b, c, d, noise_mean=(0.5, -1.0), noise_var=(1.0, 2.0),
                                 n_times=12)
        data = simulate_svar(spec, 10_000, seed=21)
        m = fit_svar_ensemble(data, ModelConfig(2))
        truth = np.array([[0.5] + a + b, [-1.0] + c + d])
        z = (m.coef - truth) / m.coef_se
        # single analysis time: every coefficient within 3 SE
        assert np.all(np.abs(z[5]) < 3)
        # all times: z-scores behave like standard normals
        assert np.mean(np.abs(z) > 3) < 0.01
        assert 0.8 < np.mean(z ** 2) < 1.2
        np.testing.assert_allclose(m.sigma2.mean(axis=0), [1.0, 2.0], rtol=0.03)

    def test_nesting_every_time(self):
        data = simulate_svar(SvarSpec.constant([0.3], [0.2], [0.1], [0.5], n_times=50), 40, 3)
        m = fit_svar_ensemble(data, ModelConfig(1))
        assert np.all(m.sigma2 <= m.sigma2_reduced)
        assert np.all(m.sigma2 >= 0)

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 10 ** 6), st.integers(1, 3), st.integers(0, 12))
    def test_nesting_random_data(self, seed, p, extra):
        R = 2 * p + 2 + extra
        data = np.random.default_rng(seed).standard_normal((R, 2, p + 6))
        m = fit_svar_ensemble(data, ModelConfig(p))
        assert np.all(m.sigma2 <= m.sigma2_reduced)

    def test_too_few_trials(self):
        with pytest.raises(DegreesOfFreedomError):
            fit_svar_ensemble(np.random.default_rng(0).standard_normal((5, 2, 10)), ModelConfig(2))

    def test_singular_design_names_time(self):
        data = np.random.default_rng(0).standard_normal((10, 2, 8))
        data[:, 1, 3] = 0.0  # lag of channel 1 is constant at t=4
        with pytest.raises(SingularFitError, match="t=4") as info:
            fit_svar_ensemble(data, ModelConfig(1))
        assert info.value.time_index == 4

    def test_ridge_stabilizes_singular_design(self):
        data = np.random.default_rng(0).standard_normal((10, 2, 8))
        data[:, 1, 3] = 0.0
        m = fit_svar_ensemble(data, ModelConfig(1, ridge_epsilon=1e-3))
        assert np.all(np.isfinite(m.coef))

    def test_offset_shorter_than_order(self):
        ens = TimeSeriesEnsemble(np.zeros((10, 2, 8)), time_axis_offset=1)
        with pytest.raises(InsufficientHistoryError):
            fit_svar_ensemble(ens, ModelConfig(2))

    def test_outputs_read_only(self):
        m = fit_svar_ensemble(np.random.default_rng(1).standard_normal((10, 2, 6)), ModelConfig(1))
        with pytest.raises(ValueError):
            m.coef[0, 0, 0] = 1.0


class TestMoments:
    def test_schur_arithmetic(self):
        S = np.array([[1.0, 0.5], [0.5, 1.0]])
        out = schur_complement(S, slice(1, 2), slice(0, 1))
        assert out[0, 0] == pytest.approx(0.75, abs=1e-15)

    def test_perfectly_correlated_channels(self):
        x = np.random.default_rng(0).standard_normal((50, 1, 20))
        data = np.concatenate([x, x], axis=1)
        mom = compute_lagged_moments(data, 2)
        assert np.max(np.abs(mom.conditional_cov(1))) < 1e-10

    def test_singular_conditioning_block_warns(self):
        x = np.random.default_rng(0).standard_normal((50, 2, 20))
        x[:, 0, 5:10] = 1.0
        with pytest.warns(RuntimeWarning, match="ill-conditioned"):
            mom = compute_lagged_moments(x, 2)
        assert np.all(np.isfinite(mom.cond_cov))

    def test_independent_channels(self):
        data = np.random.default_rng(1).standard_normal((20_000, 2, 4))
        mom = compute_lagged_moments(data, 2)
        R = 20_000
        np.testing.assert_allclose(mom.conditional_cov(1), mom.marginal_cov(1), atol=5 / R ** 0.5)
        np.testing.assert_allclose(mom.marginal_cov(1), np.broadcast_to(np.eye(2), (2, 2, 2)),
                                   atol=5 * (2 / R) ** 0.5)

    def test_marginal_is_block_of_joint(self):
        mom = compute_lagged_moments(np.random.default_rng(2).standard_normal((30, 2, 9)), 3)
        np.testing.assert_array_equal(mom.marginal_cov(1), mom.cov[:, 3:, 3:])
        np.testing.assert_array_equal(mom.marginal_mean(0), mom.mean[:, :3])
        for i in range(mom.times.size):
            assert np.all(np.linalg.eigvalsh(mom.cov[i]) > -1e-12)
            assert np.all(np.linalg.eigvalsh(mom.cond_cov[i, 0]) > -1e-12)

    def test_matches_numpy_cov(self):
        data = np.random.default_rng(3).standard_normal((25, 2, 7))
        p = 2
        mom = compute_lagged_moments(data, p)
        t = 4
        Z = np.column_stack([data[:, 0, t - 1], data[:, 0, t - 2], data[:, 1, t - 1], data[:, 1, t - 2]])
        i = t - p
        np.testing.assert_allclose(mom.cov[i], np.cov(Z, rowvar=False), atol=1e-14)
        np.testing.assert_allclose(mom.mean[i], Z.mean(axis=0), atol=1e-15)

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 10 ** 6), st.floats(-50, 50), st.floats(0.01, 100))
    def test_affine_equivariance(self, seed, shift, scale):
        data = np.random.default_rng(seed).standard_normal((15, 2, 8))
        base = compute_lagged_moments(data, 2)
        moved = data.copy()
        moved[:, 1] = moved[:, 1] * scale + shift
        mom = compute_lagged_moments(moved, 2)
        tol = dict(rtol=1e-8, atol=1e-9 * max(1.0, scale ** 2, abs(shift) * scale))
        np.testing.assert_allclose(mom.mean[:, 2:], base.mean[:, 2:] * scale + shift, **tol)
        np.testing.assert_allclose(mom.cov[:, :2, :2], base.cov[:, :2, :2], **tol)
        np.testing.assert_allclose(mom.cov[:, 2:, 2:], base.cov[:, 2:, 2:] * scale ** 2, **tol)
        np.testing.assert_allclose(mom.cov[:, :2, 2:], base.cov[:, :2, 2:] * scale, **tol)
        np.testing.assert_allclose(mom.cond_cov[:, 1], base.cond_cov[:, 1] * scale ** 2, **tol)

    def test_schur_converges_to_analytic(self):
        p = 2
        rng = np.random.default_rng(7)
        A = rng.standard_normal((2 * p, 2 * p))
        Sigma = A @ A.T + 0.5 * np.eye(2 * p)
        # lag vectors are stored newest first; build Sigma in that order
        mom = compute_lagged_moments(gaussian_lag_ensemble(Sigma, 100_000, 8, p), p)
        for ch in (0, 1):
            own = slice(ch * p, (ch + 1) * p)
            other = slice((1 - ch) * p, (2 - ch) * p)
            S = Sigma[own, own] - Sigma[own, other] @ np.linalg.inv(Sigma[other, other]) @ Sigma[other, own]
            est = mom.conditional_cov(ch)[0]
            assert np.linalg.norm(est - S) / np.linalg.norm(S) < 0.02

    def test_single_trial_rejected(self):
        with pytest.raises(DegreesOfFreedomError):
            compute_lagged_moments(np.zeros((1, 2, 5)), 1)


class TestReference:
    def test_single_time_window_equals_moments(self):
        data = np.random.default_rng(4).standard_normal((30, 2, 12))
        mom = compute_lagged_moments(data, 3)
        ref = compute_reference_stats(data, (6, 7), 3, 1)
        np.testing.assert_allclose(ref.mean, mom.marginal_mean(1)[6 - 3], atol=1e-15)
        np.testing.assert_allclose(ref.cov, mom.marginal_cov(1)[6 - 3], atol=1e-14)
        assert ref.n_samples == 30

    def test_constant_segment_gives_zero_covariance(self):
        data = np.random.default_rng(5).standard_normal((10, 2, 20))
        data[:, 1, :10] = 3.0
        ref = compute_reference_stats(data, (2, 10), 2, 1)
        np.testing.assert_array_equal(ref.cov, np.zeros((2, 2)))
        np.testing.assert_array_equal(ref.mean, [3.0, 3.0])

    def test_stationary_baseline(self):
        a = 0.7
        spec = SvarSpec.constant([a], [0.0], [0.0], [a], n_times=60, burn_in=100)
        data = simulate_svar(spec, 2000, seed=6)
        ref = compute_reference_stats(data, (2, 60), 2, 1)
        v = 1 / (1 - a * a)
        np.testing.assert_allclose(ref.cov, [[v, a * v], [a * v, v]], rtol=0.05)
        assert np.all(np.abs(ref.mean) < 0.1)

    def test_window_checks(self):
        ens = TimeSeriesEnsemble(np.zeros((5, 2, 20)), time_axis_offset=10)
        with pytest.raises(ValueError, match="empty"):
            compute_reference_stats(ens, (5, 5), 2, 1)
        with pytest.raises(ValueError, match="overlaps"):
            compute_reference_stats(ens, (5, 12), 2, 1)
        with pytest.raises(InsufficientHistoryError):
            compute_reference_stats(ens, (1, 5), 2, 1)
