import numpy as np
import pytest

from pericausal._rng import standard_normal_stream
from pericausal.simulation import (
    StabilityError,
    SvarSpec,
    check_stability,
    companion_matrix,
    simulate_svar,
    synchrony_pitfall_scenario,
    unidirectional_scenario,
)


def white_noise_spec(n_times=200):
    return SvarSpec.constant([0.0], [0.0], [0.0], [0.0], n_times=n_times, burn_in=0)


def test_normal_stream_is_counter_based():
    long = standard_normal_stream(5, (3, 1), 500)
    short = standard_normal_stream(5, (3, 1), 50)
    np.testing.assert_array_equal(long[:50], short)
    assert abs(long.mean()) < 0.2 and abs(long.std() - 1) < 0.1


def test_white_noise_moments_match_sampling_bounds():
    R = 2000
    x = simulate_svar(white_noise_spec(), R, seed=1).data
    assert x.shape == (R, 2, 200)
    z_mean = x.mean(axis=0) / (1 / np.sqrt(R))
    z_var = (x.var(axis=0, ddof=1) - 1) / np.sqrt(2 / R)
    # 400 per-time checks: 3-sigma exceedances should be rare, 4.5-sigma never
    for z in (z_mean, z_var):
        assert np.mean(np.abs(z) > 3) < 0.01
        assert np.all(np.abs(z) < 4.5)


def test_ar1_stationary_variance():
    spec = SvarSpec.constant([0.9], [0.0], [0.0], [0.0], n_times=500, burn_in=300)
    x = simulate_svar(spec, 2000, seed=2).data[:, 0]
    expected = 1.0 / (1 - 0.81)
    assert x.size >= 10 ** 6
    assert abs(x.var() / expected - 1) < 0.05


def test_reproducible_and_seed_sensitive():
    spec = unidirectional_scenario(0.3, 2, 50)
    a = simulate_svar(spec, 4, seed=9).data
    b = simulate_svar(spec, 4, seed=9).data
    c = simulate_svar(spec, 4, seed=10).data
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)


def test_trial_permutation_permutes_output():
    spec = unidirectional_scenario(0.3, 2, 40)
    ids = np.array([4, 0, 3, 1, 2])
    full = simulate_svar(spec, 5, seed=3).data
    perm = simulate_svar(spec, 5, seed=3, trial_ids=ids).data
    np.testing.assert_array_equal(perm, full[ids])


def test_no_feedback_channel_is_untouched_by_other_channel():
    base = SvarSpec.constant([0.5, -0.2], [0.0, 0.0], [0.7, 0.1], [0.3, 0.0], n_times=80)
    other = SvarSpec.constant([0.5, -0.2], [0.0, 0.0], [0.0, 0.0], [0.0, 0.0],
                              noise_mean=(0.0, 5.0), noise_var=(1.0, 9.0), n_times=80)
    x1 = simulate_svar(base, 3, seed=4).data[:, 0]
    y1 = simulate_svar(other, 3, seed=4).data[:, 0]
    np.testing.assert_array_equal(x1, y1)

    # independent scalar recursion on the same channel-0 noise stream
    p, burn = 2, base.burn_in
    for r in range(3):
        z = standard_normal_stream(4, (r, 0), p + burn + 80)
        s = np.empty_like(z)
        s[:p] = z[:p]
        for k in range(p, z.size):
            s[k] = 0.5 * s[k - 1] - 0.2 * s[k - 2] + z[k]
        np.testing.assert_allclose(x1[r], s[p + burn:], rtol=0, atol=1e-12)


def test_uncoupled_channels_are_uncorrelated():
    spec = SvarSpec.constant([0.6], [0.0], [0.0], [0.4], n_times=60)
    x = simulate_svar(spec, 3000, seed=5).data
    R = x.shape[0]
    for lag in range(0, 4):
        for t in range(10, 60, 10):
            r = np.corrcoef(x[:, 0, t], x[:, 1, t - lag])[0, 1]
            assert abs(r) < 4.5 / np.sqrt(R)


def test_invalid_specs_rejected():
    with pytest.raises(ValueError, match="strictly positive"):
        SvarSpec.constant([0.1], [0], [0], [0], noise_var=(1.0, 0.0), n_times=5)
    with pytest.raises(ValueError, match="schedule shape"):
        SvarSpec(np.zeros((5, 1)), np.zeros((4, 1)), np.zeros((5, 1)), np.zeros((5, 1)),
                 np.zeros((5, 2)), np.ones((5, 2)))


def test_unstable_constant_spec_raises():
    spec = SvarSpec.constant([1.1], [0.0], [0.0], [0.2], n_times=10)
    with pytest.raises(StabilityError, match="spectral radius"):
        simulate_svar(spec, 2, seed=0)


def test_time_varying_instability_only_warns():
    a = np.full((10, 1), 0.5)
    a[3] = 1.2
    spec = SvarSpec(a, np.zeros((10, 1)), np.zeros((10, 1)), np.zeros((10, 1)),
                    np.zeros((10, 2)), np.ones((10, 2)))
    with pytest.warns(RuntimeWarning, match="t=3"):
        check_stability(spec)


def test_companion_matrix_layout():
    A = companion_matrix([1, 2], [3, 4], [5, 6], [7, 8])
    np.testing.assert_array_equal(A[0], [1, 2, 3, 4])
    np.testing.assert_array_equal(A[2], [5, 6, 7, 8])
    assert A[1, 0] == 1 and A[3, 2] == 1


class TestUnidirectional:
    def test_zero_coupling_is_two_independent_ar(self):
        spec = unidirectional_scenario(0.0, 2, 30)
        assert np.all(spec.b == 0) and np.all(spec.c == 0)

    @pytest.mark.parametrize("coupling", [0.0, 0.5, 2.0])
    def test_stable(self, coupling):
        assert unidirectional_scenario(coupling, 3, 20).spectral_radius() < 1

    def test_unstable_own_dynamics_rejected(self):
        with pytest.raises(StabilityError):
            unidirectional_scenario(0.5, 1, 20, driver_ar=(1.05,))

    def test_lagged_cross_correlation_is_directional(self):
        x = simulate_svar(unidirectional_scenario(0.5, 2, 400), 20, seed=6).data
        eff, drv = x[:, 0], x[:, 1]

        def lagcorr(a, b):  # corr(a[t], b[t-1]) pooled over trials
            return np.corrcoef(a[:, 1:].ravel(), b[:, :-1].ravel())[0, 1]

        assert lagcorr(eff, drv) > lagcorr(drv, eff) + 0.1

    def test_event_bump_in_driver_mean(self):
        spec = unidirectional_scenario(0.5, 2, 50, event_time=25, event_amplitude=2.0)
        assert spec.noise_mean[25, 1] == 2.0
        assert np.all(spec.noise_mean[:, 0] == 0)


class TestSynchronyPitfall:
    def test_control_has_constant_variance(self):
        spec = synchrony_pitfall_scenario(1.0, 1.0, (300, 400), 3, 600)
        assert np.all(spec.noise_var[:, 1] == 1.0)

    def test_dip_schedule_is_exact(self):
        spec = synchrony_pitfall_scenario(1.0, 0.01, (300, 400), 3, 600)
        v = spec.noise_var[:, 1]
        assert np.all(v[300:400] == 0.01)
        assert np.all(v[:300] == 1.0) and np.all(v[400:] == 1.0)
        assert spec.spectral_radius() < 1
        assert np.all(spec.b[:, 0] > 0) and np.all(spec.c == 0)

    @pytest.mark.parametrize("window", [(-1, 10), (550, 601), (20, 20)])
    def test_window_out_of_range(self, window):
        with pytest.raises(ValueError, match="window"):
            synchrony_pitfall_scenario(1.0, 0.1, window, 3, 600)

    def test_dip_variance_must_be_smaller(self):
        with pytest.raises(ValueError):
            synchrony_pitfall_scenario(1.0, 2.0, (10, 20), 3, 100)

    def test_signals_lock_inside_window(self):
        # driver's newest lag becomes more predictable from the effect's history
        p = 3
        x = simulate_svar(synchrony_pitfall_scenario(1.0, 0.01, (300, 400), p, 600), 500, 1).data

        def unexplained(t):
            target = x[:, 1, t - 1]
            design = np.column_stack([np.ones(x.shape[0])] + [x[:, 0, t - 1 - i] for i in range(p)])
            resid = target - design @ np.linalg.lstsq(design, target, rcond=None)[0]
            return resid.var() / target.var()

        inside = np.mean([unexplained(t) for t in range(310, 400)])
        before = np.mean([unexplained(t) for t in range(100, 300)])
        assert inside < 0.6 * before


def test_spec_dict_round_trip():
    spec = unidirectional_scenario(0.4, 2, 12, event_time=6, event_amplitude=1.0)
    again = SvarSpec.from_dict(spec.to_dict())
    for name in ("a", "b", "c", "d", "noise_mean", "noise_var"):
        np.testing.assert_array_equal(getattr(spec, name), getattr(again, name))
    assert again.burn_in == spec.burn_in


def test_spec_from_dict_constant_schedules():
    spec = SvarSpec.from_dict({"order": 1, "n_times": 7, "a": [0.3], "b": [0.1], "c": [0.0],
                               "d": [0.2], "noise_var": [1.0, 2.0]})
    assert spec.n_times == 7 and spec.noise_var[3, 1] == 2.0
