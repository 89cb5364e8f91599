"""Time-resolved GC, TE, DCS and rDCS for the bivariate Gaussian SVAR.

Every measure is in nats. A direction names the cause and the effect:
``"ch2->ch1"`` uses channel 0's equation and the channel-1 lag coefficients
(``b``); ``"ch1->ch2"`` uses channel 1's equation and ``c``.
"""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass, replace
from typing import Iterable, Optional, Union

import numpy as np

from ._rng import philox
from .core import ModelConfig, SingularFitError, check_ensemble
from .estimation import (
    DegreesOfFreedomError,
    LaggedMoments,
    ReferenceStats,
    SvarModel,
    compute_lagged_moments,
    compute_reference_stats,
    fit_svar_ensemble,
)

MAX_RETRIES = 10
MAX_FAILURE_FRACTION = 0.2
MIN_MC_SAMPLES = 100


class Measure(str, enum.Enum):
    GC = "GC"
    TE = "TE"
    DCS = "DCS"
    RDCS = "rDCS"


class Direction(str, enum.Enum):
    CH2_TO_CH1 = "ch2->ch1"
    CH1_TO_CH2 = "ch1->ch2"

    @property
    def effect(self) -> int:
        return 0 if self is Direction.CH2_TO_CH1 else 1

    @property
    def cause(self) -> int:
        return 1 - self.effect


DIRECTIONS = (Direction.CH2_TO_CH1, Direction.CH1_TO_CH2)


class BootstrapError(RuntimeError):
    """Raised when too many bootstrap replicates fail to fit."""


@dataclass(frozen=True, eq=False)
class CausalityTrace:
    """One causal measure over time for one direction.

    ``flags`` marks times where the measure is undefined or infinite (zero
    innovation variance); those values are reported, not raised.
    """

    measure: Measure
    direction: Direction
    times: np.ndarray
    values: np.ndarray
    flags: np.ndarray
    n_trials: int = 0
    boot_mean: Optional[np.ndarray] = None
    boot_std: Optional[np.ndarray] = None
    n_boot: int = 0


# -- closed forms ------------------------------------------------------------
# All operate on stacks: sigma2 (...,), b (..., p), matrices (..., p, p).

def _quad(b: np.ndarray, M: np.ndarray) -> np.ndarray:
    return np.einsum("...i,...ij,...j->...", b, M, b)


def gc_value(sigma2_reduced, sigma2_full):
    """Half log ratio of reduced to full residual variance."""
    with np.errstate(divide="ignore", invalid="ignore"):
        return 0.5 * np.log(np.asarray(sigma2_reduced) / np.asarray(sigma2_full))


def te_value(sigma2, b, cond_cov):
    """TE from the cause's lag covariance conditioned on the effect's lags."""
    sigma2 = np.asarray(sigma2, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        return 0.5 * np.log((sigma2 + _quad(np.asarray(b), np.asarray(cond_cov))) / sigma2)


def dcs_value(sigma2, b, marginal_cov):
    """DCS: TE's form with the marginal instead of the conditional covariance."""
    return te_value(sigma2, b, marginal_cov)


def rdcs_value(sigma2, b, second_moment, ref_cov, printed_form: bool = False):
    """Expected Gaussian KL under replacement of the cause by its baseline.

    Parameters
    ----------
    sigma2 : innovation variance of the effect
    b : cause coefficients in the effect's equation
    second_moment : ``E[(X - mu_ref)(X - mu_ref)^T]`` of the cause's lags
    ref_cov : baseline covariance of the cause's lags
    printed_form : bool, default=False
        Drop ``sigma2`` from the numerator of the mean-shift term. That form
        gives ``-1/2`` instead of ``0`` when ``b = 0``; kept for comparison.
    """
    sigma2 = np.asarray(sigma2, dtype=np.float64)
    b = np.asarray(b)
    s_tilde = sigma2 + _quad(b, np.asarray(ref_cov))
    shift = _quad(b, np.asarray(second_moment))
    num = shift if printed_form else sigma2 + shift
    with np.errstate(divide="ignore", invalid="ignore"):
        return 0.5 * np.log(s_tilde / sigma2) + num / (2.0 * s_tilde) - 0.5


def gaussian_kl(m1, s1, m2, s2):
    """KL( N(m1, s1) || N(m2, s2) ) for variances ``s1``, ``s2``."""
    return 0.5 * np.log(s2 / s1) + (s1 + (m1 - m2) ** 2) / (2.0 * s2) - 0.5


# -- traces --------------------------------------------------------------------

def _direction(direction) -> Direction:
    return direction if isinstance(direction, Direction) else Direction(direction)


def _trace(measure, direction, times, values, sigma2, n_trials) -> CausalityTrace:
    values = np.asarray(values, dtype=np.float64)
    flags = ~(np.asarray(sigma2) > 0) | ~np.isfinite(values)
    return CausalityTrace(Measure(measure), direction, np.asarray(times).copy(), values,
                          flags, n_trials)


def _check_times(model: SvarModel, moments: LaggedMoments):
    if model.times.shape != moments.times.shape or np.any(model.times != moments.times):
        raise ValueError("model and moments cover different analysis times")
    if model.order != moments.order:
        raise ValueError("model and moments have different orders")


def granger_causality(model: SvarModel, direction) -> CausalityTrace:
    """Per-time GC from reduced/full residual variances of the effect."""
    direction = _direction(direction)
    e = direction.effect
    s_full, s_red = model.sigma2[:, e], model.sigma2_reduced[:, e]
    return _trace(Measure.GC, direction, model.times, gc_value(s_red, s_full), s_full,
                  model.n_trials)


def transfer_entropy(model: SvarModel, moments: LaggedMoments, direction) -> CausalityTrace:
    direction = _direction(direction)
    _check_times(model, moments)
    e, s = direction.effect, direction.cause
    sigma2 = model.sigma2[:, e]
    vals = te_value(sigma2, model.cross_coef(e), moments.conditional_cov(s))
    return _trace(Measure.TE, direction, model.times, vals, sigma2, model.n_trials)


def dynamic_causal_strength(model: SvarModel, moments: LaggedMoments, direction) -> CausalityTrace:
    direction = _direction(direction)
    _check_times(model, moments)
    e, s = direction.effect, direction.cause
    sigma2 = model.sigma2[:, e]
    vals = dcs_value(sigma2, model.cross_coef(e), moments.marginal_cov(s))
    return _trace(Measure.DCS, direction, model.times, vals, sigma2, model.n_trials)


def second_moment_about(moments: LaggedMoments, channel: int, center) -> np.ndarray:
    """``Cov + (mu - center)(mu - center)^T`` for the channel's lags, per time.

    Uses the same ``n - 1`` covariance as the marginal, so a reference equal to
    the current marginal reproduces DCS exactly.
    """
    dev = moments.marginal_mean(channel) - np.asarray(center)
    return moments.marginal_cov(channel) + dev[:, :, None] * dev[:, None, :]


def relative_dcs(model: SvarModel, moments: LaggedMoments, ref: ReferenceStats, direction,
                 printed_form: bool = False) -> CausalityTrace:
    """rDCS against a baseline marginal of the cause's lags.

    ``ref`` must describe the cause channel of ``direction``.
    """
    direction = _direction(direction)
    _check_times(model, moments)
    e, s = direction.effect, direction.cause
    if ref.channel != s:
        raise ValueError(f"reference stats describe channel {ref.channel}, cause is {s}")
    if ref.mean.shape != (model.order,):
        raise ValueError("reference dimension does not match model order")
    sigma2 = model.sigma2[:, e]
    b = model.cross_coef(e)
    M = second_moment_about(moments, s, ref.mean)
    vals = rdcs_value(sigma2, b, M, ref.cov, printed_form=printed_form)
    s_tilde = sigma2 + _quad(b, np.broadcast_to(ref.cov, M.shape))
    return _trace(Measure.RDCS, direction, model.times, vals, np.minimum(sigma2, s_tilde),
                  model.n_trials)


# -- Monte-Carlo oracle ------------------------------------------------------

def monte_carlo_kl(model: SvarModel, moments: LaggedMoments, t: int, direction,
                   intervention: Union[str, ReferenceStats] = "current",
                   n_samples: int = 100_000, seed: int = 0):
    """Sample-average KL between observational and intervened conditionals.

    Lag vectors are drawn from the joint Gaussian ``N(mean_t, cov_t)``. For
    each draw the effect's conditional ``N(k + a.x_own + b.x_cause, s2)`` is
    compared with the conditional obtained when ``x_cause`` is replaced by an
    independent copy from the chosen marginal, which integrates to
    ``N(k + a.x_own + b.mu', s2 + b C' b)``.

    Parameters
    ----------
    intervention : "current" or ReferenceStats
        ``"current"`` draws the copy from the cause's marginal at ``t``
        (DCS); a ReferenceStats draws it from the baseline (rDCS).

    Returns
    -------
    estimate, standard_error : float
    """
    if n_samples < MIN_MC_SAMPLES:
        raise ValueError(f"n_samples must be >= {MIN_MC_SAMPLES}")
    direction = _direction(direction)
    e, s = direction.effect, direction.cause
    i = model.index_of(t)
    j = int(t) - int(moments.times[0])
    p = model.order
    own = slice(e * p, (e + 1) * p)
    cause = slice(s * p, (s + 1) * p)

    mean, cov = moments.mean[j], moments.cov[j]
    w, V = np.linalg.eigh(0.5 * (cov + cov.T))
    root = V * np.sqrt(np.clip(w, 0.0, None))
    rng = philox(seed, 0xC0FFEE)
    Z = mean + rng.standard_normal((n_samples, 2 * p)) @ root.T

    a = model._block(e, e)[i]
    b = model.cross_coef(e)[i]
    k = model.intercept[i, e]
    s2 = model.sigma2[i, e]
    if isinstance(intervention, ReferenceStats):
        mu_prime, C_prime = intervention.mean, intervention.cov
    elif intervention == "current":
        mu_prime, C_prime = mean[cause], cov[cause, cause]
    else:
        raise ValueError(f"unknown intervention {intervention!r}")

    base = k + Z[:, own] @ a
    m_obs = base + Z[:, cause] @ b
    m_int = base + b @ mu_prime
    s_int = s2 + b @ C_prime @ b
    kl = gaussian_kl(m_obs, s2, m_int, s_int)
    return float(kl.mean()), float(kl.std(ddof=1) / np.sqrt(n_samples))


# -- ensemble-level driver and bootstrap -------------------------------------

def _measures(measures) -> list:
    return [Measure(m) for m in measures]


def compute_measures(epochs, config: ModelConfig, measures: Iterable = tuple(Measure),
                     reference_window=None, directions: Iterable = DIRECTIONS,
                     printed_rdcs: bool = False) -> dict:
    """Fit, compute moments and evaluate the requested measures.

    Returns
    -------
    dict
        ``{(Measure, Direction): CausalityTrace}``.
    """
    measures = _measures(measures)
    directions = [_direction(d) for d in directions]
    if Measure.RDCS in measures and reference_window is None:
        raise ValueError("rDCS needs a reference window")
    model = fit_svar_ensemble(epochs, config)
    moments = compute_lagged_moments(epochs, config.order)
    out = {}
    for direction in directions:
        for m in measures:
            if m is Measure.GC:
                tr = granger_causality(model, direction)
            elif m is Measure.TE:
                tr = transfer_entropy(model, moments, direction)
            elif m is Measure.DCS:
                tr = dynamic_causal_strength(model, moments, direction)
            else:
                ref = compute_reference_stats(epochs, reference_window, config.order,
                                              direction.cause)
                tr = relative_dcs(model, moments, ref, direction, printed_form=printed_rdcs)
            out[(m, direction)] = tr
    return out


def bootstrap_causality(epochs, config: ModelConfig, measures: Iterable = tuple(Measure),
                        n_boot: int = 100, seed: int = 0, reference_window=None,
                        directions: Iterable = DIRECTIONS, printed_rdcs: bool = False) -> dict:
    """Point estimates plus trial-resampling bootstrap bands.

    Replicate ``i`` resamples whole trials with replacement from the Philox
    substream ``(seed, i, attempt)``; a replicate whose fit is singular is
    redrawn from the next attempt's substream, up to ``MAX_RETRIES`` times.
    Results therefore do not depend on replicate execution order.

    Returns
    -------
    dict
        ``{(Measure, Direction): CausalityTrace}`` with ``boot_mean`` and
        ``boot_std`` (``ddof=1``) filled in.

    Raises
    ------
    BootstrapError
        If more than 20% of replicates fail after retries.
    """
    if n_boot < 2:
        raise ValueError("n_boot must be >= 2")
    epochs = check_ensemble(epochs, min_channels=2)
    kw = dict(measures=measures, reference_window=reference_window, directions=directions,
              printed_rdcs=printed_rdcs)
    point = compute_measures(epochs, config, **kw)
    R = epochs.n_trials
    reps = {key: [] for key in point}
    failed = 0
    for i in range(n_boot):
        for attempt in range(MAX_RETRIES + 1):
            idx = philox(seed, i, attempt).integers(0, R, size=R)
            try:
                res = compute_measures(epochs.select_trials(idx), config, **kw)
            except (SingularFitError, DegreesOfFreedomError, np.linalg.LinAlgError):
                continue
            for key, tr in res.items():
                reps[key].append(tr.values)
            break
        else:
            failed += 1
    if failed > MAX_FAILURE_FRACTION * n_boot:
        raise BootstrapError(f"{failed} of {n_boot} bootstrap replicates failed")
    if failed:
        warnings.warn(f"{failed} bootstrap replicate(s) failed and were skipped", RuntimeWarning)
    out = {}
    for key, tr in point.items():
        stack = np.asarray(reps[key])
        with np.errstate(invalid="ignore"):
            out[key] = replace(tr, boot_mean=stack.mean(axis=0), boot_std=stack.std(axis=0, ddof=1),
                               n_boot=stack.shape[0])
    return out
