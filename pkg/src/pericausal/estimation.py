"""Per-time-point cross-trial SVAR fits and lagged moment structure.

At every analysis time ``t`` (``p <= t < n_times``) the trials are treated as
independent draws of the same time-inhomogeneous process: each channel is
regressed on the lag vectors of both channels across trials (full model) and
on its own lags only (reduced model). No smoothing across time is applied.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import (
    InsufficientHistoryError,
    ModelConfig,
    SingularFitError,
    TimeSeriesEnsemble,
    check_ensemble,
    lag_tensor,
)

NESTING_SLACK = 1e-12
CONDITION_LIMIT = 1e12


class DegreesOfFreedomError(ValueError):
    """Raised when there are too few trials for the number of regressors."""


@dataclass(frozen=True, eq=False)
class SvarModel:
    """Fitted time-inhomogeneous bivariate SVAR.

    Attributes
    ----------
    order : int
    times : ndarray of int, shape (n,)
        Epoch time indices of the analysis points.
    coef : ndarray, shape (n, 2, k)
        Full-model coefficients per equation, columns ordered
        ``[intercept?, X1 lags, X2 lags]``.
    coef_se : ndarray, shape (n, 2, k)
        OLS standard errors of ``coef``.
    sigma2, sigma2_reduced : ndarray, shape (n, 2)
        Residual variances of the full and own-past-only models. Both use
        the full model's ``n_trials - k`` denominator, so the nesting
        ``sigma2 <= sigma2_reduced`` holds exactly.
    n_trials : int
    include_intercept : bool
    """

    order: int
    times: np.ndarray
    coef: np.ndarray
    coef_se: np.ndarray
    sigma2: np.ndarray
    sigma2_reduced: np.ndarray
    n_trials: int
    include_intercept: bool = True

    @property
    def _off(self) -> int:
        return 1 if self.include_intercept else 0

    def _block(self, eq: int, src: int) -> np.ndarray:
        start = self._off + src * self.order
        return self.coef[:, eq, start:start + self.order]

    @property
    def a(self) -> np.ndarray:
        """Own-lag coefficients of channel 0, shape (n, p)."""
        return self._block(0, 0)

    @property
    def b(self) -> np.ndarray:
        """Channel 1 -> channel 0 coefficients, shape (n, p)."""
        return self._block(0, 1)

    @property
    def c(self) -> np.ndarray:
        """Channel 0 -> channel 1 coefficients, shape (n, p)."""
        return self._block(1, 0)

    @property
    def d(self) -> np.ndarray:
        return self._block(1, 1)

    @property
    def intercept(self) -> np.ndarray:
        if not self.include_intercept:
            return np.zeros((self.times.shape[0], 2))
        return self.coef[:, :, 0]

    @classmethod
    def from_parameters(cls, a, b, c, d, intercept=(0.0, 0.0), sigma2=(1.0, 1.0),
                        sigma2_reduced=None, t: int = None, n_trials: int = 0) -> "SvarModel":
        """Single-time model holding known (population) parameters."""
        a, b, c, d = (np.atleast_1d(np.asarray(v, dtype=np.float64)) for v in (a, b, c, d))
        p = a.shape[0]
        row0 = np.concatenate([[intercept[0]], a, b])
        row1 = np.concatenate([[intercept[1]], c, d])
        coef = np.stack([row0, row1])[None]
        sigma2 = np.asarray(sigma2, dtype=np.float64).reshape(1, 2)
        red = sigma2 if sigma2_reduced is None else np.asarray(sigma2_reduced, float).reshape(1, 2)
        times = np.array([p if t is None else t])
        return cls(p, times, coef, np.zeros_like(coef), sigma2, red, n_trials, True)

    def cross_coef(self, effect: int) -> np.ndarray:
        """Coefficients of the other channel's lags in ``effect``'s equation."""
        return self._block(effect, 1 - effect)

    def index_of(self, t: int) -> int:
        idx = int(t) - int(self.times[0])
        if not 0 <= idx < self.times.shape[0]:
            raise IndexError(f"time {t} is not an analysis time")
        return idx


@dataclass(frozen=True, eq=False)
class LaggedMoments:
    """Cross-trial moments of the stacked lag vector ``[X1_p; X2_p]``.

    Attributes
    ----------
    order : int
    times : ndarray of int, shape (n,)
    mean : ndarray, shape (n, 2p)
    cov : ndarray, shape (n, 2p, 2p)
        Sample covariance with ``n_trials - 1`` normalization.
    cond_cov : ndarray, shape (n, 2, p, p)
        ``cond_cov[:, k]`` is the covariance of channel ``k``'s lags given
        the other channel's lags (Schur complement).
    """

    order: int
    times: np.ndarray
    mean: np.ndarray
    cov: np.ndarray
    cond_cov: np.ndarray
    n_trials: int

    @classmethod
    def from_parameters(cls, mean, cov, t: int = None, n_trials: int = 0) -> "LaggedMoments":
        """Single-time moments of a known joint Gaussian lag distribution."""
        mean = np.asarray(mean, dtype=np.float64)
        cov = np.asarray(cov, dtype=np.float64)
        p = mean.shape[0] // 2
        s1, s2 = slice(0, p), slice(p, 2 * p)
        cond = np.stack([schur_complement(cov, s1, s2, warn=False),
                         schur_complement(cov, s2, s1, warn=False)])
        times = np.array([p if t is None else t])
        return cls(p, times, mean[None], cov[None], cond[None], n_trials)

    def _sl(self, channel: int) -> slice:
        return slice(channel * self.order, (channel + 1) * self.order)

    def marginal_mean(self, channel: int) -> np.ndarray:
        return self.mean[:, self._sl(channel)]

    def marginal_cov(self, channel: int) -> np.ndarray:
        s = self._sl(channel)
        return self.cov[:, s, s]

    def conditional_cov(self, channel: int) -> np.ndarray:
        """Covariance of ``channel``'s lags given the other channel's lags."""
        return self.cond_cov[:, channel]


@dataclass(frozen=True, eq=False)
class ReferenceStats:
    """Pooled baseline moments of one channel's lag vector."""

    window: tuple
    channel: int
    mean: np.ndarray
    cov: np.ndarray
    n_samples: int


def _as_epochs(epochs, p: int) -> TimeSeriesEnsemble:
    epochs = check_ensemble(epochs, min_channels=2)
    if epochs.n_channels != 2:
        raise ValueError(f"bivariate ensemble expected, got {epochs.n_channels} channels")
    off = epochs.time_axis_offset
    if off is not None and off < p:
        raise InsufficientHistoryError(
            f"alignment offset {off} leaves fewer than {p} history samples"
        )
    if epochs.n_times <= p:
        raise InsufficientHistoryError(f"{epochs.n_times} samples leave no analysis time for order {p}")
    return epochs


def _design(lags: np.ndarray, cols, intercept: bool) -> np.ndarray:
    # lags: (n, R, 2, p)
    parts = [lags[:, :, c, :] for c in cols]
    if intercept:
        parts.insert(0, np.ones(lags.shape[:2] + (1,)))
    return np.concatenate(parts, axis=2)


def _ols(D: np.ndarray, y: np.ndarray, times: np.ndarray, ridge: float, intercept: bool):
    """Batched least squares over the leading (time) axis.

    Returns coefficients, unscaled coefficient variances (diagonal of
    ``(D^T D)^-1``) and residual sums of squares.
    """
    n, R, k = D.shape
    if ridge > 0:
        G = np.einsum("nri,nrj->nij", D, D)
        pen = np.full(k, ridge)
        if intercept:
            pen[0] = 0.0
        A = G + pen * np.eye(k)
        rhs = np.einsum("nri,nr->ni", D, y)
        coef = np.linalg.solve(A, rhs[..., None])[..., 0]
        Ainv = np.linalg.inv(A)
        cov_unscaled = Ainv @ G @ Ainv
    else:
        U, s, Vt = np.linalg.svd(D, full_matrices=False)
        tol = s[:, :1] * max(R, k) * np.finfo(float).eps
        bad = np.flatnonzero(np.any(s <= tol, axis=1))
        if bad.size:
            t = int(times[bad[0]])
            raise SingularFitError(
                f"rank-deficient cross-trial design at t={t}; set ridge_epsilon > 0 to stabilize",
                time_index=t,
            )
        uty = np.einsum("nri,nr->ni", U, y)
        coef = np.einsum("nji,nj->ni", Vt, uty / s)
        V = np.swapaxes(Vt, 1, 2)
        cov_unscaled = np.einsum("nik,nk,njk->nij", V, 1.0 / s ** 2, V)
    resid = y - np.einsum("nrk,nk->nr", D, coef)
    rss = np.einsum("nr,nr->n", resid, resid)
    diag = np.diagonal(cov_unscaled, axis1=1, axis2=2)
    return coef, diag, rss


def fit_svar_ensemble(epochs, config: ModelConfig) -> SvarModel:
    """Fit full and reduced cross-trial regressions at every analysis time.

    Parameters
    ----------
    epochs : TimeSeriesEnsemble or ndarray, shape (n_trials, 2, n_times)
    config : ModelConfig

    Returns
    -------
    SvarModel

    Raises
    ------
    DegreesOfFreedomError
        If ``n_trials <= 2p + 1`` regressors.
    SingularFitError
        If a design is rank deficient and ``ridge_epsilon == 0``.
    """
    p = config.order
    epochs = _as_epochs(epochs, p)
    data = epochs.data
    R = data.shape[0]
    k = 2 * p + int(config.include_intercept)
    if R <= k:
        raise DegreesOfFreedomError(f"{R} trials cannot support {k} regressors per equation")
    lags = lag_tensor(data, p)  # (n, R, 2, p)
    times = np.arange(p, data.shape[2])

    coef = np.empty((times.shape[0], 2, k))
    se = np.empty_like(coef)
    sigma2 = np.empty((times.shape[0], 2))
    sigma2_red = np.empty_like(sigma2)
    dof = R - k
    D_full = _design(lags, (0, 1), config.include_intercept)
    for eq in (0, 1):
        y = np.ascontiguousarray(data[:, eq, p:].T)  # (n, R)
        b, diag, rss = _ols(D_full, y, times, config.ridge_epsilon, config.include_intercept)
        D_red = _design(lags, (eq,), config.include_intercept)
        _, _, rss_red = _ols(D_red, y, times, config.ridge_epsilon, config.include_intercept)
        coef[:, eq] = b
        sigma2[:, eq] = rss / dof
        se[:, eq] = np.sqrt(np.maximum(diag * sigma2[:, eq, None], 0.0))
        sigma2_red[:, eq] = rss_red / dof
    if config.ridge_epsilon == 0:
        excess = sigma2 - sigma2_red
        scale = np.maximum(sigma2_red, 1.0)
        if np.any(excess > NESTING_SLACK * scale):
            raise AssertionError("full-model residual variance exceeds the reduced model's")
        # rounding only; keep the nesting exact for downstream log ratios
        sigma2 = np.minimum(sigma2, sigma2_red)
    for arr in (coef, se, sigma2, sigma2_red, times):
        arr.setflags(write=False)
    return SvarModel(p, times, coef, se, sigma2, sigma2_red, R, config.include_intercept)


def schur_complement(cov: np.ndarray, keep: slice, given: slice, warn: bool = True) -> np.ndarray:
    """``S_kk - S_kg pinv(S_gg) S_gk`` for stacked covariances, shape (..., m, m)."""
    S_kk = cov[..., keep, keep]
    S_kg = cov[..., keep, given]
    S_gg = cov[..., given, given]
    if warn:
        cond = np.linalg.cond(S_gg)
        if np.any(~np.isfinite(cond) | (cond > CONDITION_LIMIT)):
            warnings.warn(
                "conditioning block is ill-conditioned (condition number > 1e12); "
                "using the pseudoinverse",
                RuntimeWarning,
                stacklevel=3,
            )
    out = S_kk - S_kg @ np.linalg.pinv(S_gg, hermitian=True) @ np.swapaxes(S_kg, -1, -2)
    return 0.5 * (out + np.swapaxes(out, -1, -2))


def compute_lagged_moments(epochs, p: int) -> LaggedMoments:
    """Per-time cross-trial mean and covariance of ``[X1_p; X2_p]``.

    Conditional covariances use the Schur complement with a pseudoinverse of
    the conditioning block, so a singular block is tolerated.
    """
    epochs = _as_epochs(epochs, p)
    R = epochs.n_trials
    if R < 2:
        raise DegreesOfFreedomError("covariance needs at least 2 trials")
    lags = lag_tensor(epochs.data, p)  # (n, R, 2, p)
    n = lags.shape[0]
    Z = lags.reshape(n, R, 2 * p)
    mean = Z.mean(axis=1)
    Zc = Z - mean[:, None, :]
    cov = np.einsum("nri,nrj->nij", Zc, Zc) / (R - 1)
    s1, s2 = slice(0, p), slice(p, 2 * p)
    cond = np.stack([schur_complement(cov, s1, s2), schur_complement(cov, s2, s1)], axis=1)
    times = np.arange(p, epochs.n_times)
    return LaggedMoments(p, times, mean, cov, cond, R)


def compute_reference_stats(epochs, reference_window, p: int, channel: int) -> ReferenceStats:
    """Pool one channel's lag vectors over all trials and reference times.

    Parameters
    ----------
    epochs : TimeSeriesEnsemble
    reference_window : (start, end)
        Half-open range of epoch time indices. Must lie after the first
        ``p`` samples and end at or before the alignment point.
    p : int
    channel : int
        The cause channel whose baseline marginal is wanted.
    """
    epochs = _as_epochs(epochs, p)
    start, end = (int(v) for v in reference_window)
    if end <= start:
        raise ValueError(f"empty reference window [{start}, {end})")
    if start < p or end > epochs.n_times:
        raise InsufficientHistoryError(
            f"reference window [{start}, {end}) must lie within [{p}, {epochs.n_times})"
        )
    off = epochs.time_axis_offset
    if off is not None and end > off:
        raise ValueError(
            f"reference window [{start}, {end}) overlaps the event at index {off}"
        )
    data = epochs.data[:, channel, :]
    # (R, W, p): lag vectors at t = start..end-1
    idx = np.arange(start, end)[:, None] - 1 - np.arange(p)[None, :]
    pooled = data[:, idx].reshape(-1, p)
    mean = pooled.mean(axis=0)
    cov = np.atleast_2d(np.cov(pooled, rowvar=False, ddof=1)) if pooled.shape[0] > 1 else np.zeros((p, p))
    return ReferenceStats((start, end), channel, mean, cov, pooled.shape[0])


def reference_from_moments(moments: LaggedMoments, t: int, channel: int) -> ReferenceStats:
    """Reference statistics equal to the current marginal at time ``t``."""
    i = int(t) - int(moments.times[0])
    return ReferenceStats((t, t + 1), channel, moments.marginal_mean(channel)[i].copy(),
                          moments.marginal_cov(channel)[i].copy(), moments.n_trials)
