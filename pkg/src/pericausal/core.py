"""Ensemble container, lag embedding and input validation.

Data layout
-----------
All tensors are ``(n_trials, n_channels, n_times)``, trial-major. Lag vectors
are always ordered newest first: ``[x[t-1], x[t-2], ..., x[t-p]]``. Every
coefficient vector in the package follows the same convention.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np


class EnsembleError(ValueError):
    """Raised when an ensemble violates a structural invariant."""


class InsufficientHistoryError(ValueError):
    """Raised when a time index has fewer than ``p`` preceding samples."""


class SingularFitError(np.linalg.LinAlgError):
    """Raised when a cross-trial design matrix is rank deficient."""

    def __init__(self, message: str, time_index: Optional[int] = None):
        super().__init__(message)
        self.time_index = time_index


@dataclass(frozen=True)
class TimeSeriesEnsemble:
    """Stack of trials of a multichannel recording.

    Parameters
    ----------
    data : ndarray, shape (n_trials, n_channels, n_times)
        Real samples. Stored read-only.
    sampling_rate : float, default=1.0
        Samples per second.
    time_axis_offset : int or None, default=None
        Index of the alignment sample within each trial. ``None`` for raw
        recordings that have no alignment point.
    channel_names : tuple of str, optional
    """

    data: np.ndarray
    sampling_rate: float = 1.0
    time_axis_offset: Optional[int] = None
    channel_names: Optional[tuple] = field(default=None)

    def __post_init__(self):
        arr = np.array(self.data, dtype=np.float64, copy=True)
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)
        if self.channel_names is not None:
            object.__setattr__(self, "channel_names", tuple(self.channel_names))

    @property
    def n_trials(self) -> int:
        return self.data.shape[0]

    @property
    def n_channels(self) -> int:
        return self.data.shape[1]

    @property
    def n_times(self) -> int:
        return self.data.shape[2]

    @property
    def shape(self) -> tuple:
        return self.data.shape

    def select_trials(self, index) -> "TimeSeriesEnsemble":
        return replace(self, data=self.data[np.asarray(index)])

    def select_channels(self, channels) -> "TimeSeriesEnsemble":
        channels = list(channels)
        names = None
        if self.channel_names is not None:
            names = tuple(self.channel_names[c] for c in channels)
        return replace(self, data=self.data[:, channels, :], channel_names=names)

    def with_offset(self, offset: Optional[int]) -> "TimeSeriesEnsemble":
        return replace(self, time_axis_offset=offset)


@dataclass(frozen=True)
class ModelConfig:
    """Settings for the per-time-point SVAR fit.

    Parameters
    ----------
    order : int
        Number of lags ``p``.
    include_intercept : bool, default=True
        Fit the innovation mean as an intercept.
    ridge_epsilon : float, default=0.0
        Added to the diagonal of each normal-equation matrix (intercept
        excluded). Zero means plain least squares.
    """

    order: int
    include_intercept: bool = True
    ridge_epsilon: float = 0.0

    def __post_init__(self):
        if int(self.order) != self.order or self.order < 1:
            raise ValueError(f"order must be a positive integer, got {self.order!r}")
        if self.ridge_epsilon < 0:
            raise ValueError("ridge_epsilon must be nonnegative")


def validate_ensemble(ensemble) -> TimeSeriesEnsemble:
    """Check every ensemble invariant and return the ensemble.

    Raises
    ------
    EnsembleError
        On a wrong number of dimensions, an axis that is too short, a
        non-finite sample (the first offending ``(trial, channel, time)`` is
        named), a nonpositive sampling rate or an out-of-range offset.
    """
    if not isinstance(ensemble, TimeSeriesEnsemble):
        ensemble = TimeSeriesEnsemble(np.asarray(ensemble, dtype=np.float64))
    data = ensemble.data
    if data.ndim != 3:
        raise EnsembleError(
            f"expected a (trials, channels, times) tensor, got {data.ndim} dimension(s)"
        )
    n_trials, n_channels, n_times = data.shape
    if n_trials < 1 or n_channels < 1:
        raise EnsembleError(f"empty axis in ensemble of shape {data.shape}")
    if n_times < 2:
        raise EnsembleError(f"need at least 2 time samples, got {n_times}")
    bad = ~np.isfinite(data)
    if bad.any():
        r, c, t = (int(i) for i in np.argwhere(bad)[0])
        raise EnsembleError(
            f"non-finite sample {data[r, c, t]} at (trial={r}, channel={c}, time={t})"
        )
    if not np.isfinite(ensemble.sampling_rate) or ensemble.sampling_rate <= 0:
        raise EnsembleError(f"sampling_rate must be positive, got {ensemble.sampling_rate}")
    off = ensemble.time_axis_offset
    if off is not None and not 0 <= off < n_times:
        raise EnsembleError(f"time_axis_offset {off} outside [0, {n_times})")
    if ensemble.channel_names is not None and len(ensemble.channel_names) != n_channels:
        raise EnsembleError("channel_names length does not match the channel axis")
    return ensemble


def check_ensemble(X, min_trials: int = 1, min_channels: int = 1) -> TimeSeriesEnsemble:
    """Coerce arrays or ensembles to a validated :class:`TimeSeriesEnsemble`.

    A 2-D array is read as a single continuous recording ``(channels, times)``.
    """
    if not isinstance(X, TimeSeriesEnsemble):
        arr = np.asarray(X, dtype=np.float64)
        if arr.ndim == 2:
            arr = arr[np.newaxis]
        X = TimeSeriesEnsemble(arr)
    X = validate_ensemble(X)
    if X.n_trials < min_trials:
        raise EnsembleError(f"need at least {min_trials} trials, got {X.n_trials}")
    if X.n_channels < min_channels:
        raise EnsembleError(f"need at least {min_channels} channels, got {X.n_channels}")
    return X


def build_lag_embedding(ensemble, channel: int, t: int, p: int) -> np.ndarray:
    """Lag vector of one channel at time ``t`` for every trial.

    Returns
    -------
    ndarray, shape (n_trials, p)
        Row ``r`` is ``[x[r, t-1], ..., x[r, t-p]]``.
    """
    data = ensemble.data if isinstance(ensemble, TimeSeriesEnsemble) else np.asarray(ensemble)
    if p < 1:
        raise ValueError(f"order must be >= 1, got {p}")
    n_times = data.shape[-1]
    if t >= n_times or t < 0:
        raise IndexError(f"time index {t} outside [0, {n_times})")
    if t < p:
        raise InsufficientHistoryError(
            f"time {t} has fewer than {p} past samples; earliest valid time is {p}"
        )
    return data[:, channel, t - p:t][:, ::-1].copy()


def lag_tensor(data: np.ndarray, p: int) -> np.ndarray:
    """Lag vectors of all channels at all analysis times ``p..T-1``.

    Returns
    -------
    ndarray, shape (n_times - p, n_trials, n_channels, p)
        ``out[t - p, r, c, i] == data[r, c, t - 1 - i]``.
    """
    n_times = data.shape[-1]
    if n_times <= p:
        raise InsufficientHistoryError(
            f"series of length {n_times} leaves no analysis time for order {p}"
        )
    windows = np.lib.stride_tricks.sliding_window_view(data, p, axis=-1)
    # windows[r, c, s, j] = data[r, c, s + j]; time t uses s = t - p, reversed
    out = windows[:, :, : n_times - p, ::-1]
    return np.ascontiguousarray(np.moveaxis(out, 2, 0))
