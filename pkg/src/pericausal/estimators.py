"""scikit-learn compatible wrappers.

``EventEpocher`` is a transformer from a continuous recording to peri-event
epochs; ``TimeVaryingSVAR`` and ``TransientCausality`` fit on epochs. They
compose in a :class:`sklearn.pipeline.Pipeline`::

    Pipeline([("epochs", EventEpocher(window_length=200, alignment_offset=100,
                                      model_order=3, threshold_ratio=3.0)),
              ("causality", TransientCausality(order=3, reference_window=(3, 60)))])
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin, TransformerMixin
from sklearn.exceptions import NotFittedError
from sklearn.utils.validation import check_is_fitted

from .causality import DIRECTIONS, Direction, Measure, bootstrap_causality, compute_measures
from .core import ModelConfig, TimeSeriesEnsemble, check_ensemble, lag_tensor
from .estimation import compute_lagged_moments, fit_svar_ensemble
from .events import (
    DetectionParams,
    EpochParams,
    align_events,
    detect_events,
    extract_snapshots,
    reject_artifacts,
)


def _pair(X, channels) -> TimeSeriesEnsemble:
    X = check_ensemble(X, min_channels=2)
    if X.n_channels == 2 and tuple(channels) == (0, 1):
        return X
    return X.select_channels(channels)


class EventEpocher(TransformerMixin, BaseEstimator):
    """Detect events in a continuous recording and cut aligned epochs.

    ``fit`` finds and aligns event times; ``transform`` extracts the epochs
    (with ``model_order`` lags of history) and drops artifact epochs.

    Parameters
    ----------
    window_length, alignment_offset, model_order, artifact_threshold
        See :class:`~pericausal.events.EpochParams`.
    detection_channel, threshold_ratio, min_separation, alignment_mode,
    peak_search_halfwidth, max_events
        See :class:`~pericausal.events.DetectionParams`.
    random_state : int
        Seed for ``max_events`` subsampling.
    """

    def __init__(self, window_length=100, alignment_offset=0, model_order=1,
                 artifact_threshold=None, detection_channel=0, threshold_ratio=3.0,
                 min_separation=1, alignment_mode="local_peak", peak_search_halfwidth=0,
                 max_events=None, random_state=0):
        self.window_length = window_length
        self.alignment_offset = alignment_offset
        self.model_order = model_order
        self.artifact_threshold = artifact_threshold
        self.detection_channel = detection_channel
        self.threshold_ratio = threshold_ratio
        self.min_separation = min_separation
        self.alignment_mode = alignment_mode
        self.peak_search_halfwidth = peak_search_halfwidth
        self.max_events = max_events
        self.random_state = random_state

    def _detection(self) -> DetectionParams:
        return DetectionParams(self.detection_channel, self.threshold_ratio, self.min_separation,
                               self.alignment_mode, self.peak_search_halfwidth, self.max_events)

    def fit(self, X, y=None):
        X = check_ensemble(X)
        params = self._detection()
        self.candidates_ = detect_events(X, params)
        aligned = align_events(X, self.candidates_, params, seed=self.random_state)
        self.event_times_ = aligned.times
        self.n_dropped_ = aligned.n_dropped
        return self

    def transform(self, X):
        check_is_fitted(self, "event_times_")
        X = check_ensemble(X)
        params = EpochParams(self.window_length, self.alignment_offset, self.model_order,
                             self.artifact_threshold)
        snaps = extract_snapshots(X, self.event_times_, params)
        epochs = snaps.epochs
        self.kept_ = np.ones(epochs.n_trials, dtype=bool)
        if self.artifact_threshold is not None:
            rej = reject_artifacts(epochs, self.artifact_threshold)
            epochs, self.kept_ = rej.epochs, rej.kept
        return epochs


class TimeVaryingSVAR(RegressorMixin, BaseEstimator):
    """Per-time-point cross-trial fit of the bivariate SVAR.

    Attributes
    ----------
    model_ : SvarModel
    times_ : ndarray of int
    coef_ : ndarray, shape (n_times, 2, n_regressors)
    sigma2_ : ndarray, shape (n_times, 2)
    """

    def __init__(self, order=1, include_intercept=True, ridge_epsilon=0.0, channels=(0, 1)):
        self.order = order
        self.include_intercept = include_intercept
        self.ridge_epsilon = ridge_epsilon
        self.channels = channels

    def fit(self, X, y=None):
        X = _pair(X, self.channels)
        self.model_ = fit_svar_ensemble(
            X, ModelConfig(self.order, self.include_intercept, self.ridge_epsilon)
        )
        self.times_ = self.model_.times
        self.coef_ = self.model_.coef
        self.sigma2_ = self.model_.sigma2
        self.n_times_in_ = X.n_times
        return self

    def predict(self, X):
        """One-step-ahead predictions, shape (n_trials, 2, n_analysis_times)."""
        check_is_fitted(self, "model_")
        X = _pair(X, self.channels)
        if X.n_times != self.n_times_in_:
            raise ValueError(f"expected {self.n_times_in_} time samples, got {X.n_times}")
        lags = lag_tensor(X.data, self.order)  # (n, R, 2, p)
        n, R = lags.shape[:2]
        D = lags.reshape(n, R, 2 * self.order)
        if self.include_intercept:
            D = np.concatenate([np.ones((n, R, 1)), D], axis=2)
        pred = np.einsum("nrk,nek->ren", D, self.coef_)
        return pred

    def score(self, X, y=None):
        """Mean coefficient of determination over analysis times and channels."""
        X = _pair(X, self.channels)
        pred = self.predict(X)
        obs = X.data[:, :, self.order:]
        ss_res = ((obs - pred) ** 2).sum(axis=0)
        ss_tot = ((obs - obs.mean(axis=0)) ** 2).sum(axis=0)
        return float(np.mean(1.0 - ss_res / ss_tot))


class TransientCausality(BaseEstimator):
    """Time-resolved GC / TE / DCS / rDCS between two channels.

    Parameters
    ----------
    order : int
    measures : sequence of {"GC", "TE", "DCS", "rDCS"}
    reference_window : (start, end), optional
        Baseline epoch indices for rDCS.
    n_boot : int, default=0
        Bootstrap replicates; 0 disables the bands.
    random_state : int
    channels : (int, int)
        Input channels mapped to ``X1`` and ``X2``.

    Attributes
    ----------
    traces_ : dict
        ``{(measure, direction): CausalityTrace}``.
    model_ : SvarModel
    moments_ : LaggedMoments
    """

    def __init__(self, order=1, measures=("GC", "TE", "DCS", "rDCS"), reference_window=None,
                 include_intercept=True, ridge_epsilon=0.0, n_boot=0, random_state=0,
                 channels=(0, 1), printed_rdcs=False):
        self.order = order
        self.measures = measures
        self.reference_window = reference_window
        self.include_intercept = include_intercept
        self.ridge_epsilon = ridge_epsilon
        self.n_boot = n_boot
        self.random_state = random_state
        self.channels = channels
        self.printed_rdcs = printed_rdcs

    def fit(self, X, y=None):
        X = _pair(X, self.channels)
        config = ModelConfig(self.order, self.include_intercept, self.ridge_epsilon)
        measures = [Measure(m) for m in self.measures]
        if Measure.RDCS in measures and self.reference_window is None:
            raise ValueError("rDCS requires reference_window")
        kw = dict(measures=measures, reference_window=self.reference_window,
                  printed_rdcs=self.printed_rdcs)
        if self.n_boot:
            self.traces_ = bootstrap_causality(X, config, n_boot=self.n_boot,
                                               seed=self.random_state, **kw)
        else:
            self.traces_ = compute_measures(X, config, **kw)
        self.model_ = fit_svar_ensemble(X, config)
        self.moments_ = compute_lagged_moments(X, self.order)
        self.times_ = self.model_.times
        return self

    def trace(self, measure, direction=Direction.CH2_TO_CH1):
        if not hasattr(self, "traces_"):
            raise NotFittedError("TransientCausality is not fitted yet")
        return self.traces_[(Measure(measure), Direction(direction))]

    def values(self) -> np.ndarray:
        """All traces stacked, shape (n_measures, 2, n_times); rows follow ``measures``."""
        return np.stack([
            np.stack([self.trace(m, d).values for d in DIRECTIONS]) for m in self.measures
        ])
