"""Event detection, alignment, snapshot extraction and artifact rejection.

Operates on continuous recordings held as single-trial ensembles. Filtering
or envelope computation is the caller's job: pass the processed signal as
the detection channel.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import TimeSeriesEnsemble, check_ensemble


class DegenerateSignalError(ValueError):
    """Raised when the detection signal has zero standard deviation."""


class EmptyResultError(ValueError):
    """Raised when a stage leaves no events or epochs."""


class AlignmentMode(str, enum.Enum):
    LOCAL_PEAK = "local_peak"
    POOLED_PEAK = "pooled_peak"


@dataclass(frozen=True)
class DetectionParams:
    detection_channel: int = 0
    threshold_ratio: float = 3.0
    min_separation: int = 1
    alignment_mode: AlignmentMode = AlignmentMode.LOCAL_PEAK
    peak_search_halfwidth: int = 0
    max_events: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "alignment_mode", AlignmentMode(self.alignment_mode))
        if not self.threshold_ratio > 0:
            raise ValueError("threshold_ratio must be positive")
        if self.min_separation < 1:
            raise ValueError("min_separation must be >= 1")
        if self.peak_search_halfwidth < 0:
            raise ValueError("peak_search_halfwidth must be >= 0")
        if self.max_events is not None and self.max_events < 1:
            raise ValueError("max_events must be >= 1")


@dataclass(frozen=True)
class EpochParams:
    window_length: int
    alignment_offset: int = 0
    model_order: int = 1
    artifact_threshold: Optional[float] = None

    def __post_init__(self):
        if self.window_length < 1:
            raise ValueError("window_length must be >= 1")
        if not 0 <= self.alignment_offset < self.window_length:
            raise ValueError("alignment_offset must lie in [0, window_length)")
        if self.model_order < 1:
            raise ValueError("model_order must be >= 1")
        if self.artifact_threshold is not None and not self.artifact_threshold > 0:
            raise ValueError("artifact_threshold must be positive")


@dataclass(frozen=True)
class AlignedEvents:
    times: np.ndarray
    n_dropped: int = 0
    n_merged: int = 0


@dataclass(frozen=True)
class Snapshots:
    epochs: TimeSeriesEnsemble
    event_times: np.ndarray
    n_dropped: int = 0


@dataclass(frozen=True)
class Rejection:
    epochs: TimeSeriesEnsemble
    kept: np.ndarray = field(repr=False)

    @property
    def n_rejected(self) -> int:
        return int((~self.kept).sum())


def _signal(recording, channel: int) -> np.ndarray:
    recording = check_ensemble(recording)
    if recording.n_trials != 1:
        raise ValueError(
            f"continuous recording expected (1 trial), got {recording.n_trials} trials"
        )
    if not 0 <= channel < recording.n_channels:
        raise IndexError(f"detection channel {channel} not in [0, {recording.n_channels})")
    return recording.data[0, channel]


def detect_events(recording, params: DetectionParams) -> np.ndarray:
    """Upward threshold crossings of the detection signal.

    The threshold is ``threshold_ratio * std(signal)``. A crossing at ``t``
    means ``signal[t-1] < thr <= signal[t]``. Crossings within
    ``min_separation`` samples after a retained crossing are skipped.
    """
    x = _signal(recording, params.detection_channel)
    sd = x.std()
    if sd == 0:
        raise DegenerateSignalError("detection signal is constant (std = 0)")
    thr = params.threshold_ratio * sd
    above = x >= thr
    crossings = np.flatnonzero(~above[:-1] & above[1:]) + 1
    kept = []
    last = None
    for c in crossings:
        if last is None or c - last >= params.min_separation:
            kept.append(c)
            last = c
    return np.asarray(kept, dtype=np.int64)


def _pool(times: np.ndarray, gap: int):
    """Group sorted times whose consecutive differences are <= gap."""
    groups = []
    for t in times:
        if groups and t - groups[-1][-1] <= gap:
            groups[-1].append(t)
        else:
            groups.append([t])
    return groups


def _climb(x: np.ndarray, t: int, W: int):
    """Repeat the windowed argmax from ``t`` until it stops moving."""
    T = x.shape[0]
    while W <= t < T - W:
        nxt = t - W + int(np.argmax(x[t - W:t + W + 1]))
        if nxt == t:
            return t
        t = nxt
    return None


def align_events(recording, candidates, params: DetectionParams, seed: int = 0) -> AlignedEvents:
    """Move candidates onto nearby detection-signal peaks.

    ``local_peak`` takes the argmax over ``[c - W, c + W]`` and repeats from
    the new point until it is the maximum of its own window, so aligned
    times are fixed points. ``pooled_peak`` first merges candidates lying
    within ``min_separation`` of their neighbour and starts the climb from
    the argmax over ``[first - W, last + W]`` of each group. Ties go to the
    earliest index. Candidates outside ``[W, T - W)``, or whose climb leaves
    that range, are dropped and counted. With ``max_events`` set, a seeded
    uniform subsample without replacement is kept.
    """
    x = _signal(recording, params.detection_channel)
    T = x.shape[0]
    W = params.peak_search_halfwidth
    cand = np.unique(np.asarray(candidates, dtype=np.int64))
    inside = (cand >= W) & (cand < T - W)
    n_dropped = int((~inside).sum())
    cand = cand[inside]
    if cand.size == 0:
        raise EmptyResultError("no candidate events remain after boundary checks")
    if params.alignment_mode is AlignmentMode.POOLED_PEAK:
        groups = _pool(cand, params.min_separation)
        spans = [(g[0], g[-1]) for g in groups]
    else:
        spans = [(c, c) for c in cand]
    n_merged = cand.size - len(spans)
    aligned = []
    for lo, hi in spans:
        t = _climb(x, lo - W + int(np.argmax(x[lo - W:hi + W + 1])), W)
        if t is None:
            n_dropped += 1
        else:
            aligned.append(t)
    if not aligned:
        raise EmptyResultError("no events remain after peak alignment")
    aligned = np.unique(np.asarray(aligned, dtype=np.int64))
    if params.max_events is not None and aligned.size > params.max_events:
        rng = np.random.default_rng(seed)
        aligned = np.sort(rng.choice(aligned, size=params.max_events, replace=False))
    return AlignedEvents(aligned, n_dropped, n_merged)


def extract_snapshots(recording, event_times, params: EpochParams) -> Snapshots:
    """Cut ``(p + L)``-sample epochs around each event.

    Epoch for event ``e`` covers absolute times
    ``[e - offset - p, e - offset + L)``; the alignment sample sits at
    index ``p + offset``. Events whose epoch would leave the recording are
    dropped and counted.
    """
    recording = check_ensemble(recording)
    if recording.n_trials != 1:
        raise ValueError("continuous recording expected (1 trial)")
    T = recording.n_times
    p, L, off = params.model_order, params.window_length, params.alignment_offset
    ev = np.asarray(event_times, dtype=np.int64)
    start = ev - off - p
    ok = (start >= 0) & (ev - off + L <= T)
    ev = ev[ok]
    if ev.size == 0:
        raise EmptyResultError("no events leave room for a full epoch")
    idx = (ev - off - p)[:, None] + np.arange(p + L)[None, :]
    data = recording.data[0][:, idx]  # (C, n, p+L)
    epochs = TimeSeriesEnsemble(
        np.moveaxis(data, 1, 0),
        sampling_rate=recording.sampling_rate,
        time_axis_offset=p + off,
        channel_names=recording.channel_names,
    )
    return Snapshots(epochs, ev, int((~ok).sum()))


def reject_artifacts(epochs, artifact_threshold: float) -> Rejection:
    """Drop epochs whose peak absolute amplitude reaches the threshold."""
    if not artifact_threshold > 0:
        raise ValueError("artifact_threshold must be positive")
    epochs = check_ensemble(epochs)
    peak = np.abs(epochs.data).max(axis=(1, 2))
    kept = peak < artifact_threshold
    if not kept.any():
        raise EmptyResultError("every epoch exceeded the artifact threshold")
    return Rejection(epochs.select_trials(np.flatnonzero(kept)), kept)
