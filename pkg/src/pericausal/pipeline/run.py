"""End-to-end run: load, detect, align, epoch, reject, measure, write."""

from __future__ import annotations

import json
import logging
import shutil
import tempfile
import time
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import __version__
from ..causality import Direction, bootstrap_causality, compute_measures
from ..events import align_events, detect_events, extract_snapshots, reject_artifacts
from .config import PipelineConfig
from .io import read_timeseries, trace_csv

log = logging.getLogger(__name__)

DIRECTION_LABELS = {
    Direction.CH2_TO_CH1: "cause_to_effect",
    Direction.CH1_TO_CH2: "effect_to_cause",
}
MANIFEST = "manifest.json"


class PipelineError(RuntimeError):
    """A stage failed; ``stage`` names it and ``__cause__`` holds the error."""

    def __init__(self, stage: str, exc: BaseException):
        super().__init__(f"[{stage}] {type(exc).__name__}: {exc}")
        self.stage = stage


@dataclass
class RunManifest:
    config: dict
    version: str
    counts: dict
    warnings: list = field(default_factory=list)
    outputs: list = field(default_factory=list)
    duration_seconds: float = 0.0

    def to_json(self) -> str:
        # wall-clock time is left out so reruns are byte-identical
        obj = {"config": self.config, "version": self.version, "counts": self.counts,
               "warnings": self.warnings, "outputs": self.outputs}
        return json.dumps(obj, indent=2, sort_keys=True, default=str) + "\n"


@dataclass
class PipelineResult:
    traces: dict
    manifest: RunManifest
    epochs: object
    output_dir: Path


class _Stage:
    def __init__(self, name: str, sink: list):
        self.name, self.sink = name, sink

    def __enter__(self):
        self._cm = warnings.catch_warnings(record=True)
        self._caught = self._cm.__enter__()
        warnings.simplefilter("always")
        log.debug("stage %s", self.name)
        return self

    def __exit__(self, exc_type, exc, tb):
        self._cm.__exit__(None, None, None)
        for w in self._caught:
            msg = f"{self.name}: {w.message}"
            if msg not in self.sink:
                self.sink.append(msg)
        if exc is not None and not isinstance(exc, PipelineError):
            raise PipelineError(self.name, exc) from exc
        return False


def _prepare_output(target: Path) -> Path:
    if target.exists():
        if not target.is_dir():
            raise FileExistsError(f"output path {target} exists and is not a directory")
        if any(target.iterdir()) and not (target / MANIFEST).exists():
            raise FileExistsError(f"refusing to overwrite non-pipeline directory {target}")
    target.parent.mkdir(parents=True, exist_ok=True)
    return Path(tempfile.mkdtemp(prefix=f".{target.name}.", dir=target.parent))


def run_pipeline(config: PipelineConfig) -> PipelineResult:
    """Execute every configured stage and write traces plus a manifest.

    Outputs are staged in a temporary sibling directory and moved into place
    only after everything succeeded, so a failed run leaves nothing behind.
    """
    started = time.perf_counter()
    notes: list = []
    counts: dict = {}
    with _Stage("load", notes):
        rec = read_timeseries(config.input_path, config.input_format, config.sampling_rate)
        for role, ch in (("cause", config.cause_channel), ("effect", config.effect_channel)):
            if ch >= rec.n_channels:
                raise IndexError(f"{role} channel {ch} not in input with {rec.n_channels} channels")

    if config.layout == "continuous":
        with _Stage("detect", notes):
            candidates = detect_events(rec, config.detection)
            counts["events_detected"] = int(candidates.size)
            if candidates.size == 0:
                raise ValueError("no threshold crossings found")
        with _Stage("align", notes):
            aligned = align_events(rec, candidates, config.detection, seed=config.seed)
            counts["events_aligned"] = int(aligned.times.size)
            counts["events_dropped_at_boundary"] = aligned.n_dropped
        with _Stage("extract", notes):
            pair = rec.select_channels([config.effect_channel, config.cause_channel])
            snaps = extract_snapshots(pair, aligned.times, config.epoch)
            epochs = snaps.epochs
            counts["epochs_extracted"] = epochs.n_trials
            counts["epochs_dropped_at_boundary"] = snaps.n_dropped
    else:
        with _Stage("extract", notes):
            offset = config.epoch.alignment_offset + config.model.order
            if offset >= rec.n_times:
                raise ValueError("alignment offset beyond epoch length")
            epochs = rec.select_channels([config.effect_channel, config.cause_channel]).with_offset(offset)
            for key in ("events_detected", "events_aligned", "epochs_extracted"):
                counts[key] = epochs.n_trials
            counts["events_dropped_at_boundary"] = 0
            counts["epochs_dropped_at_boundary"] = 0

    with _Stage("reject", notes):
        if config.epoch.artifact_threshold is not None:
            rej = reject_artifacts(epochs, config.epoch.artifact_threshold)
            epochs = rej.epochs
            counts["epochs_rejected"] = rej.n_rejected
        else:
            counts["epochs_rejected"] = 0
        counts["epochs_surviving"] = epochs.n_trials

    offset = epochs.time_axis_offset
    window = None
    if config.rdcs_reference_window is not None:
        window = tuple(offset + w for w in config.rdcs_reference_window)
    kw = dict(measures=config.measures, reference_window=window,
              printed_rdcs=config.printed_rdcs)
    if config.n_boot:
        with _Stage("bootstrap", notes):
            traces = bootstrap_causality(epochs, config.model, n_boot=config.n_boot,
                                         seed=config.boot_seed, **kw)
    else:
        with _Stage("measures", notes):
            traces = compute_measures(epochs, config.model, **kw)
    counts["trials_fitted"] = epochs.n_trials

    manifest = RunManifest(config.raw, __version__, counts, notes)
    with _Stage("write", notes):
        target = Path(config.output_dir)
        tmp = _prepare_output(target)
        try:
            ordered = sorted(traces.items(), key=lambda kv: (kv[0][0].value, kv[0][1].value))
            for (measure, direction), tr in ordered:
                name = f"{measure.value}_{DIRECTION_LABELS[direction]}.csv"
                (tmp / name).write_text(trace_csv(tr, offset, epochs.sampling_rate), encoding="utf-8")
                manifest.outputs.append({"file": name, "measure": measure.value,
                                         "direction": direction.value,
                                         "n_trials": tr.n_trials, "n_boot": tr.n_boot})
            (tmp / MANIFEST).write_text(manifest.to_json(), encoding="utf-8")
            if target.exists():
                shutil.rmtree(target)
            tmp.rename(target)
        except BaseException:
            shutil.rmtree(tmp, ignore_errors=True)
            raise
    manifest.duration_seconds = time.perf_counter() - started
    log.info("pipeline finished in %.2f s; %d epochs analysed", manifest.duration_seconds,
             counts["epochs_surviving"])
    return PipelineResult(traces, manifest, epochs, target)
