"""Readers and writers for ensembles and causality traces.

tct binary layout: ``b"TCT1"``, three little-endian uint64 dims
``(trials, channels, times)``, then ``trials * channels * times``
little-endian float64 samples in trial, channel, time order.
"""

from __future__ import annotations

import csv
import io
import struct
from pathlib import Path

import numpy as np

from ..core import TimeSeriesEnsemble, validate_ensemble

MAGIC = b"TCT1"
_HEADER = struct.Struct("<4s3Q")
TRACE_COLUMNS = ("time_index", "time_seconds", "value", "boot_mean", "boot_std")


class FormatError(ValueError):
    """Malformed input file."""


def write_tct(path, ensemble) -> None:
    data = ensemble.data if isinstance(ensemble, TimeSeriesEnsemble) else np.asarray(ensemble)
    if data.ndim != 3:
        raise ValueError("tct files hold (trials, channels, times) tensors")
    payload = np.ascontiguousarray(data, dtype="<f8").tobytes()
    Path(path).write_bytes(_HEADER.pack(MAGIC, *data.shape) + payload)


def read_tct(path, sampling_rate: float = 1.0) -> TimeSeriesEnsemble:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise FormatError(f"{path}: file too short for a tct header")
    magic, R, C, T = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}, expected {MAGIC!r}")
    expected = R * C * T * 8
    got = len(raw) - _HEADER.size
    if got != expected:
        raise FormatError(
            f"{path}: payload is {got} bytes but dims {R}x{C}x{T} need {expected}"
        )
    data = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size).reshape(R, C, T)
    return validate_ensemble(TimeSeriesEnsemble(data, sampling_rate=sampling_rate))


def read_csv(path, sampling_rate: float = 1.0) -> TimeSeriesEnsemble:
    """Header row of channel names, one row per sample; a single-trial ensemble."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise FormatError(f"{path}: empty file") from None
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise FormatError(f"{path}:{lineno}: expected {len(header)} columns, got {len(row)}")
            try:
                rows.append([float(v) for v in row])
            except ValueError as exc:
                raise FormatError(f"{path}:{lineno}: {exc}") from None
    if not rows:
        raise FormatError(f"{path}: no samples")
    data = np.asarray(rows, dtype=np.float64).T[np.newaxis]
    return validate_ensemble(
        TimeSeriesEnsemble(data, sampling_rate=sampling_rate, channel_names=tuple(header))
    )


def read_timeseries(path, fmt: str, sampling_rate: float = 1.0) -> TimeSeriesEnsemble:
    if fmt == "csv":
        return read_csv(path, sampling_rate)
    if fmt in ("tct", "tct-binary"):
        return read_tct(path, sampling_rate)
    raise FormatError(f"unknown input format {fmt!r}")


def _num(v) -> str:
    return "" if v is None else repr(float(v))


def trace_csv(trace, time_axis_offset: int, sampling_rate: float) -> str:
    """Render a trace as CSV text; floats use ``repr`` so output is exact."""
    buf = io.StringIO()
    buf.write(",".join(TRACE_COLUMNS) + "\n")
    has_boot = trace.boot_mean is not None
    for i, t in enumerate(trace.times):
        secs = (int(t) - time_axis_offset) / sampling_rate
        row = [str(int(t)), _num(secs), _num(trace.values[i]),
               _num(trace.boot_mean[i]) if has_boot else "",
               _num(trace.boot_std[i]) if has_boot else ""]
        buf.write(",".join(row) + "\n")
    return buf.getvalue()


def read_trace_csv(path) -> dict:
    """Parse a trace CSV into column arrays (empty cells become NaN)."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != TRACE_COLUMNS:
            raise FormatError(f"{path}: unexpected header {reader.fieldnames}")
        rows = list(reader)
    return {
        col: np.array([float(r[col]) if r[col] != "" else np.nan for r in rows])
        for col in TRACE_COLUMNS
    }
