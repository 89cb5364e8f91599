"""Command-line entry point.

Exit status: 0 success, 1 invalid usage/config/input, 2 runtime failure.
Diagnostics go to stderr; data only to files.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .causality import Measure
from .core import EnsembleError, ModelConfig
from .events import align_events, detect_events
from .pipeline.config import ConfigError, load_config
from .pipeline.io import FormatError, read_tct, trace_csv, write_tct
from .pipeline.run import DIRECTION_LABELS, PipelineError, run_pipeline
from .simulation import (
    SvarSpec,
    simulate_svar,
    synchrony_pitfall_scenario,
    unidirectional_scenario,
)

log = logging.getLogger("pericausal")

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def spec_from_json(obj: dict) -> SvarSpec:
    """Explicit schedules, or ``{"scenario": "unidirectional" | "synchrony_pitfall", ...}``."""
    obj = dict(obj)
    scenario = obj.pop("scenario", None)
    if scenario is None:
        return SvarSpec.from_dict(obj)
    if scenario == "unidirectional":
        return unidirectional_scenario(**obj)
    if scenario == "synchrony_pitfall":
        return synchrony_pitfall_scenario(**obj)
    raise ValueError(f"unknown scenario {scenario!r}")


def _cmd_simulate(args) -> int:
    path = Path(args.spec)
    if not path.is_file():
        raise ConfigError(f"spec file not found: {path}")
    try:
        spec = spec_from_json(json.loads(path.read_text(encoding="utf-8")))
    except (TypeError, KeyError, ValueError) as exc:
        raise ConfigError(f"invalid spec {path}: {exc}") from exc
    ens = simulate_svar(spec, args.trials, args.seed)
    write_tct(args.out, ens)
    log.info("wrote %s with shape %s", args.out, ens.shape)
    return EXIT_OK


def _cmd_validate(args) -> int:
    cfg = load_config(args.config)
    log.info("config %s is valid (%s)", args.config, ", ".join(m.value for m in cfg.measures))
    return EXIT_OK


def _cmd_pipeline(args) -> int:
    cfg = load_config(args.config)
    res = run_pipeline(cfg)
    log.info("wrote %d trace file(s) to %s", len(res.manifest.outputs), res.output_dir)
    return EXIT_OK


def _cmd_detect(args) -> int:
    from .pipeline.io import read_timeseries

    cfg = load_config(args.config)
    if cfg.detection is None:
        raise ConfigError("detection section required", "$.detection")
    rec = read_timeseries(cfg.input_path, cfg.input_format, cfg.sampling_rate)
    cand = detect_events(rec, cfg.detection)
    aligned = align_events(rec, cand, cfg.detection, seed=cfg.seed)
    lines = ["event_index,time_seconds"]
    lines += [f"{int(t)},{float(t) / rec.sampling_rate!r}" for t in aligned.times]
    Path(args.out).write_text("\n".join(lines) + "\n", encoding="utf-8")
    log.info("%d candidates, %d aligned events", cand.size, aligned.times.size)
    return EXIT_OK


def _cmd_analyze(args) -> int:
    from .causality import bootstrap_causality, compute_measures

    ens = read_tct(args.input, args.sampling_rate)
    offset = args.offset if args.offset is not None else args.order
    ens = ens.select_channels([args.effect, args.cause]).with_offset(offset)
    window = None
    if args.reference_window is not None:
        window = tuple(offset + w for w in args.reference_window)
    measures = [Measure(m) for m in args.measures]
    config = ModelConfig(args.order)
    kw = dict(measures=measures, reference_window=window)
    if args.n_boot:
        traces = bootstrap_causality(ens, config, n_boot=args.n_boot, seed=args.seed, **kw)
    else:
        traces = compute_measures(ens, config, **kw)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for (m, d), tr in traces.items():
        (out / f"{m.value}_{DIRECTION_LABELS[d]}.csv").write_text(
            trace_csv(tr, offset, ens.sampling_rate), encoding="utf-8")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="pericausal", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="simulate an SVAR ensemble to a tct file")
    p.add_argument("--spec", required=True)
    p.add_argument("--trials", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("detect", help="detect and align events, write their times")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_detect)

    p = sub.add_parser("analyze", help="causality traces for an epoched tct file")
    p.add_argument("--input", required=True)
    p.add_argument("--order", type=int, required=True)
    p.add_argument("--measures", nargs="+", default=["GC", "TE", "DCS"],
                   choices=[m.value for m in Measure])
    p.add_argument("--offset", type=int, help="alignment index within each trial")
    p.add_argument("--reference-window", type=int, nargs=2, metavar=("START", "END"),
                   help="baseline window relative to the alignment index")
    p.add_argument("--cause", type=int, default=1)
    p.add_argument("--effect", type=int, default=0)
    p.add_argument("--sampling-rate", type=float, default=1.0)
    p.add_argument("--n-boot", type=int, default=0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=_cmd_analyze)

    p = sub.add_parser("pipeline", help="run the configured end-to-end pipeline")
    p.add_argument("--config", required=True)
    p.set_defaults(func=_cmd_pipeline)

    p = sub.add_parser("validate-config", help="check a config without running it")
    p.add_argument("--config", required=True)
    p.set_defaults(func=_cmd_validate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_INVALID
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except (ConfigError, FormatError, EnsembleError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except PipelineError as exc:
        code = EXIT_INVALID if isinstance(exc.__cause__, (FormatError, EnsembleError,
                                                          FileNotFoundError)) else EXIT_RUNTIME
        print(f"error: {exc}", file=sys.stderr)
        return code
    except Exception as exc:  # noqa: BLE001 - top-level boundary
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
