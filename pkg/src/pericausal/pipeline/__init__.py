from .config import CONFIG_SCHEMA, ConfigError, PipelineConfig, load_config, parse_config
from .io import FormatError, read_csv, read_tct, read_timeseries, read_trace_csv, write_tct
from .run import PipelineError, PipelineResult, RunManifest, run_pipeline

__all__ = [
    "CONFIG_SCHEMA",
    "ConfigError",
    "FormatError",
    "PipelineConfig",
    "PipelineError",
    "PipelineResult",
    "RunManifest",
    "load_config",
    "parse_config",
    "read_csv",
    "read_tct",
    "read_timeseries",
    "read_trace_csv",
    "run_pipeline",
    "write_tct",
]
