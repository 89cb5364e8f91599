"""Event-locked causal influence between two signals.

Granger causality, transfer entropy, dynamic causal strength (DCS) and
relative DCS for time-inhomogeneous bivariate SVAR models fitted across
trials, with peri-event preprocessing and simulation utilities.
"""

__version__ = "0.1.0"

from .causality import (
    CausalityTrace,
    Direction,
    Measure,
    bootstrap_causality,
    compute_measures,
    dynamic_causal_strength,
    granger_causality,
    monte_carlo_kl,
    relative_dcs,
    transfer_entropy,
)
from .core import ModelConfig, TimeSeriesEnsemble, build_lag_embedding, validate_ensemble
from .estimation import (
    LaggedMoments,
    ReferenceStats,
    SvarModel,
    compute_lagged_moments,
    compute_reference_stats,
    fit_svar_ensemble,
)
from .estimators import EventEpocher, TimeVaryingSVAR, TransientCausality
from .events import (
    DetectionParams,
    EpochParams,
    align_events,
    detect_events,
    extract_snapshots,
    reject_artifacts,
)
from .simulation import (
    SvarSpec,
    simulate_svar,
    synchrony_pitfall_scenario,
    unidirectional_scenario,
)

__all__ = [
    "CausalityTrace",
    "DetectionParams",
    "Direction",
    "EpochParams",
    "EventEpocher",
    "LaggedMoments",
    "Measure",
    "ModelConfig",
    "ReferenceStats",
    "SvarModel",
    "SvarSpec",
    "TimeSeriesEnsemble",
    "TimeVaryingSVAR",
    "TransientCausality",
    "align_events",
    "bootstrap_causality",
    "build_lag_embedding",
    "compute_lagged_moments",
    "compute_measures",
    "compute_reference_stats",
    "detect_events",
    "dynamic_causal_strength",
    "extract_snapshots",
    "fit_svar_ensemble",
    "granger_causality",
    "monte_carlo_kl",
    "reject_artifacts",
    "relative_dcs",
    "simulate_svar",
    "synchrony_pitfall_scenario",
    "transfer_entropy",
    "unidirectional_scenario",
    "validate_ensemble",
]
