import json

import numpy as np
import pytest

from pericausal.pipeline.io import write_tct
from pericausal.simulation import simulate_svar, synchrony_pitfall_scenario, unidirectional_scenario


def event_recording(n_times=80_000, p=2, spacing=350, jitter=60, seed=0):
    """Single-trial driver -> effect recording with jittered driver transients."""
    rng = np.random.default_rng(seed)
    centres = np.arange(400, n_times - 400, spacing)
    events = centres + rng.integers(-jitter, jitter, size=centres.size)
    spec = unidirectional_scenario(0.5, p, n_times, event_time=events, event_amplitude=3.0,
                                   event_width=3.0)
    return simulate_svar(spec, 1, seed + 11), events


def pitfall_ensemble(n_trials=500, seed=1):
    spec = synchrony_pitfall_scenario(1.0, 0.01, (300, 400), 3, 600)
    return simulate_svar(spec, n_trials, seed)


def write_config(directory, cfg):
    path = directory / "config.json"
    path.write_text(json.dumps(cfg), encoding="utf-8")
    return path


@pytest.fixture(scope="session")
def event_tct(tmp_path_factory):
    d = tmp_path_factory.mktemp("events")
    rec, _ = event_recording(n_times=40_000)
    write_tct(d / "rec.tct", rec)
    return d / "rec.tct"


def event_config(input_path, align_on="cause", **extra):
    cfg = {
        "input": {"path": str(input_path), "format": "tct", "sampling_rate": 1000.0},
        "roles": {"cause": 1, "effect": 0},
        "align_on": align_on,
        "detection": {"threshold_ratio": 3.0, "min_separation": 100, "peak_search_halfwidth": 10},
        "epoch": {"window_length": 150, "alignment_offset": 100},
        "model": {"order": 2},
        "measures": ["rDCS"],
        "rdcs_reference_window": [-100, -40],
        "seed": 5,
    }
    cfg.update(extra)
    return cfg
