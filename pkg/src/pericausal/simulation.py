"""Synthetic bivariate SVAR ensembles with known causal structure.

Channel 0 (``X1``) and channel 1 (``X2``) follow::

    X1[t] = a_t . X1_p[t] + b_t . X2_p[t] + eta1[t],  eta1 ~ N(kappa1_t, s1_t)
    X2[t] = c_t . X1_p[t] + d_t . X2_p[t] + eta2[t],  eta2 ~ N(kappa2_t, s2_t)

with lag vectors in newest-first order. ``b`` carries X2 -> X1 and ``c``
carries X1 -> X2. The scenario builders put the driver on channel 1, so the
``b`` direction is the true causal direction.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from ._rng import standard_normal_stream
from .core import TimeSeriesEnsemble


class StabilityError(ValueError):
    """Raised when a coefficient set has companion spectral radius >= 1."""

    def __init__(self, radius: float, time_index=None):
        where = "" if time_index is None else f" at t={time_index}"
        super().__init__(f"unstable coefficients{where}: spectral radius {radius:.6g} >= 1")
        self.radius = radius
        self.time_index = time_index


def _schedule(value, n_times: int, width: int, name: str) -> np.ndarray:
    arr = np.asarray(value, dtype=np.float64)
    if arr.ndim == 0:
        arr = np.full((n_times, width), float(arr))
    elif arr.ndim == 1:
        if arr.shape[0] != width:
            raise ValueError(f"{name}: expected length {width}, got {arr.shape[0]}")
        arr = np.broadcast_to(arr, (n_times, width))
    if arr.shape != (n_times, width):
        raise ValueError(f"{name}: schedule shape {arr.shape} != {(n_times, width)}")
    out = np.array(arr, dtype=np.float64)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class SvarSpec:
    """Per-time parameters of a bivariate time-inhomogeneous SVAR.

    Parameters
    ----------
    a, b, c, d : ndarray, shape (n_times, order)
        Coefficient schedules, newest lag first.
    noise_mean : ndarray, shape (n_times, 2)
        Innovation means per channel.
    noise_var : ndarray, shape (n_times, 2)
        Innovation variances per channel, strictly positive.
    burn_in : int, optional
        Samples iterated (with time-0 parameters) and discarded before the
        first output sample. Defaults to ``10 * order``.
    """

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    d: np.ndarray
    noise_mean: np.ndarray
    noise_var: np.ndarray
    burn_in: int = -1

    def __post_init__(self):
        a = np.asarray(self.a, dtype=np.float64)
        if a.ndim != 2 or a.shape[1] < 1:
            raise ValueError("coefficient schedules must have shape (n_times, order)")
        n_times, order = a.shape
        for name in ("a", "b", "c", "d"):
            object.__setattr__(self, name, _schedule(getattr(self, name), n_times, order, name))
        object.__setattr__(self, "noise_mean", _schedule(self.noise_mean, n_times, 2, "noise_mean"))
        object.__setattr__(self, "noise_var", _schedule(self.noise_var, n_times, 2, "noise_var"))
        if not np.all(np.isfinite(self.noise_var)) or np.any(self.noise_var <= 0):
            raise ValueError("innovation variances must be strictly positive")
        for name in ("a", "b", "c", "d", "noise_mean"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise ValueError(f"{name} contains non-finite values")
        burn_in = 10 * order if self.burn_in is None or self.burn_in < 0 else int(self.burn_in)
        object.__setattr__(self, "burn_in", burn_in)

    @property
    def order(self) -> int:
        return self.a.shape[1]

    @property
    def n_times(self) -> int:
        return self.a.shape[0]

    @classmethod
    def constant(cls, a, b, c, d, noise_mean=(0.0, 0.0), noise_var=(1.0, 1.0),
                 n_times: int = 100, burn_in=None) -> "SvarSpec":
        """Spec with time-invariant parameters."""
        a = np.atleast_1d(np.asarray(a, dtype=np.float64))
        sched = lambda v: np.tile(np.atleast_1d(np.asarray(v, dtype=np.float64)), (n_times, 1))
        return cls(sched(a), sched(b), sched(c), sched(d), sched(noise_mean),
                   sched(noise_var), -1 if burn_in is None else burn_in)

    def is_constant(self) -> bool:
        return all(np.all(getattr(self, n) == getattr(self, n)[0]) for n in ("a", "b", "c", "d"))

    def spectral_radius(self, t: int = 0) -> float:
        return spectral_radius(self.a[t], self.b[t], self.c[t], self.d[t])

    def to_dict(self) -> dict:
        return {
            "order": self.order,
            "n_times": self.n_times,
            "burn_in": self.burn_in,
            **{k: getattr(self, k).tolist() for k in ("a", "b", "c", "d", "noise_mean", "noise_var")},
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "SvarSpec":
        """Build a spec from its dict form.

        Each schedule may be given per time (``n_times`` rows) or once, in
        which case it is repeated; ``n_times`` is then required.
        """
        n_times = obj.get("n_times")
        order = obj.get("order")
        a = np.asarray(obj["a"], dtype=np.float64)
        if a.ndim == 2:
            n_times = a.shape[0] if n_times is None else n_times
        if n_times is None:
            raise ValueError("n_times is required when schedules are constant")
        order = order if order is not None else (a.shape[-1] if a.ndim else 1)
        sched = lambda v, w, name: _schedule(v, int(n_times), w, name)
        burn_in = obj.get("burn_in")
        return cls(
            *(sched(obj[k], order, k) for k in ("a", "b", "c", "d")),
            noise_mean=sched(obj.get("noise_mean", 0.0), 2, "noise_mean"),
            noise_var=sched(obj.get("noise_var", 1.0), 2, "noise_var"),
            burn_in=-1 if burn_in is None else int(burn_in),
        )


def companion_matrix(a, b, c, d) -> np.ndarray:
    """Companion matrix of the bivariate VAR(p) for state ``[X1 lags, X2 lags]``."""
    a, b, c, d = (np.atleast_1d(np.asarray(v, dtype=np.float64)) for v in (a, b, c, d))
    p = a.shape[0]
    A = np.zeros((2 * p, 2 * p))
    A[0, :p], A[0, p:] = a, b
    A[p, :p], A[p, p:] = c, d
    for i in range(1, p):
        A[i, i - 1] = 1.0
        A[p + i, p + i - 1] = 1.0
    return A


def spectral_radius(a, b, c, d) -> float:
    return float(np.max(np.abs(np.linalg.eigvals(companion_matrix(a, b, c, d)))))


def check_stability(spec: SvarSpec) -> float:
    """Largest companion spectral radius over time.

    Binding (raises) for constant specs; time-varying specs only warn, since
    frozen-coefficient instability at one time does not imply divergence.
    """
    if spec.is_constant():
        radius = spec.spectral_radius(0)
        if radius >= 1:
            raise StabilityError(radius)
        return radius
    radii = np.array([spec.spectral_radius(t) for t in range(spec.n_times)])
    worst = int(np.argmax(radii))
    if radii[worst] >= 1:
        warnings.warn(str(StabilityError(radii[worst], worst)), RuntimeWarning, stacklevel=2)
    return float(radii[worst])


def simulate_svar(spec: SvarSpec, n_trials: int, seed: int, *, trial_ids=None,
                  sampling_rate: float = 1.0) -> TimeSeriesEnsemble:
    """Draw an ensemble of independent trials from ``spec``.

    Each trial and channel owns a counter-based normal stream keyed by
    ``(seed, trial_id, channel)``, so the output is bit-reproducible and a
    trial's samples do not depend on which other trials are requested.

    Parameters
    ----------
    spec : SvarSpec
    n_trials : int
    seed : int
    trial_ids : sequence of int, optional
        Stream keys for the trials, ``range(n_trials)`` by default.

    Returns
    -------
    TimeSeriesEnsemble
        Shape ``(n_trials, 2, spec.n_times)``.
    """
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    trial_ids = np.arange(n_trials) if trial_ids is None else np.asarray(trial_ids)
    if trial_ids.shape != (n_trials,):
        raise ValueError("trial_ids must have one entry per trial")
    check_stability(spec)

    p, n_out, burn = spec.order, spec.n_times, spec.burn_in
    n_total = p + burn + n_out
    z = np.empty((n_trials, 2, n_total))
    for i, tid in enumerate(trial_ids):
        for ch in range(2):
            z[i, ch] = standard_normal_stream(seed, (tid, ch), n_total)

    # parameter index per generated sample; warm-up reuses time 0
    pidx = np.concatenate([np.zeros(p + burn, dtype=int), np.arange(n_out)])
    mean = spec.noise_mean[pidx]
    sd = np.sqrt(spec.noise_var[pidx])

    x = np.empty((n_trials, 2, n_total))
    x[:, :, :p] = mean[:p].T + sd[:p].T * z[:, :, :p]
    for k in range(p, n_total):
        j = pidx[k]
        lag1 = x[:, 0, k - p:k][:, ::-1]
        lag2 = x[:, 1, k - p:k][:, ::-1]
        x[:, 0, k] = lag1 @ spec.a[j] + lag2 @ spec.b[j] + (mean[k, 0] + sd[k, 0] * z[:, 0, k])
        x[:, 1, k] = lag1 @ spec.c[j] + lag2 @ spec.d[j] + (mean[k, 1] + sd[k, 1] * z[:, 1, k])
    return TimeSeriesEnsemble(x[:, :, p + burn:], sampling_rate=sampling_rate)


def _pad(coeffs, p: int) -> np.ndarray:
    out = np.zeros(p)
    coeffs = np.asarray(coeffs, dtype=np.float64)[:p]
    out[: coeffs.shape[0]] = coeffs
    return out


def unidirectional_scenario(coupling: float, p: int, T: int, *,
                            effect_ar=(0.5, -0.2), driver_ar=(0.6, -0.2),
                            noise_var=(1.0, 1.0), burn_in=None,
                            event_time=None, event_amplitude: float = 0.0,
                            event_width: float = 5.0) -> SvarSpec:
    """Driver (channel 1) -> effect (channel 0) with no feedback.

    ``b`` holds ``coupling`` at lag 1 and ``c`` is zero. Own dynamics use the
    first ``p`` entries of ``effect_ar`` and ``driver_ar``. If ``event_time``
    is given (one index or a sequence), the driver's innovation mean carries
    a Gaussian bump of height ``event_amplitude`` and width ``event_width``
    samples centred on each event, which gives a deterministic event-locked
    component. A sequence of events yields a continuous recording with
    repeated transients.
    """
    if p < 1 or T < 1:
        raise ValueError("p and T must be positive")
    a, d = _pad(effect_ar, p), _pad(driver_ar, p)
    b = np.zeros(p)
    b[0] = coupling
    c = np.zeros(p)
    radius = spectral_radius(a, b, c, d)
    if radius >= 1:
        raise StabilityError(radius)
    mean = np.zeros((T, 2))
    if event_time is not None:
        reach = int(np.ceil(8 * event_width))
        for e in np.atleast_1d(event_time):
            t = np.arange(max(0, int(e) - reach), min(T, int(e) + reach + 1))
            mean[t, 1] += event_amplitude * np.exp(-0.5 * ((t - e) / event_width) ** 2)
    spec = SvarSpec.constant(a, b, c, d, noise_var=noise_var, n_times=T, burn_in=burn_in)
    return SvarSpec(spec.a, spec.b, spec.c, spec.d, mean, spec.noise_var, spec.burn_in)


def synchrony_pitfall_scenario(base_var: float, dip_var: float, dip_window, p: int, T: int, *,
                               coupling: float = 1.0, effect_var: float = 0.1,
                               radius: float = 0.99, frequency: float = 0.05,
                               effect_ar=(0.3, -0.1), burn_in: int = 2000) -> SvarSpec:
    """Coupled oscillators whose driver innovation variance dips transiently.

    The driver (channel 1) is a damped AR(2) oscillator with pole radius
    ``radius`` and ``frequency`` cycles per sample; it feeds the effect
    (channel 0) at lag 1 with weight ``coupling`` throughout. Inside
    ``dip_window = [start, end)`` the driver innovation variance is
    ``dip_var``, elsewhere ``base_var``. The oscillation carries its energy
    through the dip, so the driver's variance stays high while its new
    innovations shrink: the two signals lock together. ``dip_var == base_var``
    gives the constant-variance control.
    """
    if p < 2:
        raise ValueError("the oscillator driver needs order p >= 2")
    if not 0 < dip_var <= base_var:
        raise ValueError("need 0 < dip_var <= base_var")
    start, end = (int(v) for v in dip_window)
    if not 0 <= start < end <= T:
        raise ValueError(f"dip window [{start}, {end}) outside [0, {T})")
    theta = 2.0 * np.pi * frequency
    d = _pad([2.0 * radius * np.cos(theta), -radius ** 2], p)
    a = _pad(effect_ar, p)
    b = np.zeros(p)
    b[0] = coupling
    c = np.zeros(p)
    rad = spectral_radius(a, b, c, d)
    if rad >= 1:
        raise StabilityError(rad)
    var = np.empty((T, 2))
    var[:, 0] = effect_var
    var[:, 1] = base_var
    var[start:end, 1] = dip_var
    spec = SvarSpec.constant(a, b, c, d, n_times=T, burn_in=burn_in)
    return SvarSpec(spec.a, spec.b, spec.c, spec.d, np.zeros((T, 2)), var, spec.burn_in)
