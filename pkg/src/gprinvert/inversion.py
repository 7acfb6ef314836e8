"""Model-updating waveform inversion of layer permittivities.

A candidate pair of permittivities is scored by forward-modelling every
observation with its own pulse, aligning the simulated trace on the direct
wave, and taking the relative misfit against the measured trace. Bayesian
optimization drives the candidate towards the best match.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Mapping, Sequence

import numpy as np

from . import em_sim, signals
from .em_sim import GridSpec, Pulse, PulseKind, Scene, Trace
from .errors import DegenerateSignalError, InvalidArgumentError, InversionError
from .optimize import Dimension, OptimizationRun, SearchSpace, minimize

log = logging.getLogger(__name__)

EPS_BOUNDS = (1.0, 40.0)
DEFAULT_BUDGET = 120
EXTRA_WINDOW_PERIODS = 3.0

# Topp, Davis & Annan (1980) volumetric water content cubic
TOPP_COEFFS = (-5.3e-2, 2.92e-2, -5.5e-4, 4.3e-6)


class CompareOn(str, Enum):
    ENVELOPE = "envelope"
    RAW = "raw"


@dataclass(frozen=True)
class Observation:
    label: str
    pulse: Pulse
    trace: Trace
    weight: float = 1.0

    def __post_init__(self):
        if not self.weight > 0:
            raise InvalidArgumentError("observation weight must be positive")


def default_bounds(names: Sequence[str] = ("eps_top", "eps_soil")) -> SearchSpace:
    return SearchSpace(tuple(Dimension(n, *EPS_BOUNDS) for n in names))


@dataclass(frozen=True)
class InversionConfig:
    """Inversion setup.

    ``free_layers`` lists the layer indices whose permittivity is unknown (at
    most the two topmost); the values stored in ``scene_template`` for those
    layers are placeholders.
    """

    scene_template: Scene
    bounds: SearchSpace = field(default_factory=default_bounds)
    compare_on: CompareOn = CompareOn.ENVELOPE
    budget: int = DEFAULT_BUDGET
    seed: int = 0
    free_layers: tuple[int, ...] = (0, 1)
    grid_refine: int = 1

    def __post_init__(self):
        object.__setattr__(self, "compare_on", CompareOn(self.compare_on))
        free = tuple(self.free_layers)
        object.__setattr__(self, "free_layers", free)
        if not free or len(set(free)) != len(free) or not set(free) <= {0, 1}:
            raise InvalidArgumentError("free layers must be a non-empty subset of the two topmost")
        if max(free) >= len(self.scene_template.layers):
            raise InvalidArgumentError("free layer index exceeds the scene's layer count")
        if self.bounds.ndim != len(free):
            raise InvalidArgumentError("bounds must have one dimension per free layer")
        if np.any(self.bounds.lower < EPS_BOUNDS[0]) or np.any(self.bounds.upper > EPS_BOUNDS[1]):
            raise InvalidArgumentError(f"permittivity bounds must lie within {EPS_BOUNDS}")

    def scene_at(self, eps: Sequence[float]) -> Scene:
        layers = list(self.scene_template.layers)
        for i, value in zip(self.free_layers, eps):
            layers[i] = replace(layers[i], relative_permittivity=float(value))
        return replace(self.scene_template, layers=tuple(layers))


@dataclass
class InversionResult:
    estimated: tuple[float, ...]
    per_frequency_re: dict[str, float]
    aggregate_re: float
    run: OptimizationRun
    free_layers: tuple[int, ...] = (0, 1)

    def layer_estimate(self, index: int) -> float | None:
        if index in self.free_layers:
            return self.estimated[self.free_layers.index(index)]
        return None

    @property
    def eps_top(self) -> float | None:
        return self.layer_estimate(0)

    @property
    def eps_soil(self) -> float | None:
        return self.layer_estimate(1)


def _as_array(y) -> np.ndarray:
    return np.asarray(y.samples if isinstance(y, Trace) else y, dtype=float)


def relative_error(y, y_sim) -> float:
    """Relative waveform misfit in percent: ``100 * ||y - y_sim|| / ||y||``."""
    a, b = _as_array(y), _as_array(y_sim)
    if a.shape != b.shape:
        raise InvalidArgumentError(f"length mismatch: {a.size} vs {b.size}")
    denom = float(np.sum(a * a))
    if denom == 0.0:
        raise DegenerateSignalError("reference trace has zero energy")
    return math.sqrt(float(np.sum((a - b) ** 2)) / denom) * 100.0


def aggregate_objective(res: Mapping[str, float], weights: Mapping[str, float] | None = None) -> float:
    if not res:
        raise InvalidArgumentError("no per-frequency errors to aggregate")
    w = {k: 1.0 if weights is None else float(weights[k]) for k in res}
    if any(v <= 0 for v in w.values()):
        raise InvalidArgumentError("weights must be positive")
    return sum(w[k] * res[k] for k in res) / sum(w.values())


class _Channel:
    """One observation prepared for repeated comparison against simulations."""

    def __init__(self, obs: Observation, grid: GridSpec, compare_on: CompareOn):
        self.obs = obs
        self.grid = grid
        self.compare_on = compare_on
        self.ref_position = signals.direct_wave_position(obs.trace.samples)
        if compare_on is CompareOn.ENVELOPE:
            self.reference = signals.envelope(obs.trace).samples
        else:
            self.reference = obs.trace.samples

    def misfit(self, scene: Scene) -> float:
        sim = em_sim.run_fdtd(scene, self.obs.pulse, self.grid)
        aligned = signals.align(self.obs.trace, sim, reference_position=self.ref_position)
        if self.compare_on is CompareOn.ENVELOPE:
            aligned = signals.envelope(aligned)
        return relative_error(self.reference, aligned.samples)


class WaveformMisfit:
    """Objective mapping free permittivities to the aggregate relative error.

    Forward grids are sized for the upper permittivity bounds so that every
    candidate is solved on the same discretization.
    """

    def __init__(self, observations: Sequence[Observation], config: InversionConfig):
        self.config = config
        worst = config.scene_at(config.bounds.upper)
        channels = []
        for obs in observations:
            if not np.any(obs.trace.samples):
                log.warning("dropping observation %r: zero-energy trace", obs.label)
                continue
            grid = em_sim.build_grid(worst, obs.pulse, obs.trace.duration, refine=config.grid_refine)
            channels.append(_Channel(obs, grid, config.compare_on))
        if not channels:
            raise InversionError("all observations are degenerate")
        labels = [c.obs.label for c in channels]
        if len(set(labels)) != len(labels):
            raise InvalidArgumentError("observation labels must be unique")
        self.channels = channels
        self.weights = {c.obs.label: c.obs.weight for c in channels}
        self._cache: dict[tuple[float, ...], dict[str, float]] = {}

    def per_frequency(self, eps: Sequence[float]) -> dict[str, float]:
        key = tuple(float(v) for v in eps)
        if key not in self._cache:
            scene = self.config.scene_at(key)
            self._cache[key] = {c.obs.label: c.misfit(scene) for c in self.channels}
        return self._cache[key]

    def __call__(self, eps) -> float:
        return aggregate_objective(self.per_frequency(eps), self.weights)


def invert(observations: Sequence[Observation], config: InversionConfig) -> InversionResult:
    if not observations:
        raise InvalidArgumentError("need at least one observation")
    objective = WaveformMisfit(observations, config)
    run = minimize(objective, config.bounds, config.budget, config.seed)
    if run.failures == len(run.history):
        raise InversionError("every forward evaluation failed")
    per_freq = dict(objective.per_frequency(run.best_point))
    return InversionResult(
        estimated=tuple(run.best_point),
        per_frequency_re=per_freq,
        aggregate_re=run.best_value,
        run=run,
        free_layers=config.free_layers,
    )


@dataclass
class CalibrationResult:
    pulse: Pulse
    relative_error: float
    per_kind: dict[str, tuple[Pulse, float]]


CALIBRATION_BUDGET = 40


def calibrate_pulse(
    observed: Trace,
    known_scene: Scene,
    candidates: Sequence[PulseKind | str],
    frequency_bounds: tuple[float, float],
    *,
    budget: int = CALIBRATION_BUDGET,
    seed: int = 0,
) -> CalibrationResult:
    """Find the pulse kind, center frequency and delay that reproduce ``observed``.

    For each candidate kind a 1-D search over frequency compares raw
    waveforms after direct-wave alignment, which keeps polarity and shape
    (what separates the kinds) while removing the unknown time zero. The
    delay is recovered from the alignment shift of the best match.
    """
    kinds = [PulseKind.parse(k) for k in candidates]
    if not kinds:
        raise InvalidArgumentError("no candidate pulse kinds")
    f_lo, f_hi = map(float, frequency_bounds)
    if not 0 < f_lo < f_hi:
        raise InvalidArgumentError("frequency bounds must satisfy 0 < fmin < fmax")
    if not np.any(observed.samples):
        raise DegenerateSignalError("observed trace has zero energy")

    grid = em_sim.build_grid(known_scene, Pulse(PulseKind.GAUSSIAN, f_hi), observed.duration)
    space = SearchSpace.from_bounds(freq_hz=(f_lo, f_hi))
    ref_position = signals.direct_wave_position(observed.samples)

    def simulate(kind, f):
        return em_sim.run_fdtd(known_scene, Pulse(kind, f), grid)

    per_kind = {}
    for kind in dict.fromkeys(kinds):

        def objective(x, kind=kind):
            sim = simulate(kind, float(x[0]))
            aligned = signals.align(observed, sim, reference_position=ref_position)
            return relative_error(observed, aligned)

        run = minimize(objective, space, budget, seed)
        f = float(run.best_point[0])
        shift = signals.alignment_shift(observed, simulate(kind, f))
        pulse = Pulse(kind, f)
        delay = pulse.delay + shift * observed.dt + observed.t0
        per_kind[kind.value] = (Pulse(kind, f, delay=delay), run.best_value)

    best_kind = min(per_kind, key=lambda k: per_kind[k][1])
    pulse, re = per_kind[best_kind]
    return CalibrationResult(pulse, re, per_kind)


def permittivity_to_moisture(eps_r: float) -> float:
    """Volumetric water content from Topp's cubic, clamped to [0, 1]."""
    if not eps_r >= 1:
        raise InvalidArgumentError("relative permittivity must be >= 1")
    a0, a1, a2, a3 = TOPP_COEFFS
    theta = a0 + a1 * eps_r + a2 * eps_r**2 + a3 * eps_r**3
    return min(max(theta, 0.0), 1.0)
