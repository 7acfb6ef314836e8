"""Synthetic benchmark suite and the frequency/depth/permittivity sweep.

The default suite crosses three top-layer permittivities with six soil
permittivities (18 cases) in a 0.20 m + 0.20 m two-layer column. Each case is
observed by a low- and a high-frequency radar, and every case is inverted
with the low data only, the high data only, and both jointly.
"""

from __future__ import annotations

import hashlib
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import em_sim, signals
from .analytics import MetricsReport, compute_metrics
from .em_sim import MaterialLayer, Pulse, PulseKind, Scene, Trace
from .inversion import EPS_BOUNDS, InversionConfig, Observation, invert

log = logging.getLogger(__name__)

TOP_EPS = (2.0, 4.0, 6.0)
SOIL_EPS = (5.0, 10.0, 15.0, 20.0, 25.0, 30.0)
LAYER_THICKNESS = 0.20
TOP_SIGMA = 0.001
SOIL_SIGMA_PER_EPS = 0.002
SUITE_ANTENNA_HEIGHT = 0.0
SUITE_BASEMENT_EPS = 1.0
LOW_FREQUENCY = 0.7e9
HIGH_FREQUENCY = 1.578e9
OBSERVATION_REFINE = 2
LAYERS = ("top", "soil")


class Mode(str, Enum):
    LOW_ONLY = "low"
    HIGH_ONLY = "high"
    DUAL = "dual"

    @property
    def labels(self) -> tuple[str, ...]:
        return {"low": ("low",), "high": ("high",), "dual": ("low", "high")}[self.value]


ALL_MODES = (Mode.LOW_ONLY, Mode.HIGH_ONLY, Mode.DUAL)


def two_layer_scene(
    eps_top: float,
    eps_soil: float,
    *,
    antenna_height: float = SUITE_ANTENNA_HEIGHT,
    basement: float = SUITE_BASEMENT_EPS,
    soil_sigma: float | None = None,
) -> Scene:
    if soil_sigma is None:
        soil_sigma = SOIL_SIGMA_PER_EPS * eps_soil
    return Scene(
        antenna_height,
        (
            MaterialLayer(LAYER_THICKNESS, eps_top, TOP_SIGMA),
            MaterialLayer(LAYER_THICKNESS, eps_soil, soil_sigma),
        ),
        basement,
    )


@dataclass(frozen=True)
class BenchmarkCase:
    case_id: str
    scene: Scene

    @property
    def eps_top(self) -> float:
        return self.scene.layers[0].relative_permittivity

    @property
    def eps_soil(self) -> float:
        return self.scene.layers[1].relative_permittivity


@dataclass(frozen=True)
class BenchmarkSuite:
    cases: tuple[BenchmarkCase, ...]
    pulses: Mapping[str, Pulse]
    noise_snr_db: float | None = None
    seed: int = 0

    def __post_init__(self):
        ids = [c.case_id for c in self.cases]
        if len(set(ids)) != len(ids):
            raise ValueError("case ids must be unique")

    def bound_scene(self, case: BenchmarkCase) -> Scene:
        """The case geometry at the upper permittivity bounds (grid sizing)."""
        return case.scene.with_permittivities([EPS_BOUNDS[1], EPS_BOUNDS[1]])

    def record_window(self, case: BenchmarkCase) -> float:
        """Covers the soil-bottom echo at the largest admissible permittivities."""
        slowest = max(self.pulses.values(), key=lambda p: p.period)
        return em_sim.required_record_window(self.bound_scene(case), slowest)


def default_suite(seed: int = 0, noise_snr_db: float | None = None) -> BenchmarkSuite:
    cases = tuple(
        BenchmarkCase(f"t{top:g}_s{soil:02g}", two_layer_scene(top, soil))
        for top in TOP_EPS
        for soil in SOIL_EPS
    )
    pulses = {
        "low": Pulse(PulseKind.GAUSSIAN, LOW_FREQUENCY),
        "high": Pulse(PulseKind.GAUSSIAN, HIGH_FREQUENCY),
    }
    return BenchmarkSuite(cases, pulses, noise_snr_db, seed)


def noise_seed(suite_seed: int, case_id: str, label: str) -> int:
    digest = hashlib.sha256(f"{suite_seed}:{case_id}:{label}".encode()).digest()
    return int.from_bytes(digest[:8], "little")


@dataclass
class Dataset:
    """Observed traces per case and frequency label, plus their suite."""

    suite: BenchmarkSuite
    traces: dict[str, dict[str, Trace]]
    errors: dict[str, str] = field(default_factory=dict)

    def observations(self, case_id: str, mode: Mode) -> list[Observation]:
        traces = self.traces[case_id]
        return [Observation(label, self.suite.pulses[label], traces[label]) for label in mode.labels]


def observe_case(suite: BenchmarkSuite, case: BenchmarkCase) -> dict[str, Trace]:
    window = suite.record_window(case)
    out = {}
    for label, pulse in suite.pulses.items():
        grid = em_sim.build_grid(suite.bound_scene(case), pulse, window, refine=OBSERVATION_REFINE)
        trace = em_sim.run_fdtd(case.scene, pulse, grid)
        out[label] = signals.add_noise(trace, suite.noise_snr_db, noise_seed(suite.seed, case.case_id, label))
    return out


def generate_observations(suite: BenchmarkSuite) -> Dataset:
    """Forward-solve every case on a grid twice as fine as the inversion's."""
    traces, errors = {}, {}
    for case in suite.cases:
        try:
            traces[case.case_id] = observe_case(suite, case)
        except Exception as exc:  # noqa: BLE001 - a failing case must not abort the suite
            log.warning("case %s failed: %s", case.case_id, exc)
            errors[case.case_id] = str(exc)
    return Dataset(suite, traces, errors)


@dataclass(frozen=True)
class CaseEstimate:
    case_id: str
    mode: Mode
    true_top: float
    true_soil: float
    est_top: float | None
    est_soil: float | None
    aggregate_re: float | None
    status: str = "ok"


@dataclass
class BenchmarkReport:
    rows: list[CaseEstimate]
    metrics: dict[tuple[Mode, str], MetricsReport | None]
    missing: dict[Mode, int]

    def rows_for(self, mode: Mode) -> list[CaseEstimate]:
        return [r for r in self.rows if r.mode is Mode(mode)]

    def metric(self, mode: Mode | str, layer: str) -> MetricsReport | None:
        return self.metrics[(Mode(mode), layer)]


def _invert_case(args) -> CaseEstimate:
    dataset, case, mode, budget, seed = args
    if case.case_id not in dataset.traces:
        return CaseEstimate(case.case_id, mode, case.eps_top, case.eps_soil, None, None, None,
                            f"failed: {dataset.errors.get(case.case_id, 'no data')}")
    config = InversionConfig(scene_template=case.scene, budget=budget, seed=seed)
    try:
        result = invert(dataset.observations(case.case_id, mode), config)
    except Exception as exc:  # noqa: BLE001 - recorded as a missing entry
        log.warning("inversion of %s (%s) failed: %s", case.case_id, mode.value, exc)
        return CaseEstimate(case.case_id, mode, case.eps_top, case.eps_soil, None, None, None, f"failed: {exc}")
    return CaseEstimate(
        case.case_id, mode, case.eps_top, case.eps_soil,
        result.eps_top, result.eps_soil, result.aggregate_re,
    )


def run_benchmark(
    dataset: Dataset,
    modes: Mode | str | Iterable[Mode | str] = ALL_MODES,
    budget: int = 120,
    seed: int = 0,
    *,
    workers: int | None = None,
) -> BenchmarkReport:
    """Invert every case for each mode and score the estimates per layer.

    Rows are ordered by mode, then by the suite's case order, regardless of
    ``workers``.
    """
    if isinstance(modes, (str, Mode)):
        modes = [modes]
    modes = [Mode(m) for m in modes]
    jobs = [(dataset, case, mode, budget, seed) for mode in modes for case in dataset.suite.cases]
    if workers and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_invert_case, jobs))
    else:
        rows = [_invert_case(job) for job in jobs]

    metrics, missing = {}, {}
    for mode in modes:
        ok = [r for r in rows if r.mode is mode and r.status == "ok"]
        missing[mode] = sum(1 for r in rows if r.mode is mode) - len(ok)
        if missing[mode]:
            log.warning("%d case(s) missing from mode %s", missing[mode], mode.value)
        for layer in LAYERS:
            pred = [getattr(r, f"est_{layer}") for r in ok]
            truth = [getattr(r, f"true_{layer}") for r in ok]
            metrics[(mode, layer)] = compute_metrics(pred, truth) if len(ok) >= 2 else None
    return BenchmarkReport(rows, metrics, missing)


# -- resolution sweep ---------------------------------------------------------

SWEEP_FREQUENCIES = (0.7e9, 2.0e9)
SWEEP_DEPTHS = (0.05, 0.10, 0.20, 0.30)
SWEEP_EPS = (3.0, 9.0, 20.0)
#: wet ground below the swept layer; contrasts with every swept permittivity
SWEEP_BASEMENT_EPS = 30.0
SWEEP_TAIL = 2e-9


@dataclass(frozen=True)
class SweepCell:
    frequency: float
    depth: float
    eps: float
    trace: Trace
    envelope: Trace
    peaks: signals.PeakSet

    @property
    def peak_count(self) -> int:
        return len(self.peaks)

    @property
    def separation(self) -> float:
        return self.peaks.separation()


def resolution_sweep(
    frequencies: Sequence[float] = SWEEP_FREQUENCIES,
    depths: Sequence[float] = SWEEP_DEPTHS,
    permittivities: Sequence[float] = SWEEP_EPS,
    *,
    kind: PulseKind | str = PulseKind.GAUSSIAN,
    basement: float = SWEEP_BASEMENT_EPS,
    prominence_fraction: float = signals.DEFAULT_PROMINENCE,
) -> list[SweepCell]:
    """Single-layer envelopes over a (frequency, depth, permittivity) grid.

    The antenna sits on the layer surface, so the direct wave and the
    surface reflection coincide and the second envelope peak (if resolved)
    is the echo from the layer bottom.
    """
    if any(d <= 0 for d in depths) or any(e < 1 for e in permittivities):
        raise ValueError("depths must be positive and permittivities >= 1")
    cells = []
    for f in frequencies:
        pulse = Pulse(kind, float(f))
        for d in depths:
            for eps in permittivities:
                scene = Scene(0.0, (MaterialLayer(float(d), float(eps)),), basement)
                window = em_sim.required_record_window(scene, pulse) + SWEEP_TAIL
                trace = em_sim.run_fdtd(scene, pulse, em_sim.build_grid(scene, pulse, window))
                env = signals.envelope(trace)
                peaks = signals.find_peaks(env, prominence_fraction)
                cells.append(SweepCell(float(f), float(d), float(eps), trace, env, peaks))
    return cells
