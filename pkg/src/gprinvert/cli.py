"""Command-line front end.

Exit codes: 0 success, 2 usage or configuration error, 3 numerical failure,
4 inversion failure.
"""

from __future__ import annotations

import argparse
import io
import json
import logging
import math
import sys
from pathlib import Path
from typing import Sequence

from . import em_sim, harness, signals
from .em_sim import C0, GridSpec, Pulse, PulseKind
from .errors import (
    ConditioningError,
    InvalidArgumentError,
    InversionError,
    NumericalFailureError,
    StabilityError,
)
from .inversion import (
    EPS_BOUNDS,
    CALIBRATION_BUDGET,
    CompareOn,
    InversionConfig,
    Observation,
    SearchSpace,
    calibrate_pulse,
    invert,
)
from .io import (
    dump_json,
    fmt,
    inversion_result_to_dict,
    load_scene,
    pulse_from_dict,
    pulse_to_dict,
    read_trace,
    scene_from_dict,
    scene_to_dict,
    write_atomic,
    write_trace,
)
from .optimize import Dimension
from .svg import Panel, Series, render

log = logging.getLogger("gprinvert")

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NUMERICAL = 3
EXIT_INVERSION = 4

LAYER_NAMES = ("eps_top", "eps_soil")


class UsageError(InvalidArgumentError):
    pass


# -- argument helpers ----------------------------------------------------------------


def _float_list(text: str) -> list[float]:
    try:
        values = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None
    if not values:
        raise argparse.ArgumentTypeError("empty list")
    return values


def _snr(text: str) -> float | None:
    if text.lower() in ("none", "inf"):
        return None
    return float(text)


def _kind_list(text: str) -> list[PulseKind]:
    try:
        return [PulseKind.parse(k.strip()) for k in text.split(",") if k.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _parse_obs(text: str) -> dict[str, str]:
    """``low=FILE,high=FILE`` (a bare FILE is accepted where a single trace is expected)."""
    out = {}
    for item in text.split(","):
        if not item:
            continue
        label, sep, path = item.partition("=")
        if not sep:
            raise UsageError(f"observation {item!r} must look like LABEL=FILE")
        if label in out:
            raise UsageError(f"observation label {label!r} given twice")
        out[label.strip()] = path.strip()
    return out


# -- dataset directory ---------------------------------------------------------------

SUITE_FILE = "suite.json"


def write_dataset(dataset: harness.Dataset, root: str | Path) -> None:
    """``root/suite.json`` plus ``root/<case_id>/<label>.csv`` per observed trace."""
    root = Path(root)
    suite = dataset.suite
    meta = {
        "seed": suite.seed,
        "noise_snr_db": suite.noise_snr_db,
        "pulses": {label: pulse_to_dict(p) for label, p in suite.pulses.items()},
        "cases": [{"case_id": c.case_id, "scene": scene_to_dict(c.scene)} for c in suite.cases],
        "errors": dict(sorted(dataset.errors.items())),
    }
    for case_id, traces in dataset.traces.items():
        for label, trace in traces.items():
            write_trace(root / case_id / f"{label}.csv", trace)
    write_atomic(root / SUITE_FILE, dump_json(meta))


def read_dataset(root: str | Path) -> harness.Dataset:
    root = Path(root)
    try:
        meta = json.loads((root / SUITE_FILE).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read dataset {root}: {exc}") from None
    cases = tuple(harness.BenchmarkCase(c["case_id"], scene_from_dict(c["scene"])[0]) for c in meta["cases"])
    pulses = {label: pulse_from_dict(p) for label, p in meta["pulses"].items()}
    suite = harness.BenchmarkSuite(cases, pulses, meta.get("noise_snr_db"), int(meta.get("seed", 0)))
    errors = dict(meta.get("errors", {}))
    traces = {}
    for case in cases:
        if case.case_id in errors:
            continue
        traces[case.case_id] = {label: read_trace(root / case.case_id / f"{label}.csv") for label in pulses}
    return harness.Dataset(suite, traces, errors)


# -- commands ------------------------------------------------------------------------


def _require_known(scene, unknown, what: str) -> None:
    if unknown:
        raise UsageError(f"{what} needs a fully known scene (unknown eps_r in layer(s) {list(unknown)})")


def cmd_simulate(args) -> int:
    scene, unknown = load_scene(args.scene)
    _require_known(scene, unknown, "simulate")
    pulse = Pulse(args.pulse_kind, args.freq_hz, args.amplitude, args.delay_s)
    window = args.window_s if args.window_s is not None else em_sim.required_record_window(scene, pulse)
    grid = em_sim.build_grid(scene, pulse, window, refine=args.refine)
    if args.dz is not None or args.dt is not None:
        dz = args.dz if args.dz is not None else grid.dz
        dt = args.dt if args.dt is not None else em_sim.MAX_COURANT * dz / C0
        if not (dz > 0 and dt > 0):
            raise UsageError("grid overrides must be positive")
        grid = GridSpec(
            dz=dz,
            dt=dt,
            cell_count=2 * em_sim.PAD_CELLS + math.ceil(scene.total_depth / dz) + 1,
            step_count=math.ceil(window / dt - 1e-9),
        )
    trace = em_sim.run_fdtd(scene, pulse, grid)
    write_trace(args.out, trace)
    return EXIT_OK


def cmd_invert(args) -> int:
    scene, unknown = load_scene(args.scene)
    if not unknown:
        raise UsageError("invert needs a scene with at least one 'unknown' eps_r")
    files = _parse_obs(args.obs)
    labels = harness.Mode(args.mode).labels
    missing = [label for label in labels if label not in files]
    if missing:
        raise UsageError(f"mode {args.mode} needs observation(s): {', '.join(missing)}")
    pulses = {
        "low": Pulse(args.low_kind, args.low_freq_hz),
        "high": Pulse(args.high_kind, args.high_freq_hz),
    }
    observations = [Observation(label, pulses[label], read_trace(files[label])) for label in labels]
    bounds = SearchSpace(tuple(Dimension(LAYER_NAMES[i], *EPS_BOUNDS) for i in unknown))
    config = InversionConfig(
        scene_template=scene,
        bounds=bounds,
        compare_on=CompareOn(args.compare),
        budget=args.budget,
        seed=args.seed,
        free_layers=unknown,
    )
    result = invert(observations, config)
    write_atomic(args.out, dump_json(inversion_result_to_dict(result, scene, args.mode)))
    return EXIT_OK


def cmd_calibrate(args) -> int:
    scene, unknown = load_scene(args.scene)
    _require_known(scene, unknown, "calibrate")
    if not args.fmin < args.fmax:
        raise UsageError("--fmin must be smaller than --fmax")
    observed = read_trace(args.obs)
    result = calibrate_pulse(observed, scene, args.kinds, (args.fmin, args.fmax), budget=args.budget, seed=args.seed)
    out = {
        "kind": result.pulse.kind.value,
        "freq_hz": result.pulse.center_frequency,
        "delay_s": result.pulse.delay,
        "re_percent": result.relative_error,
        "per_kind": {
            kind: {"freq_hz": p.center_frequency, "delay_s": p.delay, "re_percent": re}
            for kind, (p, re) in result.per_kind.items()
        },
    }
    text = dump_json(out)
    if args.out:
        write_atomic(args.out, text)
    sys.stdout.write(text)
    return EXIT_OK


def _cell(x) -> str:
    return "" if x is None else fmt(x) if isinstance(x, float) else str(x)


def report_csv(report: harness.BenchmarkReport) -> str:
    buf = io.StringIO()
    buf.write("case_id,mode,true_eps_top,est_eps_top,true_eps_soil,est_eps_soil,aggregate_re_percent,status\n")
    for r in report.rows:
        status = r.status.replace("\n", " ").replace(",", ";")
        cells = [r.case_id, r.mode.value, r.true_top, r.est_top, r.true_soil, r.est_soil, r.aggregate_re]
        buf.write(",".join(_cell(c) for c in cells) + f",{status}\n")
    return buf.getvalue()


def metrics_csv(report: harness.BenchmarkReport) -> str:
    buf = io.StringIO()
    buf.write("mode,layer,mre,mae,rmse,r,n\n")
    for (mode, layer), m in report.metrics.items():
        if m is None:
            buf.write(f"{mode.value},{layer},,,,,0\n")
            continue
        buf.write(",".join([mode.value, layer, fmt(m.mre), fmt(m.mae), fmt(m.rmse), _cell(m.r_value), str(m.n)]) + "\n")
    return buf.getvalue()


def summary_svg(report: harness.BenchmarkReport) -> str:
    panels = []
    lim = (EPS_BOUNDS[0], EPS_BOUNDS[1])
    for layer in harness.LAYERS:
        for mode in dict.fromkeys(r.mode for r in report.rows):
            rows = [r for r in report.rows_for(mode) if r.status == "ok"]
            x = [getattr(r, f"true_{layer}") for r in rows]
            y = [getattr(r, f"est_{layer}") for r in rows]
            m = report.metric(mode, layer)
            title = f"{mode.value} / {layer}" + (f"  MAE {m.mae:.3g}" if m else "")
            hi = max([*x, *y, 1.0]) * 1.1
            panels.append(Panel(title, "true eps_r", "estimated eps_r", [Series(x, y, style="points")],
                                xlim=(0.0, min(hi, lim[1])), ylim=(0.0, min(hi, lim[1])), diagonal=True))
    return render(panels, columns=max(1, len(panels) // len(harness.LAYERS)))


def cmd_generate(args) -> int:
    suite = harness.default_suite(args.seed, args.snr_db)
    write_dataset(harness.generate_observations(suite), args.outdir)
    return EXIT_OK


def cmd_bench(args) -> int:
    if args.dataset:
        dataset = read_dataset(args.dataset)
    elif args.suite == "default":
        dataset = harness.generate_observations(harness.default_suite(args.seed, args.snr_db))
    else:
        raise UsageError(f"unknown suite {args.suite!r}")
    report = harness.run_benchmark(dataset, args.modes, args.budget, args.seed, workers=args.workers)
    out = Path(args.outdir)
    write_atomic(out / "report.csv", report_csv(report))
    write_atomic(out / "metrics.csv", metrics_csv(report))
    write_atomic(out / "summary.svg", summary_svg(report))
    if any(report.missing.values()):
        log.warning("some cases failed; see the status column of report.csv")
    return EXIT_OK


def envelope_filename(frequency: float, depth: float, eps: float) -> str:
    return f"envelope_f{frequency:.0f}Hz_d{depth:g}m_eps{eps:g}.csv"


def cmd_sweep(args) -> int:
    cells = harness.resolution_sweep(args.freqs, args.depths, args.eps, kind=args.pulse_kind,
                                  basement=args.basement_eps, prominence_fraction=args.prominence)
    out = Path(args.outdir)
    buf = io.StringIO()
    buf.write("frequency_hz,depth_m,eps_r,peak_count,separation_s\n")
    for c in cells:
        write_trace(out / "envelopes" / envelope_filename(c.frequency, c.depth, c.eps), c.envelope)
        buf.write(f"{fmt(c.frequency)},{fmt(c.depth)},{fmt(c.eps)},{c.peak_count},{fmt(c.separation)}\n")
    write_atomic(out / "peaks.csv", buf.getvalue())

    panels = []
    for f in dict.fromkeys(c.frequency for c in cells):
        for d in dict.fromkeys(c.depth for c in cells):
            group = [c for c in cells if c.frequency == f and c.depth == d]
            series = [Series(list(c.envelope.times * 1e9), list(c.envelope.samples), f"eps {c.eps:g}") for c in group]
            panels.append(Panel(f"{f / 1e9:g} GHz, d = {d:g} m", "time (ns)", "envelope", series))
    write_atomic(out / "sweep.svg", render(panels, columns=len(dict.fromkeys(c.depth for c in cells))))
    return EXIT_OK


# -- parser --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gprinvert", description="Layered-soil radar simulation and inversion.")
    p.add_argument("-v", "--verbose", action="count", default=0, help="more logging (repeatable)")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="forward-model one trace")
    s.add_argument("--scene", required=True)
    s.add_argument("--pulse-kind", required=True, type=PulseKind.parse)
    s.add_argument("--freq-hz", required=True, type=float)
    s.add_argument("--amplitude", type=float, default=1.0)
    s.add_argument("--delay-s", type=float, default=None)
    s.add_argument("--out", required=True)
    g = s.add_argument_group("grid overrides")
    g.add_argument("--window-s", type=float, default=None, help="record length")
    g.add_argument("--refine", type=int, default=1, help="divide the default cell size")
    g.add_argument("--dz", type=float, default=None, help="cell size in m")
    g.add_argument("--dt", type=float, default=None, help="time step in s")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("invert", help="estimate unknown layer permittivities")
    s.add_argument("--obs", required=True, help="LABEL=FILE[,LABEL=FILE] with labels low/high")
    s.add_argument("--scene", required=True)
    s.add_argument("--mode", required=True, choices=[m.value for m in harness.ALL_MODES])
    s.add_argument("--budget", type=int, default=120)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.add_argument("--compare", choices=[c.value for c in CompareOn], default=CompareOn.ENVELOPE.value)
    s.add_argument("--low-freq-hz", type=float, default=harness.LOW_FREQUENCY)
    s.add_argument("--high-freq-hz", type=float, default=harness.HIGH_FREQUENCY)
    s.add_argument("--low-kind", type=PulseKind.parse, default=PulseKind.GAUSSIAN)
    s.add_argument("--high-kind", type=PulseKind.parse, default=PulseKind.GAUSSIAN)
    s.set_defaults(func=cmd_invert)

    s = sub.add_parser("calibrate", help="identify pulse kind and frequency from a trace")
    s.add_argument("--obs", required=True)
    s.add_argument("--scene", required=True)
    s.add_argument("--kinds", type=_kind_list, default=[PulseKind.GAUSSIAN, PulseKind.RICKER])
    s.add_argument("--fmin", type=float, required=True)
    s.add_argument("--fmax", type=float, required=True)
    s.add_argument("--budget", type=int, default=CALIBRATION_BUDGET)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", default=None)
    s.set_defaults(func=cmd_calibrate)

    s = sub.add_parser("generate", help="write the synthetic suite's observations")
    s.add_argument("--suite", choices=["default"], default="default")
    s.add_argument("--snr-db", type=_snr, default=None)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--outdir", required=True)
    s.set_defaults(func=cmd_generate)

    s = sub.add_parser("bench", help="invert the suite in all modes and score them")
    s.add_argument("--suite", default="default")
    s.add_argument("--dataset", default=None, help="read observations written by 'generate'")
    s.add_argument("--snr-db", type=_snr, default=None)
    s.add_argument("--budget", type=int, default=120)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--modes", type=lambda t: t.split(","), default=[m.value for m in harness.ALL_MODES])
    s.add_argument("--workers", type=int, default=None)
    s.add_argument("--outdir", required=True)
    s.set_defaults(func=cmd_bench)

    s = sub.add_parser("sweep", help="envelope peaks over frequency, depth and permittivity")
    s.add_argument("--freqs", type=_float_list, default=list(harness.SWEEP_FREQUENCIES))
    s.add_argument("--depths", type=_float_list, default=list(harness.SWEEP_DEPTHS))
    s.add_argument("--eps", type=_float_list, default=list(harness.SWEEP_EPS))
    s.add_argument("--pulse-kind", type=PulseKind.parse, default=PulseKind.GAUSSIAN)
    s.add_argument("--basement-eps", type=float, default=harness.SWEEP_BASEMENT_EPS)
    s.add_argument("--prominence", type=float, default=signals.DEFAULT_PROMINENCE)
    s.add_argument("--outdir", required=True)
    s.set_defaults(func=cmd_sweep)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except (StabilityError, NumericalFailureError) as exc:
        print(f"gprinvert: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (InversionError, ConditioningError) as exc:
        print(f"gprinvert: inversion failed: {exc}", file=sys.stderr)
        return EXIT_INVERSION
    except (ValueError, OSError) as exc:
        print(f"gprinvert: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
