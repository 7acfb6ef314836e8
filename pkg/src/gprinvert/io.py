"""File formats: scene JSON, trace CSV, result JSON, atomic writes."""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from pathlib import Path
from typing import Any

import numpy as np

from .em_sim import MaterialLayer, Pulse, Scene, Trace
from .errors import InvalidArgumentError

UNKNOWN = "unknown"
PLACEHOLDER_EPS = 1.0
TRACE_HEADER = ("time_s", "amplitude")
UNIFORM_RTOL = 1e-9


def fmt(x: float) -> str:
    """Shortest round-tripping decimal representation."""
    return repr(float(x))


def write_atomic(path: str | os.PathLike, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def dump_json(obj: Any) -> str:
    return json.dumps(obj, indent=2, sort_keys=False, allow_nan=False) + "\n"


# -- scenes ---------------------------------------------------------------------


def _number(obj: dict, key: str) -> float:
    try:
        value = obj[key]
    except KeyError:
        raise InvalidArgumentError(f"missing field {key!r}") from None
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        raise InvalidArgumentError(f"field {key!r} must be a finite number")
    return float(value)


def scene_from_dict(obj: dict) -> tuple[Scene, tuple[int, ...]]:
    """Parse a scene config; returns the scene and the indices of unknown layers.

    Unknown permittivities are filled with a placeholder of 1.0.
    """
    if not isinstance(obj, dict):
        raise InvalidArgumentError("scene config must be a JSON object")
    layers_raw = obj.get("layers")
    if not isinstance(layers_raw, list) or not layers_raw:
        raise InvalidArgumentError("scene config needs a non-empty 'layers' list")
    layers, unknown = [], []
    for i, raw in enumerate(layers_raw):
        if not isinstance(raw, dict):
            raise InvalidArgumentError(f"layer {i} must be an object")
        eps = raw.get("eps_r")
        if eps == UNKNOWN:
            if i > 1:
                raise InvalidArgumentError("only the two topmost layers may have unknown eps_r")
            unknown.append(i)
            eps = PLACEHOLDER_EPS
        else:
            eps = _number(raw, "eps_r")
        sigma = _number(raw, "sigma_s_per_m") if "sigma_s_per_m" in raw else 0.0
        layers.append(MaterialLayer(_number(raw, "thickness_m"), eps, sigma))
    scene = Scene(_number(obj, "antenna_height_m"), tuple(layers), _number(obj, "basement_eps_r"))
    return scene, tuple(unknown)


def scene_to_dict(scene: Scene, unknown: tuple[int, ...] = ()) -> dict:
    return {
        "antenna_height_m": scene.antenna_height,
        "layers": [
            {
                "thickness_m": layer.thickness,
                "eps_r": UNKNOWN if i in unknown else layer.relative_permittivity,
                "sigma_s_per_m": layer.conductivity,
            }
            for i, layer in enumerate(scene.layers)
        ],
        "basement_eps_r": scene.basement_permittivity,
    }


def load_scene(path: str | os.PathLike) -> tuple[Scene, tuple[int, ...]]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise InvalidArgumentError(f"cannot read scene file {path}: {exc.strerror}") from None
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InvalidArgumentError(f"scene file {path} is not valid JSON: {exc}") from None
    return scene_from_dict(obj)


# -- traces ---------------------------------------------------------------------


def trace_to_csv(trace: Trace) -> str:
    buf = io.StringIO()
    buf.write(",".join(TRACE_HEADER) + "\n")
    for t, y in zip(trace.times, trace.samples):
        buf.write(f"{fmt(t)},{fmt(y)}\n")
    return buf.getvalue()


def write_trace(path: str | os.PathLike, trace: Trace) -> None:
    write_atomic(path, trace_to_csv(trace))


def trace_from_csv(text: str, source: str = "<string>") -> Trace:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or tuple(c.strip() for c in rows[0]) != TRACE_HEADER:
        raise InvalidArgumentError(f"{source}: header must be 'time_s,amplitude'")
    body = [r for r in rows[1:] if r]
    if len(body) < 2:
        raise InvalidArgumentError(f"{source}: need at least 2 data rows")
    try:
        data = np.array([[float(a), float(b)] for a, b in body])
    except ValueError:
        raise InvalidArgumentError(f"{source}: rows must hold two decimal numbers") from None
    t = data[:, 0]
    steps = np.diff(t)
    dt = float((t[-1] - t[0]) / (t.size - 1))
    if not dt > 0 or np.any(steps <= 0):
        raise InvalidArgumentError(f"{source}: times must increase strictly")
    if np.max(np.abs(steps - dt)) > UNIFORM_RTOL * dt + 4 * np.finfo(float).eps * np.max(np.abs(t)):
        raise InvalidArgumentError(f"{source}: time samples are not uniform")
    return Trace(dt, data[:, 1], float(t[0]))


def read_trace(path: str | os.PathLike) -> Trace:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise InvalidArgumentError(f"cannot read trace file {path}: {exc.strerror}") from None
    return trace_from_csv(text, str(path))


# -- pulses and results -------------------------------------------------------------


def pulse_to_dict(pulse: Pulse) -> dict:
    return {
        "kind": pulse.kind.value,
        "freq_hz": pulse.center_frequency,
        "amplitude": pulse.amplitude,
        "delay_s": pulse.delay,
    }


def pulse_from_dict(obj: dict) -> Pulse:
    if not isinstance(obj, dict) or "kind" not in obj:
        raise InvalidArgumentError("pulse config needs a 'kind'")
    return Pulse(
        obj["kind"],
        _number(obj, "freq_hz"),
        _number(obj, "amplitude") if "amplitude" in obj else 1.0,
        _number(obj, "delay_s") if obj.get("delay_s") is not None else None,
    )


def inversion_result_to_dict(result, scene: Scene, mode: str) -> dict:
    eps_top = result.eps_top if result.eps_top is not None else scene.layers[0].relative_permittivity
    eps_soil = result.eps_soil
    if eps_soil is None and len(scene.layers) > 1:
        eps_soil = scene.layers[1].relative_permittivity
    re = dict(result.per_frequency_re)
    re["aggregate"] = result.aggregate_re
    return {
        "mode": mode,
        "eps_top": eps_top,
        "eps_soil": eps_soil,
        "free_layers": list(result.free_layers),
        "re_percent": re,
        "budget": result.run.budget,
        "seed": result.run.seed,
        "history": [{"point": list(p), "value": v} for p, v in result.run.history],
    }


def inversion_result_from_dict(obj: dict) -> dict:
    """Validate a result JSON object and return it with numbers as floats."""
    for key in ("eps_top", "re_percent", "history"):
        if key not in obj:
            raise InvalidArgumentError(f"result JSON lacks {key!r}")
    history = [(tuple(float(v) for v in h["point"]), float(h["value"])) for h in obj["history"]]
    return {
        **obj,
        "eps_top": float(obj["eps_top"]),
        "eps_soil": None if obj.get("eps_soil") is None else float(obj["eps_soil"]),
        "re_percent": {k: float(v) for k, v in obj["re_percent"].items()},
        "history": history,
    }
