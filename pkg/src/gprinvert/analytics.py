"""Closed-form wave-physics oracles and prediction-quality metrics."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .em_sim import C0, EPS0, MU0
from .errors import InvalidArgumentError


def fresnel_reflection(eps1: float, eps2: float) -> float:
    """Normal-incidence amplitude reflection going from medium 1 into medium 2."""
    n1, n2 = math.sqrt(eps1), math.sqrt(eps2)
    return (n1 - n2) / (n1 + n2)


def two_way_time(air_gap: float, layers: Iterable[tuple[float, float]] = ()) -> float:
    """Two-way travel time through an air gap and ``(thickness, eps_r)`` layers."""
    t = 2.0 * air_gap / C0
    for thickness, eps in layers:
        t += 2.0 * thickness * math.sqrt(eps) / C0
    return t


def attenuation_constant(eps_r: float, sigma: float, frequency: float) -> float:
    """Exact plane-wave attenuation constant (Np/m) of a lossy dielectric."""
    omega = 2.0 * math.pi * frequency
    eps = eps_r * EPS0
    loss_tangent = sigma / (omega * eps)
    # sqrt(1 + x^2) - 1 rewritten to avoid cancellation at small loss tangents
    excess = loss_tangent**2 / (math.sqrt(1.0 + loss_tangent**2) + 1.0)
    return omega * math.sqrt(MU0 * eps / 2.0) * math.sqrt(excess)


@dataclass(frozen=True)
class MetricsReport:
    mre: float
    mae: float
    rmse: float
    r_value: float | None
    n: int
    r_error: str | None = None

    def as_dict(self) -> dict:
        return {
            "MRE": self.mre,
            "MAE": self.mae,
            "RMSE": self.rmse,
            "R": self.r_value,
            "n": self.n,
        }


def compute_metrics(predicted: Sequence[float], truth: Sequence[float]) -> MetricsReport:
    """MRE (relative to truth), MAE, RMSE and Pearson R of paired estimates.

    R is reported as ``None`` with ``r_error`` set when either vector is
    constant; the other metrics are still computed.
    """
    p = np.asarray(predicted, dtype=float)
    t = np.asarray(truth, dtype=float)
    if p.shape != t.shape or p.ndim != 1:
        raise InvalidArgumentError("predicted and truth must be 1-D and equally long")
    if p.size < 2:
        raise InvalidArgumentError("need at least 2 samples")
    if np.any(t <= 0):
        raise InvalidArgumentError("truth values must be positive for MRE")
    err = p - t
    mre = float(np.mean(np.abs(err) / t))
    mae = float(np.mean(np.abs(err)))
    rmse = float(math.sqrt(np.mean(err**2)))

    r_value, r_error = None, None
    dp, dt = p - p.mean(), t - t.mean()
    denom = math.sqrt(float(np.sum(dp**2)) * float(np.sum(dt**2)))
    if denom == 0.0:
        r_error = "R undefined: constant predicted or truth vector"
    else:
        r_value = float(np.clip(np.sum(dp * dt) / denom, -1.0, 1.0))
    return MetricsReport(mre, mae, rmse, r_value, int(p.size), r_error)
