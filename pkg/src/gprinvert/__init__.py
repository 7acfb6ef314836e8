"""Radar waveform simulation and Bayesian inversion of layered-soil permittivity."""

from .analytics import attenuation_constant, compute_metrics, fresnel_reflection, two_way_time
from .em_sim import MaterialLayer, Pulse, PulseKind, Scene, Trace, build_grid, run_fdtd
from .errors import (
    ConditioningError,
    DegenerateSignalError,
    GprInvertError,
    InvalidArgumentError,
    InversionError,
    NumericalFailureError,
    StabilityError,
)
from .inversion import InversionConfig, Observation, calibrate_pulse, invert, relative_error
from .optimize import SearchSpace, minimize

__version__ = "0.1.0"

__all__ = [
    "ConditioningError",
    "DegenerateSignalError",
    "GprInvertError",
    "InvalidArgumentError",
    "InversionConfig",
    "InversionError",
    "MaterialLayer",
    "NumericalFailureError",
    "Observation",
    "Pulse",
    "PulseKind",
    "Scene",
    "SearchSpace",
    "StabilityError",
    "Trace",
    "attenuation_constant",
    "build_grid",
    "calibrate_pulse",
    "compute_metrics",
    "fresnel_reflection",
    "invert",
    "minimize",
    "relative_error",
    "run_fdtd",
    "two_way_time",
]
