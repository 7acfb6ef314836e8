"""Gaussian-process Bayesian optimization with expected improvement.

Inputs are mapped to the unit cube and targets standardized before fitting.
Hyperparameters are picked from a fixed grid by log marginal likelihood, and
the acquisition is maximized over seeded quasi-random candidates, so a run is
fully determined by its seed.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Sequence

import numpy as np
from scipy import linalg
from scipy.stats import norm, qmc

from .errors import ConditioningError, InvalidArgumentError, NumericalFailureError

log = logging.getLogger(__name__)

NOISE_FLOOR = 1e-10
FAILURE_PENALTY = 200.0
#: unit-cube standard deviations of the perturbations drawn around the incumbent
LOCAL_SCALES = (0.005, 0.02, 0.05, 0.1)


@dataclass(frozen=True)
class Dimension:
    name: str
    lower: float
    upper: float


@dataclass(frozen=True)
class SearchSpace:
    dims: tuple[Dimension, ...]

    def __post_init__(self):
        dims = tuple(d if isinstance(d, Dimension) else Dimension(*d) for d in self.dims)
        object.__setattr__(self, "dims", dims)
        if not 1 <= len(dims) <= 8:
            raise InvalidArgumentError("search space needs 1 to 8 dimensions")
        for d in dims:
            if not d.lower < d.upper:
                raise InvalidArgumentError(f"dimension {d.name!r}: lower must be < upper")

    @classmethod
    def from_bounds(cls, **bounds: tuple[float, float]) -> "SearchSpace":
        return cls(tuple(Dimension(k, float(lo), float(hi)) for k, (lo, hi) in bounds.items()))

    @property
    def ndim(self) -> int:
        return len(self.dims)

    @property
    def names(self) -> list[str]:
        return [d.name for d in self.dims]

    @property
    def lower(self) -> np.ndarray:
        return np.array([d.lower for d in self.dims])

    @property
    def upper(self) -> np.ndarray:
        return np.array([d.upper for d in self.dims])

    def to_unit(self, x) -> np.ndarray:
        return (np.asarray(x, dtype=float) - self.lower) / (self.upper - self.lower)

    def from_unit(self, u) -> np.ndarray:
        return self.lower + np.asarray(u, dtype=float) * (self.upper - self.lower)

    def contains(self, x, tol: float = 1e-9) -> bool:
        u = self.to_unit(x)
        return bool(np.all(u >= -tol) and np.all(u <= 1 + tol))


class Kernel(str, Enum):
    MATERN52 = "matern52"
    SQUARED_EXPONENTIAL = "squared_exponential"


def kernel_matrix(kernel: Kernel, a: np.ndarray, b: np.ndarray, length_scale, variance: float):
    """Stationary kernel on scaled distance; ``length_scale`` is scalar or per-dimension."""
    scaled = (a[:, None, :] - b[None, :, :]) / np.asarray(length_scale, dtype=float)
    d = np.sqrt((scaled**2).sum(-1))
    if kernel is Kernel.MATERN52:
        s5 = math.sqrt(5.0) * d
        return variance * (1.0 + s5 + s5**2 / 3.0) * np.exp(-s5)
    return variance * np.exp(-0.5 * d**2)


@dataclass(frozen=True)
class GPConfig:
    kernel: Kernel = Kernel.MATERN52
    length_scales: tuple[float, ...] = (0.05, 0.1, 0.2, 0.5, 1.0)
    noise_variance: float = 1e-6
    #: search length scales independently per dimension (grid product) when
    #: the space has at most this many dimensions; one shared scale above
    ard_max_dims: int = 3


@dataclass
class GaussianProcess:
    """Fitted surrogate. Variances are reported in the original target units."""

    kernel: Kernel
    length_scales: np.ndarray
    signal_variance: float
    noise_variance: float
    space: SearchSpace
    x_unit: np.ndarray
    y_standardized: np.ndarray
    y_mean: float
    y_scale: float
    log_marginal_likelihood: float
    _chol: np.ndarray = field(repr=False)
    _alpha: np.ndarray = field(repr=False)

    def predict_unit(self, u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Standardized posterior mean and variance at unit-cube points ``u``."""
        ks = kernel_matrix(self.kernel, np.atleast_2d(u), self.x_unit, self.length_scales, 1.0)
        mean = ks @ self._alpha
        v = linalg.solve_triangular(self._chol, ks.T, lower=True)
        var = np.maximum(1.0 - np.sum(v**2, axis=0), 0.0)
        return mean, var


def _standardize(y: np.ndarray) -> tuple[np.ndarray, float, float]:
    mean = float(np.mean(y))
    scale = float(np.std(y))
    if not scale > 1e-12 * max(1.0, abs(mean)):
        scale = 1.0
    return (y - mean) / scale, mean, scale


def fit_gp(points, values, space: SearchSpace | None = None, config: GPConfig | None = None) -> GaussianProcess:
    """Fit by log marginal likelihood over the configured length-scale grid.

    Without ``space`` the bounding box of ``points`` is used for normalization.
    """
    config = config or GPConfig()
    x = np.atleast_2d(np.asarray(points, dtype=float))
    y = np.asarray(values, dtype=float).ravel()
    if x.shape[0] != y.size:
        raise InvalidArgumentError("points and values differ in length")
    if y.size < 2 or np.unique(x, axis=0).shape[0] < 2:
        raise InvalidArgumentError("need at least 2 distinct points")
    if not np.all(np.isfinite(y)):
        raise InvalidArgumentError("values must be finite")
    if space is None:
        lo, hi = x.min(axis=0), x.max(axis=0)
        hi = np.where(hi > lo, hi, lo + 1.0)
        space = SearchSpace(tuple(Dimension(f"x{i}", a, b) for i, (a, b) in enumerate(zip(lo, hi))))

    u = space.to_unit(x)
    ys, y_mean, y_scale = _standardize(y)
    noise = max(config.noise_variance, NOISE_FLOOR)
    n = y.size

    if space.ndim <= config.ard_max_dims:
        grid = itertools.product(config.length_scales, repeat=space.ndim)
    else:
        grid = ((ell,) * space.ndim for ell in config.length_scales)
    best = None
    for ell in grid:
        ell = np.array(ell)
        k = kernel_matrix(config.kernel, u, u, ell, 1.0) + noise * np.eye(n)
        try:
            chol = linalg.cholesky(k, lower=True)
        except linalg.LinAlgError:
            continue
        alpha = linalg.cho_solve((chol, True), ys)
        lml = -0.5 * ys @ alpha - np.log(np.diag(chol)).sum() - 0.5 * n * math.log(2 * math.pi)
        if not math.isfinite(lml):
            continue
        if best is None or lml > best[0]:
            best = (lml, ell, chol, alpha)
    if best is None:
        raise ConditioningError("kernel matrix is not positive definite for any length scale")

    lml, ell, chol, alpha = best
    return GaussianProcess(
        kernel=config.kernel,
        length_scales=ell,
        signal_variance=y_scale**2,
        noise_variance=noise,
        space=space,
        x_unit=u,
        y_standardized=ys,
        y_mean=y_mean,
        y_scale=y_scale,
        log_marginal_likelihood=float(lml),
        _chol=chol,
        _alpha=alpha,
    )


def gp_predict(gp: GaussianProcess, x) -> tuple[float, float]:
    """Posterior mean and variance at one point given in original coordinates."""
    u = gp.space.to_unit(np.asarray(x, dtype=float).ravel())
    if u.size != gp.space.ndim:
        raise InvalidArgumentError("point has the wrong dimension")
    if np.any(u < -1e-9) or np.any(u > 1 + 1e-9):
        raise InvalidArgumentError("point lies outside the search space")
    mean, var = gp.predict_unit(u[None, :])
    return gp.y_mean + gp.y_scale * float(mean[0]), gp.y_scale**2 * float(var[0])


def expected_improvement(mean, variance, best_so_far: float, xi: float = 0.01):
    """Expected improvement for minimization; scalar in, scalar out."""
    mean = np.asarray(mean, dtype=float)
    sigma = np.sqrt(np.maximum(np.asarray(variance, dtype=float), 0.0))
    gain = best_so_far - mean - xi
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(sigma > 0, gain / np.where(sigma > 0, sigma, 1.0), 0.0)
        ei = np.where(sigma > 0, gain * norm.cdf(z) + sigma * norm.pdf(z), np.maximum(gain, 0.0))
    ei = np.maximum(ei, 0.0)
    return float(ei) if ei.ndim == 0 else ei


@dataclass
class OptimizationRun:
    history: list[tuple[tuple[float, ...], float]]
    best_point: tuple[float, ...]
    best_value: float
    seed: int
    budget: int
    n_initial: int
    failures: int = 0

    @property
    def values(self) -> np.ndarray:
        return np.array([v for _, v in self.history])

    @property
    def points(self) -> np.ndarray:
        return np.array([p for p, _ in self.history])

    def running_best(self) -> np.ndarray:
        return np.minimum.accumulate(self.values)


def cap_at_median(y: np.ndarray) -> np.ndarray:
    """Clip values above the median so that a few huge misfits do not flatten the GP."""
    y = np.asarray(y, dtype=float)
    return np.minimum(y, np.median(y))


def initial_design_size(ndim: int) -> int:
    return max(5, 2 * ndim + 1)


def _select(gp: GaussianProcess, candidates: np.ndarray, seen: np.ndarray, xi: float) -> np.ndarray:
    mean, var = gp.predict_unit(candidates)
    ei = expected_improvement(mean, var, float(gp.y_standardized.min()), xi)
    order = np.argsort(-ei, kind="stable")
    for i in order:
        if np.min(np.abs(seen - candidates[i]).max(axis=1)) > 1e-9:
            return candidates[i]
    return candidates[order[0]]


def minimize(
    objective: Callable[[np.ndarray], float],
    space: SearchSpace,
    budget: int,
    seed: int = 0,
    *,
    config: GPConfig | None = None,
    xi: float = 0.01,
    n_candidates: int = 1024,
    n_local: int = 96,
    failure_value: float = FAILURE_PENALTY,
    callback: Callable[[int, np.ndarray, float], None] | None = None,
    cap_outliers: bool = True,
) -> OptimizationRun:
    """Seeded Bayesian minimization of a black-box objective.

    A Latin hypercube of ``max(5, 2*ndim + 1)`` points starts the run; each
    following step fits the GP and evaluates the candidate with the largest
    expected improvement. Objective calls raising
    :class:`NumericalFailureError` or returning non-finite values are recorded
    as ``failure_value``. With ``cap_outliers`` the surrogate is fitted to
    the values clipped at their median, which keeps its length scales tied
    to the basin around the incumbent.
    """
    n_init = initial_design_size(space.ndim)
    if budget < n_init:
        raise InvalidArgumentError(f"budget {budget} is smaller than the initial design ({n_init})")
    rng = np.random.default_rng(seed)
    failures = 0

    def evaluate(u):
        nonlocal failures
        x = space.from_unit(u)
        try:
            value = float(objective(x))
        except NumericalFailureError as exc:
            log.warning("objective failed at %s: %s", x, exc)
            value = math.nan
        if not math.isfinite(value):
            failures += 1
            value = failure_value
        if callback is not None:
            callback(len(us), x, value)
        return value

    us: list[np.ndarray] = []
    ys: list[float] = []
    design = qmc.LatinHypercube(d=space.ndim, seed=rng).random(n_init)
    for u in design:
        ys.append(evaluate(u))
        us.append(u)

    local_scales = np.asarray(LOCAL_SCALES)
    sobol = qmc.Sobol(d=space.ndim, scramble=True, seed=rng)
    n_sobol = 1 << max(0, (n_candidates - 1).bit_length())
    unit = SearchSpace(tuple(Dimension(n, 0.0, 1.0) for n in space.names))
    while len(ys) < budget:
        seen = np.array(us)
        targets = cap_at_median(ys) if cap_outliers else np.asarray(ys)
        gp = fit_gp(seen, targets, unit, config)
        incumbent = seen[int(np.argmin(ys))]
        scales = np.repeat(local_scales, -(-n_local // local_scales.size))[:n_local, None]
        local = np.clip(incumbent + scales * rng.standard_normal((n_local, space.ndim)), 0.0, 1.0)
        candidates = np.vstack([sobol.random(n_sobol)[:n_candidates], local])
        u = _select(gp, candidates, seen, xi)
        ys.append(evaluate(u))
        us.append(u)

    history = [(tuple(float(v) for v in space.from_unit(u)), y) for u, y in zip(us, ys)]
    i_best = int(np.argmin(ys))
    return OptimizationRun(
        history=history,
        best_point=history[i_best][0],
        best_value=float(ys[i_best]),
        seed=seed,
        budget=budget,
        n_initial=n_init,
        failures=failures,
    )
