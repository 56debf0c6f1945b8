"""Time stepping for Lévy-driven SDEs and delay equations.

All schemes consume the driver's node increments ``L(tau_{n+1}) - L(tau_n)``,
so several schemes run on one :class:`PathSet` see exactly the same noise.
The exact reference solutions (:func:`doleans_exponential`,
:func:`bs_explicit`) use the recorded jump times and sizes instead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from .levy_model import LevyTriplet
from .paths import PathSet, SamplePath, TimeGrid

__all__ = [
    "DIVERGENCE_BOUND",
    "ErrorSummary",
    "SddeProblem",
    "SdeProblem",
    "SolveResult",
    "bs_explicit",
    "delay_steps",
    "doleans_exponential",
    "euler_maruyama",
    "euler_sdde",
    "max_abs_error",
    "theta_linear_bs",
]

# states beyond this magnitude count as diverged
DIVERGENCE_BOUND = 1e300


@dataclass(frozen=True)
class SdeProblem:
    """``dX = drift(X, t) dt + diffusion(X-, t) dL``, ``X(0) = x0``.

    Coefficients are called with an array of current states (one per path)
    and the scalar time.
    """

    drift: Callable
    diffusion: Callable
    x0: float
    driver: LevyTriplet | None = None

    def __post_init__(self):
        if not math.isfinite(self.x0):
            raise ValueError("x0 must be finite")


@dataclass(frozen=True)
class SddeProblem:
    """``dX = f(X(t), X(t-1)) dt + g(X(t-), X((t-1)-)) dL`` with history on [-1, 0]."""

    f: Callable
    g: Callable
    history: Callable
    driver: LevyTriplet | None = None
    delay: float = 1.0

    def __post_init__(self):
        if self.delay != 1.0:
            raise ValueError("only unit delay is supported")


@dataclass(frozen=True, eq=False)
class SolveResult:
    """Solution values on ``times`` for every path of ``driver``.

    ``diverged`` flags paths whose state left the finite range; their values
    are NaN from the first offending step on.
    """

    times: np.ndarray
    values: np.ndarray
    driver: PathSet
    diverged: np.ndarray

    @property
    def grid(self) -> TimeGrid:
        return self.driver.grid

    @property
    def n_diverged(self) -> int:
        return int(np.count_nonzero(self.diverged))

    def on_grid(self) -> np.ndarray:
        """Values at the nonnegative grid nodes only (drops any history segment)."""
        return self.values[:, -len(self.driver.grid):]


class ErrorSummary(NamedTuple):
    per_path: np.ndarray
    worst: float


def _check_driver(driver: PathSet, grid: TimeGrid | None):
    if grid is not None and (grid.n_steps != driver.grid.n_steps or grid.dt != driver.grid.dt):
        raise ValueError("driver is not on the requested grid")


def _flag(x: np.ndarray, alive: np.ndarray) -> None:
    bad = alive & ~(np.abs(x) <= DIVERGENCE_BOUND)
    if bad.any():
        alive &= ~bad
        x[bad] = np.nan


def euler_maruyama(p: SdeProblem, driver: PathSet, grid: TimeGrid | None = None) -> SolveResult:
    """``X_{n+1} = X_n + a(X_n, tau_n) dt + b(X_n, tau_n) dL_n``."""
    _check_driver(driver, grid)
    g = driver.grid
    dL = driver.increments()
    n_paths, n = dL.shape
    out = np.empty((n_paths, n + 1))
    x = np.full(n_paths, float(p.x0))
    out[:, 0] = x
    alive = np.ones(n_paths, dtype=bool)
    times = g.times
    with np.errstate(all="ignore"):
        for k in range(n):
            t = times[k]
            x = x + p.drift(x, t) * g.dt + p.diffusion(x, t) * dL[:, k]
            _flag(x, alive)
            out[:, k + 1] = x
    return SolveResult(g.times, out, driver, ~alive)


def theta_linear_bs(alpha: float, beta: float, theta: float, y0: float,
                    driver: PathSet, grid: TimeGrid | None = None) -> SolveResult:
    """θ-method for ``dY = alpha Y dt + beta Y- dL`` in closed product form.

    ``Y_{n+1} = (1 + (1 - theta) alpha dt + beta dL_n) / (1 - theta alpha dt) * Y_n``.
    """
    if not 0.0 <= theta <= 1.0:
        raise ValueError(f"theta must lie in [0, 1], got {theta}")
    _check_driver(driver, grid)
    dt = driver.grid.dt
    denom = 1.0 - theta * alpha * dt
    if denom == 0:
        raise ZeroDivisionError("singular implicit factor 1 - theta * alpha * dt")
    factors = (1.0 + (1.0 - theta) * alpha * dt + beta * driver.increments()) / denom
    out = np.empty((len(driver), factors.shape[1] + 1))
    out[:, 0] = y0
    with np.errstate(all="ignore"):
        np.cumprod(factors, axis=1, out=out[:, 1:])
        out[:, 1:] *= y0
    bad = ~np.all(np.abs(out) <= DIVERGENCE_BOUND, axis=1)
    return SolveResult(driver.grid.times, out, driver, bad)


def _jump_factor_products(p: SamplePath, scale: float) -> np.ndarray:
    """``prod_{jumps <= tau_k} (1 + scale dX) exp(-scale dX)`` at every node."""
    fac = np.ones(len(p.grid))
    if p.n_jumps:
        dx = scale * p.jump_sizes
        np.multiply.at(fac, p.event_nodes(), (1.0 + dx) * np.exp(-dx))
    return np.cumprod(fac)


def doleans_exponential(X: SamplePath | PathSet, scale: float = 1.0) -> np.ndarray:
    """Node values of the stochastic exponential of ``scale * X``.

    ``Z(t) = exp(scale X(t) - scale^2 sigma2 t / 2) prod (1 + scale dX) exp(-scale dX)``,
    the product running over the recorded jumps up to ``t``.  A jump with
    ``scale * dX = -1`` sends ``Z`` to zero for good.
    """
    paths = list(X) if isinstance(X, PathSet) else [X]
    rows = []
    for p in paths:
        if p.values[0] != 0:
            raise ValueError("stochastic exponential needs X(0) = 0")
        t = p.grid.times
        rows.append(np.exp(scale * p.values - 0.5 * scale**2 * p.sigma2 * t)
                    * _jump_factor_products(p, scale))
    return np.vstack(rows) if isinstance(X, PathSet) else rows[0]


def bs_explicit(alpha: float, beta: float, y0: float, driver: PathSet) -> SolveResult:
    """Exact solution of ``dY = alpha Y dt + beta Y- dL`` at the driver's nodes."""
    if driver.triplet is None:
        raise ValueError("driver must carry its triplet (sigma2 is needed)")
    z = doleans_exponential(driver, beta)
    values = y0 * np.exp(alpha * driver.grid.times) * z
    bad = ~np.all(np.isfinite(values), axis=1)
    return SolveResult(driver.grid.times, values, driver, bad)


def delay_steps(dt: float, delay: float = 1.0) -> int:
    """Number of steps ``M`` with ``M * dt == delay``; raises if not whole."""
    m = round(delay / dt)
    if m < 1 or abs(m * dt - delay) > 1e-9 * delay:
        raise ValueError(f"delay {delay} is not a whole number of steps dt={dt}")
    return int(m)


def euler_sdde(p: SddeProblem, driver: PathSet, grid: TimeGrid | None = None) -> SolveResult:
    """Euler scheme ``X_{n+1} = X_n + f(X_n, X_{n-M}) dt + g(X_n, X_{n-M}) dL_n``.

    The returned times start at -1; the first ``M + 1`` columns are the
    history evaluated on the grid.
    """
    _check_driver(driver, grid)
    g = driver.grid
    m = delay_steps(g.dt, p.delay)
    dL = driver.increments()
    n_paths, n = dL.shape
    times = (np.arange(m + 1 + n) - m) * g.dt
    times[m:] = g.times
    out = np.empty((n_paths, m + 1 + n))
    hist = np.asarray([p.history(s) for s in times[: m + 1]], dtype=float)
    out[:, : m + 1] = hist
    alive = np.ones(n_paths, dtype=bool)
    x = out[:, m].copy()
    with np.errstate(all="ignore"):
        for k in range(n):
            xd = out[:, k]
            x = x + p.f(x, xd) * g.dt + p.g(x, xd) * dL[:, k]
            _flag(x, alive)
            out[:, m + k + 1] = x
    return SolveResult(times, out, driver, ~alive)


def max_abs_error(a: SolveResult, b: SolveResult) -> ErrorSummary:
    """Largest node-wise ``|a - b|`` per path and over all paths.

    Diverged paths (NaN values) are excluded from ``worst``.
    """
    if a.values.shape != b.values.shape or not np.array_equal(a.times, b.times):
        raise ValueError("solutions live on different grids")
    per_path = np.max(np.abs(a.values - b.values), axis=1)
    finite = per_path[np.isfinite(per_path)]
    return ErrorSummary(per_path, float(finite.max()) if finite.size else math.nan)
