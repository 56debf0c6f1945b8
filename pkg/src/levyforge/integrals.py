"""Discrete stochastic calculus on sample paths.

Integrals are returned as cumulative values on the grid.  Grid-based
operations work on a single :class:`SamplePath` or on a whole
:class:`PathSet` at once; operations that need jump records loop over paths.

The integrand of a left-point sum is evaluated at the start of each step,
which is the predictable (left-limit) choice.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Union

import numpy as np

from .paths import PathSet, SamplePath, TimeGrid

__all__ = [
    "GridMismatchError",
    "IntegralPath",
    "integration_by_parts_residual",
    "ito_residual",
    "left_riemann_integral",
    "quadratic_covariation",
    "shift_integral_residual",
    "stieltjes_integral",
    "total_variation",
]

Path = Union[SamplePath, PathSet]
Integrand = Union[SamplePath, PathSet, Callable[[np.ndarray], np.ndarray], np.ndarray, float]

RULES = ("left_limit", "node_value")


class GridMismatchError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class IntegralPath:
    """Cumulative integral values; ``values`` is 1-D for one path, 2-D for a set."""

    grid: TimeGrid
    values: np.ndarray

    @property
    def final(self):
        return self.values[..., -1]


def _check_grid(a: TimeGrid, b: TimeGrid):
    if a.n_steps != b.n_steps or a.dt != b.dt:
        raise GridMismatchError(f"grids differ: {a} vs {b}")


def _paths(x: Path) -> list[SamplePath]:
    return list(x) if isinstance(x, PathSet) else [x]


def _node_values(H: Integrand, grid: TimeGrid) -> np.ndarray:
    if isinstance(H, (SamplePath, PathSet)):
        _check_grid(H.grid, grid)
        return H.values
    if callable(H):
        return np.asarray(H(grid.times), dtype=float) * np.ones(len(grid))
    H = np.asarray(H, dtype=float)
    if H.ndim == 0:
        return np.full(len(grid), float(H))
    if H.shape[-1] != len(grid):
        raise GridMismatchError(f"integrand has {H.shape[-1]} nodes, grid has {len(grid)}")
    return H


def _cumulative(first, steps: np.ndarray) -> np.ndarray:
    """Cumulative sums with ``first`` at node 0 followed by ``first + cumsum(steps)``."""
    first = np.asarray(first, dtype=float)
    out = np.empty(steps.shape[:-1] + (steps.shape[-1] + 1,))
    out[..., 0] = first
    np.cumsum(steps, axis=-1, out=out[..., 1:])
    out[..., 1:] += first[..., None] if first.ndim else first
    return out


def left_riemann_integral(H: Integrand, X: Path) -> IntegralPath:
    """``I_k = H_0 X_0 + sum_{j<k} H(tau_j) (X(tau_{j+1}) - X(tau_j))``."""
    h = _node_values(H, X.grid)
    x = X.values
    return IntegralPath(X.grid, _cumulative(h[..., 0] * x[..., 0], h[..., :-1] * np.diff(x)))


def _eval_at(H, s: np.ndarray, rule: str) -> np.ndarray:
    if isinstance(H, SamplePath):
        return H.left_limit_at(s) if rule == "left_limit" else H.value_at(s)
    if callable(H):
        return np.asarray(H(s), dtype=float) * np.ones(len(s))
    # constant
    return np.full(len(s), float(H))


def _stieltjes_one(H, X: SamplePath, rule: str) -> np.ndarray:
    if X.sigma2 > 0:
        raise ValueError("Stieltjes integral needs a finite-variation integrator (sigma2 = 0)")
    grid = X.grid
    h = _node_values(H, grid)
    # drift part: trapezoid rule on the grid
    steps = X.drift * grid.dt * 0.5 * (h[:-1] + h[1:])
    out = _cumulative(h[0] * X.values[0], steps)
    if X.n_jumps:
        contrib = _eval_at(H, X.jump_times, rule) * X.jump_sizes
        out += np.cumsum(np.bincount(X.event_nodes(), weights=contrib, minlength=len(grid)))
    return out


def stieltjes_integral(H, X: Path, rule: str = "left_limit") -> IntegralPath:
    """Pathwise Lebesgue–Stieltjes integral against a drift-plus-jumps integrator.

    The drift contribution is integrated with the trapezoid rule on the grid;
    every recorded jump contributes ``H_eval(time) * size`` exactly, where
    ``H_eval`` is ``H(time-)`` for ``rule="left_limit"`` and ``H(time)`` for
    ``rule="node_value"``.
    """
    if rule not in RULES:
        raise ValueError(f"rule must be one of {RULES}, got {rule!r}")
    xs = _paths(X)
    if isinstance(H, PathSet):
        _check_grid(H.grid, X.grid)
        hs = list(H)
        if len(hs) != len(xs):
            raise ValueError("integrand and integrator have different path counts")
    else:
        hs = [H] * len(xs)
    rows = [_stieltjes_one(h, x, rule) for h, x in zip(hs, xs)]
    return IntegralPath(X.grid, np.vstack(rows) if isinstance(X, PathSet) else rows[0])


def _same_process(X: SamplePath, Y: SamplePath) -> bool:
    return X is Y or (
        np.array_equal(X.values, Y.values)
        and np.array_equal(X.jump_times, Y.jump_times)
        and np.array_equal(X.jump_sizes, Y.jump_sizes)
    )


def _exact_covariation_one(X: SamplePath, Y: SamplePath) -> np.ndarray:
    grid = X.grid
    if _same_process(X, Y):
        cont = X.sigma2 * grid.times
    elif X.sigma2 == 0 or Y.sigma2 == 0:
        cont = np.zeros(len(grid))
    else:
        raise ValueError("continuous covariation of two distinct diffusive paths is unknown")
    _, ix, iy = np.intersect1d(X.jump_times, Y.jump_times, assume_unique=True,
                               return_indices=True)
    prod = X.jump_sizes[ix] * Y.jump_sizes[iy]
    nodes = np.searchsorted(grid.times, X.jump_times[ix], side="left")
    jumps = np.cumsum(np.bincount(nodes, weights=prod, minlength=len(grid)))
    return X.values[0] * Y.values[0] + cont + jumps


def quadratic_covariation(X: Path, Y: Path, estimator: str = "grid") -> IntegralPath:
    """Quadratic covariation ``[X, Y]`` on the grid.

    ``estimator="grid"`` sums products of grid increments.
    ``estimator="exact"`` adds the model's continuous part (``sigma2 * t``,
    only when ``X`` and ``Y`` are the same process) to the sum of products
    of jumps recorded at the same instants.
    """
    _check_grid(X.grid, Y.grid)
    if estimator == "grid":
        x, y = X.values, Y.values
        return IntegralPath(X.grid, _cumulative(x[..., 0] * y[..., 0], np.diff(x) * np.diff(y)))
    if estimator != "exact":
        raise ValueError(f"unknown estimator {estimator!r}")
    if X is Y and isinstance(X, PathSet):
        rows = [_exact_covariation_one(p, p) for p in X]
    else:
        rows = [_exact_covariation_one(p, q) for p, q in zip(_paths(X), _paths(Y))]
    return IntegralPath(X.grid, np.vstack(rows) if isinstance(X, PathSet) else rows[0])


def total_variation(X: Path, exact: bool = False) -> np.ndarray:
    """Variation of the path on [0, tau_k] at every node.

    The grid version is the partition sum, a lower bound for the true
    variation.  ``exact=True`` gives ``|drift| t + sum |jump sizes|`` and
    requires a finite-variation path.
    """
    if not exact:
        return _cumulative(np.zeros(X.values.shape[:-1]), np.abs(np.diff(X.values)))
    rows = []
    for p in _paths(X):
        if p.sigma2 > 0:
            raise ValueError("exact total variation needs sigma2 = 0")
        jumps = np.bincount(p.event_nodes(), weights=np.abs(p.jump_sizes),
                            minlength=len(p.grid))
        rows.append(abs(p.drift) * p.grid.times + np.cumsum(jumps))
    return np.vstack(rows) if isinstance(X, PathSet) else rows[0]


def integration_by_parts_residual(X: Path, Y: Path) -> np.ndarray:
    """Largest ``|X_k Y_k - int X_- dY - int Y_- dX - [X, Y]_k|`` over nodes.

    Grid estimators throughout, with ``X_{0-} = Y_{0-} = 0``.  One value per path.
    """
    _check_grid(X.grid, Y.grid)
    x, y = X.values, Y.values
    dx, dy = np.diff(x), np.diff(y)
    zero = np.zeros(x.shape[:-1])
    int_x_dy = _cumulative(zero, x[..., :-1] * dy)
    int_y_dx = _cumulative(zero, y[..., :-1] * dx)
    qv = quadratic_covariation(X, Y).values
    return np.max(np.abs(x * y - int_x_dy - int_y_dx - qv), axis=-1)


def _ito_jump_terms(p: SamplePath, f, df) -> tuple[np.ndarray, np.ndarray]:
    """Per-node cumulative jump correction and per-step squared-jump mass."""
    n = len(p.grid)
    if p.n_jumps == 0:
        return np.zeros(n), np.zeros(n - 1)
    s = p.jump_times
    before, after = p.left_limit_at(s), p.value_at(s)
    dx = p.jump_sizes
    nodes = p.event_nodes()
    corr = np.cumsum(np.bincount(nodes, weights=f(after) - f(before) - df(before) * dx,
                                 minlength=n))
    # a jump at time s lies in step nodes-1, i.e. (tau_{k-1}, tau_k]
    sq = np.bincount(nodes - 1, weights=dx * dx, minlength=n - 1)[: n - 1]
    return corr, sq


def ito_residual(f: Callable, df: Callable, d2f: Callable, X: Path,
                 qv: str = "grid") -> np.ndarray:
    """Largest deviation from the discrete Itô formula, one value per path.

    ``f(X_k)`` is compared with ``f(X_0) + sum f'(X_j) dX_j
    + 1/2 sum f''(X_j) d[X]^c_j + sum_{jumps} (f(X_s) - f(X_s-) - f'(X_s-) dX_s)``.

    The continuous quadratic-variation increment ``d[X]^c_j`` is
    ``(dX_j)^2`` minus the squared jumps inside step ``j`` for ``qv="grid"``,
    and the model value ``sigma2 * dt`` for ``qv="model"``.  With the grid
    version the formula is exact for quadratic ``f``.
    """
    if qv not in ("grid", "model"):
        raise ValueError(f"qv must be 'grid' or 'model', got {qv!r}")
    rows = []
    for p in _paths(X):
        x = p.values
        dx = np.diff(x)
        corr, sq = _ito_jump_terms(p, f, df)
        if qv == "grid":
            dqc = dx * dx - sq
        else:
            dqc = np.full(len(dx), p.sigma2 * p.grid.dt)
        xl = x[:-1]
        steps = df(xl) * dx + 0.5 * d2f(xl) * dqc
        rhs = _cumulative(f(x[0]), steps) + corr
        rows.append(np.max(np.abs(f(x) - rhs)))
    return np.array(rows) if isinstance(X, PathSet) else rows[0]


def shift_integral_residual(H: Integrand, X: Path, S) -> np.ndarray:
    """Compare ``int_(S, S+t] H dX`` with the integral of the shifted problem.

    ``S`` is a node index (scalar or one per path).  The shifted problem
    integrates ``u -> H(S + u)`` against ``X(S + u) - X(S)`` from zero.
    Returns ``max_t |(I(S+t) - I(S)) - J(t)|`` per path.
    """
    h = np.broadcast_to(_node_values(H, X.grid), X.values.shape)
    x = X.values
    I = left_riemann_integral(h, X).values
    n = X.grid.n_steps
    S_arr = np.broadcast_to(np.asarray(S, dtype=int), x.shape[:-1])
    if np.any(S_arr < 0) or np.any(S_arr > n):
        raise ValueError(f"stopping node outside [0, {n}]")
    h2, x2, I2 = np.atleast_2d(h), np.atleast_2d(x), np.atleast_2d(I)
    out = []
    for i, s in enumerate(np.atleast_1d(S_arr)):
        xbar = x2[i, s:] - x2[i, s]
        J = _cumulative(0.0, h2[i, s:-1] * np.diff(xbar)) if s < n else np.zeros(1)
        out.append(np.max(np.abs((I2[i, s:] - I2[i, s]) - J)))
    return np.array(out) if x.ndim == 2 else out[0]
