"""Càdlàg sample paths on an equidistant grid with exact jump records.

Paths are stored as node values (right-continuous convention) plus the exact
time and size of every jump.  Jump arrivals are generated as one global
stream of exponential interarrival times per path; a step may contain any
number of jumps.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Iterator, Sequence

import numpy as np

from .levy_model import (
    LevyTriplet,
    brownian_triplet,
    compound_poisson_triplet,
    fv_drift,
    poisson_triplet,
)
from .randomness import DIFFUSION, JUMPS, JumpLaw, RngStream

__all__ = [
    "MAX_EVENTS",
    "PathSet",
    "SamplePath",
    "TimeGrid",
    "compensate",
    "first_jump_node",
    "jump_count",
    "simulate_bm_drift",
    "simulate_compound_poisson",
    "simulate_jump_diffusion",
    "simulate_levy",
    "simulate_poisson",
]

# per-path guard on the number of jump events
MAX_EVENTS = 1_000_000
JUMP_SIZES = 2


@dataclass(frozen=True)
class TimeGrid:
    """Equidistant grid ``tau_k = k * dt`` on ``[0, horizon]``."""

    horizon: float
    dt: float
    n_steps: int = field(init=False)

    def __post_init__(self):
        if not (self.horizon > 0 and math.isfinite(self.horizon)):
            raise ValueError(f"horizon must be positive and finite, got {self.horizon}")
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ValueError(f"dt must be positive and finite, got {self.dt}")
        n = round(self.horizon / self.dt)
        if n < 1 or abs(n * self.dt - self.horizon) > 1e-9 * self.horizon:
            raise ValueError(
                f"dt={self.dt} does not partition horizon={self.horizon} into whole steps"
            )
        object.__setattr__(self, "n_steps", int(n))

    @cached_property
    def times(self) -> np.ndarray:
        t = np.arange(self.n_steps + 1, dtype=float) * self.dt
        t[-1] = self.horizon
        t.setflags(write=False)
        return t

    def node(self, t: float) -> int:
        """Index of the node at time ``t``; ``t`` must lie on the grid."""
        k = round(t / self.dt)
        if k < 0 or k > self.n_steps or abs(k * self.dt - t) > 1e-9 * max(1.0, abs(t)):
            raise ValueError(f"t={t} is not a node of {self}")
        return int(k)

    def coarsen(self, factor: int) -> "TimeGrid":
        if factor < 1 or self.n_steps % factor:
            raise ValueError(f"cannot coarsen {self.n_steps} steps by {factor}")
        return TimeGrid(self.horizon, self.dt * factor)

    def __len__(self) -> int:
        return self.n_steps + 1


@dataclass(frozen=True, eq=False)
class SamplePath:
    """One càdlàg path: node values plus exact jump events.

    ``triplet`` describes the generating Lévy process (after any
    compensation) and supplies the drift rate and Gaussian variance that
    cannot be read off a discretely observed path.
    """

    grid: TimeGrid
    values: np.ndarray
    jump_times: np.ndarray
    jump_sizes: np.ndarray
    triplet: LevyTriplet | None = None

    @property
    def n_jumps(self) -> int:
        return len(self.jump_times)

    @property
    def sigma2(self) -> float:
        return 0.0 if self.triplet is None else self.triplet.sigma2

    @property
    def drift(self) -> float:
        """Drift rate of the finite-variation continuous part."""
        if self.triplet is None:
            raise ValueError("path carries no model metadata")
        return fv_drift(self.triplet)

    def event_nodes(self) -> np.ndarray:
        """For every jump, the index of the first node at or after it."""
        return np.searchsorted(self.grid.times, self.jump_times, side="left")

    def continuous_part(self) -> np.ndarray:
        """Node values with all jumps up to each node removed."""
        dep = np.bincount(self.event_nodes(), weights=self.jump_sizes,
                          minlength=len(self.grid))
        return self.values - np.cumsum(dep)

    def left_limits(self) -> np.ndarray:
        """X(tau_k-) at the nodes (differs from X(tau_k) only for jumps on a node)."""
        on_node = np.isin(self.jump_times, self.grid.times)
        if not on_node.any():
            return self.values.copy()
        idx = np.searchsorted(self.grid.times, self.jump_times[on_node])
        dep = np.bincount(idx, weights=self.jump_sizes[on_node], minlength=len(self.grid))
        return self.values - dep

    def _at(self, s: np.ndarray, side: str) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        cont = np.interp(s, self.grid.times, self.continuous_part())
        csum = np.concatenate(([0.0], np.cumsum(self.jump_sizes)))
        return cont + csum[np.searchsorted(self.jump_times, s, side=side)]

    def value_at(self, s) -> np.ndarray:
        """X(s) off the grid: continuous part interpolated linearly, jumps exact."""
        return self._at(s, "right")

    def left_limit_at(self, s) -> np.ndarray:
        """X(s-), i.e. :meth:`value_at` without a jump located exactly at ``s``."""
        return self._at(s, "left")


@dataclass(frozen=True, eq=False)
class PathSet:
    """``n_paths`` independent paths on one grid; path ``i`` uses stream (seed, i)."""

    grid: TimeGrid
    values: np.ndarray
    jump_times: tuple[np.ndarray, ...]
    jump_sizes: tuple[np.ndarray, ...]
    seed: int = 0
    triplet: LevyTriplet | None = None

    def __len__(self) -> int:
        return self.values.shape[0]

    @property
    def n_paths(self) -> int:
        return len(self)

    def __getitem__(self, i: int) -> SamplePath:
        return SamplePath(self.grid, self.values[i], self.jump_times[i],
                          self.jump_sizes[i], self.triplet)

    def __iter__(self) -> Iterator[SamplePath]:
        return (self[i] for i in range(len(self)))

    def at(self, t: float) -> np.ndarray:
        """Values of all paths at grid time ``t``."""
        return self.values[:, self.grid.node(t)]

    def coarsen(self, factor: int) -> "PathSet":
        """Same paths observed on every ``factor``-th node (increments summed)."""
        return replace(self, grid=self.grid.coarsen(factor),
                       values=np.ascontiguousarray(self.values[:, ::factor]))

    def increments(self) -> np.ndarray:
        return np.diff(self.values, axis=1)


def _poisson_arrivals(stream: RngStream, lam: float, horizon: float) -> np.ndarray:
    if lam == 0:
        return np.empty(0)
    m = lam * horizon
    chunk = int(m + 5 * math.sqrt(m) + 10)
    arrivals = np.cumsum(stream.exponential(lam, chunk))
    while arrivals[-1] <= horizon:
        if len(arrivals) > MAX_EVENTS:
            raise RuntimeError(f"more than {MAX_EVENTS} jumps on one path")
        more = arrivals[-1] + np.cumsum(stream.exponential(lam, chunk))
        arrivals = np.concatenate((arrivals, more))
    return arrivals[arrivals <= horizon]


def _one_path(grid: TimeGrid, t: LevyTriplet, drift: float, seed: int, i: int):
    n = grid.n_steps
    inc = np.full(n, drift * grid.dt)
    if t.sigma2 > 0:
        inc += math.sqrt(t.sigma2 * grid.dt) * RngStream(seed, i, DIFFUSION).standard_normal(n)
    values = np.empty(n + 1)
    values[0] = 0.0
    np.cumsum(inc, out=values[1:])

    times = _poisson_arrivals(RngStream(seed, i, JUMPS), t.intensity, grid.horizon)
    if len(times):
        law = t.jump_law
        size_stream = RngStream(seed, i, JUMP_SIZES) if law.random else None
        sizes = np.asarray(law.sample(size_stream, len(times)), dtype=float)
        idx = np.searchsorted(grid.times, times, side="left")
        values += np.cumsum(np.bincount(idx, weights=sizes, minlength=n + 1))
    else:
        sizes = np.empty(0)
    return values, times, sizes


def simulate_levy(grid: TimeGrid, n: int, t: LevyTriplet, seed: int = 0, *,
                  drift: float | None = None, workers: int = 1) -> PathSet:
    """Simulate ``n`` paths of ``drift * tau + sigma W + compound Poisson``.

    ``drift`` defaults to the finite-variation drift of ``t``.  Paths are
    generated independently, so any ``workers`` count gives identical output.
    """
    if n < 1:
        raise ValueError(f"need at least one path, got {n}")
    if drift is None:
        drift = fv_drift(t)

    def block(idx: Sequence[int]):
        return [_one_path(grid, t, drift, seed, i) for i in idx]

    if workers <= 1:
        rows = block(range(n))
    else:
        chunks = [range(lo, min(lo + 256, n)) for lo in range(0, n, 256)]
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = [r for part in pool.map(block, chunks) for r in part]

    values = np.vstack([r[0] for r in rows])
    return PathSet(grid, values, tuple(r[1] for r in rows), tuple(r[2] for r in rows),
                   int(seed), t)


def simulate_bm_drift(grid: TimeGrid, n: int, b: float, sigma: float, seed: int = 0,
                      workers: int = 1) -> PathSet:
    if sigma < 0:
        raise ValueError(f"sigma must be >= 0, got {sigma}")
    return simulate_levy(grid, n, brownian_triplet(b, sigma * sigma), seed, workers=workers)


def simulate_poisson(grid: TimeGrid, n: int, lam: float, seed: int = 0,
                     workers: int = 1) -> PathSet:
    if lam < 0:
        raise ValueError(f"lambda must be >= 0, got {lam}")
    return simulate_levy(grid, n, poisson_triplet(lam), seed, workers=workers)


def simulate_compound_poisson(grid: TimeGrid, n: int, lam: float, law: JumpLaw,
                              seed: int = 0, workers: int = 1) -> PathSet:
    if lam < 0:
        raise ValueError(f"lambda must be >= 0, got {lam}")
    return simulate_levy(grid, n, compound_poisson_triplet(lam, law), seed, workers=workers)


def simulate_jump_diffusion(grid: TimeGrid, n: int, t: LevyTriplet, seed: int = 0,
                            workers: int = 1) -> PathSet:
    return simulate_levy(grid, n, t, seed, workers=workers)


def compensate(ps: PathSet, rate: float) -> PathSet:
    """Subtract ``rate * t`` from every path; jump records are unchanged."""
    if rate == 0:
        return ps
    triplet = ps.triplet
    if triplet is not None:
        triplet = replace(triplet, b=triplet.b - rate)
    return replace(ps, values=ps.values - rate * ps.grid.times, triplet=triplet)


def jump_count(p: SamplePath, t: float, threshold: float = 0.0) -> int:
    """Number of jumps in [0, t] with ``|size| >= threshold``."""
    if t > p.grid.horizon:
        raise ValueError(f"t={t} beyond horizon {p.grid.horizon}")
    if threshold < 0:
        raise ValueError("threshold must be >= 0")
    mask = (p.jump_times <= t) & (np.abs(p.jump_sizes) >= threshold)
    return int(np.count_nonzero(mask))


def first_jump_node(p: SamplePath) -> int:
    """First node at or after the first jump; the last node if there is no jump.

    Whether this node has been reached is known from the path up to it, so
    it is a valid stopping index.
    """
    if p.n_jumps == 0:
        return p.grid.n_steps
    return int(np.searchsorted(p.grid.times, p.jump_times[0], side="left"))
