"""Monte Carlo checks of closed-form identities for simulated paths.

Every check returns :class:`McReport` objects whose verdict is the plain
rule ``|estimate - target| <= multiple * standard_error``.  With
``multiple = 3`` a correct implementation fails a single check with
probability of roughly 0.3%.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .integrals import quadratic_covariation, stieltjes_integral
from .levy_model import LevyTriplet, angle_bracket_rate, characteristic_exponent, is_martingale
from .paths import PathSet, TimeGrid, simulate_compound_poisson
from .randomness import Dirac, JumpLaw

__all__ = [
    "Histogram",
    "McReport",
    "cf_check",
    "compensator_check",
    "doleans_density_check",
    "invariant_histogram",
    "martingale_check",
    "mc_mean_ci",
    "mean_check",
    "poisson_pmf_check",
    "qv_check",
    "qv_grid_convergence",
]

DEFAULT_MULTIPLE = 3.0


@dataclass(frozen=True)
class McReport:
    check_id: str
    estimate: complex | float
    standard_error: complex | float
    target: complex | float
    confidence_multiple: float = DEFAULT_MULTIPLE

    def __post_init__(self):
        se = self.standard_error
        parts = (se.real, se.imag) if isinstance(se, complex) else (se,)
        if any(p < 0 or math.isnan(p) for p in parts):
            raise ValueError(f"standard error must be >= 0, got {se}")

    @property
    def passed(self) -> bool:
        """Componentwise band test for complex values."""
        k = self.confidence_multiple
        if isinstance(self.estimate, complex) or isinstance(self.target, complex):
            est, tgt = complex(self.estimate), complex(self.target)
            se = complex(self.standard_error)
            return (abs(est.real - tgt.real) <= k * se.real
                    and abs(est.imag - tgt.imag) <= k * se.imag)
        return abs(self.estimate - self.target) <= k * self.standard_error

    def record(self) -> dict:
        def enc(v):
            return [v.real, v.imag] if isinstance(v, complex) else float(v)

        return {
            "check_id": self.check_id,
            "estimate": enc(self.estimate),
            "se": enc(self.standard_error),
            "target": enc(self.target),
            "multiple": self.confidence_multiple,
            "pass": self.passed,
        }

    def line(self) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        return (f"{verdict} {self.check_id}: estimate={_fmt(self.estimate)} "
                f"target={_fmt(self.target)} se={_fmt(self.standard_error)} "
                f"k={self.confidence_multiple:g}")


def _fmt(v) -> str:
    if isinstance(v, complex):
        return f"{v.real:.6g}{v.imag:+.6g}i"
    return f"{v:.6g}"


@dataclass(frozen=True)
class Histogram:
    edges: np.ndarray
    counts: np.ndarray
    total: int


def mc_mean_ci(samples: Iterable[float]) -> tuple[float, float]:
    """Sample mean and its standard error ``s / sqrt(n)`` (unbiased ``s``)."""
    x = np.asarray(samples, dtype=float).ravel()
    if x.size < 2:
        raise ValueError("need at least two samples")
    mean = float(x.mean())
    if np.all(x == x[0]):
        return float(x[0]), 0.0
    return mean, float(x.std(ddof=1) / math.sqrt(x.size))


def _report(check_id, samples, target, multiple) -> McReport:
    est, se = mc_mean_ci(samples)
    return McReport(check_id, est, se, float(target), multiple)


def mean_check(ps: PathSet, time: float, target: float, check_id: str = "mean",
               multiple: float = DEFAULT_MULTIPLE) -> McReport:
    return _report(f"{check_id}[t={time:g}]", ps.at(time), target, multiple)


def poisson_pmf_check(ps: PathSet, lam: float, t: float, ns: Sequence[int] = range(6),
                      multiple: float = DEFAULT_MULTIPLE) -> list[McReport]:
    """Empirical ``P(N_t = n)`` against ``exp(-lam t) (lam t)^n / n!``.

    The standard error is ``sqrt(p (1 - p) / paths)`` with ``p`` the target.
    """
    counts = np.rint(ps.at(t)).astype(np.int64)
    n_paths = counts.size
    out = []
    for n in ns:
        p = math.exp(-lam * t) * (lam * t) ** n / math.factorial(n)
        freq = float(np.count_nonzero(counts == n)) / n_paths
        se = math.sqrt(p * (1 - p) / n_paths)
        out.append(McReport(f"poisson_pmf[n={n}]", freq, se, p, multiple))
    return out


def cf_check(ps: PathSet, triplet: LevyTriplet, time: float, u_list: Sequence[float],
             multiple: float = DEFAULT_MULTIPLE) -> list[McReport]:
    """Empirical ``E exp(iuX_t)`` against ``exp(t psi(u))``, componentwise."""
    x = ps.at(time)
    n = x.size
    out = []
    for u in u_list:
        c, s = np.cos(u * x), np.sin(u * x)
        est = complex(c.mean(), s.mean())
        se = complex(c.std(ddof=1) / math.sqrt(n), s.std(ddof=1) / math.sqrt(n))
        target = complex(np.exp(time * characteristic_exponent(triplet, u)))
        out.append(McReport(f"cf[u={u:g},t={time:g}]", est, se, target, multiple))
    return out


def martingale_check(ps: PathSet, times: Sequence[float],
                     multiple: float = DEFAULT_MULTIPLE) -> list[McReport]:
    if ps.triplet is not None and not is_martingale(ps.triplet):
        raise ValueError("paths are not driven by a martingale triplet")
    return [mean_check(ps, t, 0.0, "martingale", multiple) for t in times]


def qv_check(ps: PathSet, triplet: LevyTriplet | None = None, T: float | None = None,
             multiple: float = DEFAULT_MULTIPLE) -> McReport:
    """Mean of the exact ``[L]_T`` against ``<L>_T = mu T``."""
    triplet = triplet or ps.triplet
    T = ps.grid.horizon if T is None else T
    qv = quadratic_covariation(ps, ps, estimator="exact").values[:, ps.grid.node(T)]
    return _report(f"qv[T={T:g}]", qv, angle_bracket_rate(triplet) * T, multiple)


def qv_grid_convergence(ps: PathSet, factors: Sequence[int] = (4, 2, 1)) -> list[float]:
    """RMS distance between grid and exact ``[L]_T`` on successively finer grids.

    ``ps`` is simulated on the finest grid; coarser grids observe the same
    paths every ``factor``-th node.  Returns one RMS value per factor.
    """
    exact = quadratic_covariation(ps, ps, estimator="exact").final
    out = []
    for f in factors:
        p = ps.coarsen(f) if f > 1 else ps
        grid_qv = quadratic_covariation(p, p, estimator="grid").final
        out.append(float(np.sqrt(np.mean((grid_qv - exact) ** 2))))
    return out


def compensator_check(lam: float, t: float, law: JumpLaw | None = None, *, n_paths: int,
                      seed: int = 0, dt: float | None = None,
                      multiple: float = DEFAULT_MULTIPLE) -> McReport:
    """Mean of ``int_0^t X_{s-} dX_s`` for compound Poisson ``X``.

    The compensator ``lam E[Z] s`` gives the target ``(lam E[Z])^2 t^2 / 2``,
    which is ``lam^2 t^2 / 2`` for a Poisson process.
    """
    law = law or Dirac(1.0)
    grid = TimeGrid(t, dt or t / 100)
    if lam == 0:
        return McReport(f"compensator[t={t:g}]", 0.0, 0.0, 0.0, multiple)
    ps = simulate_compound_poisson(grid, n_paths, lam, law, seed)
    vals = stieltjes_integral(ps, ps, rule="left_limit").final
    target = (lam * law.moment(1)) ** 2 * t * t / 2
    return _report(f"compensator[t={t:g}]", vals, target, multiple)


def doleans_density_check(ps: PathSet, triplet: LevyTriplet | None,
                          rectangles: Sequence[tuple[float, float, float]],
                          multiple: float = DEFAULT_MULTIPLE) -> list[McReport]:
    """Check ``E[1_F ([L]_t - [L]_s)] = mu (t - s) P(F)`` on predictable rectangles.

    Each rectangle is ``(s, t, threshold)`` with ``F = {L_s > threshold}``;
    use ``-inf`` for the whole space and ``+inf`` for the empty event.  The
    target uses the empirical ``P(F)``; the standard error is that of
    ``1_F ([L]_t - [L]_s - mu (t - s))``.
    """
    triplet = triplet or ps.triplet
    mu = angle_bracket_rate(triplet)
    qv = quadratic_covariation(ps, ps, estimator="exact").values
    out = []
    for s, t, thr in rectangles:
        i, j = ps.grid.node(s), ps.grid.node(t)
        ind = (ps.values[:, i] > thr).astype(float)
        incr = ind * (qv[:, j] - qv[:, i])
        est = float(incr.mean())
        target = mu * (t - s) * float(ind.mean())
        _, se = mc_mean_ci(incr - mu * (t - s) * ind)
        out.append(McReport(f"doleans[s={s:g},t={t:g},F=L_s>{thr:g}]", est, se, target,
                            multiple))
    return out


def invariant_histogram(values: PathSet | np.ndarray, tail_start: float, bins: int,
                        times: np.ndarray | None = None) -> Histogram:
    """Histogram of all path values at times ``>= tail_start``, pooled over paths.

    ``values`` is a path set or a 2-D array with matching ``times``.
    """
    if bins < 1:
        raise ValueError("bins must be positive")
    if isinstance(values, PathSet):
        times, arr = values.grid.times, values.values
    else:
        arr = np.asarray(values, dtype=float)
        if times is None:
            raise ValueError("times are required for array input")
    if tail_start >= times[-1]:
        raise ValueError("tail_start must precede the horizon")
    tail = arr[..., np.asarray(times) >= tail_start].ravel()
    tail = tail[np.isfinite(tail)]
    if tail.size == 0:
        raise ValueError("empty tail window")
    counts, edges = np.histogram(tail, bins=bins)
    return Histogram(edges, counts, int(tail.size))

