"""Characteristic triplets of finite-intensity Lévy processes.

A triplet ``(b, sigma2, nu)`` is stored with ``nu = intensity * jump_law`` and
the radial truncation ``h(x) = x 1{|x| <= cutoff}``.  The characteristic
exponent is

    psi(u) = i u b - sigma2 u^2 / 2
             + intensity * E[exp(iuZ) - 1 - iuZ 1{|Z| <= cutoff}],   Z ~ jump_law.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import integrate

from .randomness import Dirac, Gaussian, JumpLaw

__all__ = [
    "LevyTriplet",
    "QuadratureError",
    "angle_bracket_rate",
    "brownian_triplet",
    "canonical_drift",
    "characteristic_exponent",
    "compound_poisson_triplet",
    "fv_drift",
    "is_martingale",
    "jump_law_moment",
    "poisson_triplet",
    "retruncate",
]

MARTINGALE_ATOL = 1e-12
QUAD_ATOL = 1e-10
# Gaussian jump exponent is integrated on [-GAUSS_SPAN * s, GAUSS_SPAN * s]
GAUSS_SPAN = 8.0


class QuadratureError(RuntimeError):
    pass


@dataclass(frozen=True)
class LevyTriplet:
    """Characteristic triplet of a finite-intensity Lévy process.

    Attributes
    ----------
    b : float
        Drift under the truncation ``x 1{|x| <= cutoff}``.
    sigma2 : float
        Gaussian variance rate.
    intensity : float
        Total jump rate ``nu(R)``.
    jump_law : JumpLaw
        Normalized jump law; ignored when ``intensity == 0``.
    cutoff : float
        Truncation radius, canonically 1.
    """

    b: float = 0.0
    sigma2: float = 0.0
    intensity: float = 0.0
    jump_law: JumpLaw = field(default_factory=Dirac)
    cutoff: float = 1.0

    def __post_init__(self):
        for name in ("b", "sigma2", "intensity", "cutoff"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if self.sigma2 < 0:
            raise ValueError(f"sigma2 must be >= 0, got {self.sigma2}")
        if self.intensity < 0:
            raise ValueError(f"intensity must be >= 0, got {self.intensity}")
        if not self.cutoff > 0:
            raise ValueError(f"cutoff must be > 0, got {self.cutoff}")

    @property
    def sigma(self) -> float:
        return math.sqrt(self.sigma2)

    def to_dict(self) -> dict:
        return {
            "b": self.b,
            "sigma2": self.sigma2,
            "lambda": self.intensity,
            "jump_law": self.jump_law.to_dict(),
            "cutoff": self.cutoff,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LevyTriplet":
        law = d.get("jump_law")
        return cls(
            b=float(d.get("b", 0.0)),
            sigma2=float(d.get("sigma2", 0.0)),
            intensity=float(d.get("lambda", 0.0)),
            jump_law=JumpLaw.from_dict(law) if law is not None else Dirac(),
            cutoff=float(d.get("cutoff", 1.0)),
        )


def brownian_triplet(b: float = 0.0, sigma2: float = 1.0) -> LevyTriplet:
    return LevyTriplet(b=b, sigma2=sigma2)


def poisson_triplet(lam: float) -> LevyTriplet:
    """Triplet (lam, 0, lam * delta_1) of a Poisson process under the canonical cutoff."""
    return LevyTriplet(b=lam, intensity=lam, jump_law=Dirac(1.0))


def compound_poisson_triplet(lam: float, law: JumpLaw, cutoff: float = 1.0) -> LevyTriplet:
    # pure-jump process with zero drift in the jumps-only representation
    return LevyTriplet(b=lam * law.truncated_mean(cutoff), intensity=lam, jump_law=law,
                       cutoff=cutoff)


def jump_law_moment(law: JumpLaw, p: int) -> float:
    return law.moment(p)


def _jump_integral_quad(law: JumpLaw, u: float, r: float) -> complex:
    """E[exp(iuZ) - 1 - iuZ 1{|Z| <= r}] by adaptive quadrature of the density."""
    lo, hi = law.support
    if isinstance(law, Gaussian):
        lo, hi = -GAUSS_SPAN * law.s, GAUSS_SPAN * law.s
    pts = [p for p in (-r, r) if lo < p < hi]

    def re(x):
        return law.pdf(x) * (math.cos(u * x) - 1.0)

    def im(x):
        trunc = x if abs(x) <= r else 0.0
        return law.pdf(x) * (math.sin(u * x) - u * trunc)

    parts = []
    for fn in (re, im):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", integrate.IntegrationWarning)
            val, err = integrate.quad(
                fn, lo, hi, points=pts or None, epsabs=QUAD_ATOL, epsrel=0.0, limit=200
            )
        if err > 10 * QUAD_ATOL:
            raise QuadratureError(f"quadrature did not converge at u={u}: err={err:g}")
        parts.append(val)
    return complex(parts[0], parts[1])


def _jump_integral(law: JumpLaw, u: np.ndarray, r: float, method: str) -> np.ndarray:
    if method == "auto":
        method = "quad" if isinstance(law, Gaussian) else "closed"
    if method == "closed":
        return law.cf(u) - 1.0 - 1j * u * law.truncated_mean(r)
    if method == "quad":
        flat = [_jump_integral_quad(law, float(x), r) for x in u.ravel()]
        return np.array(flat, dtype=complex).reshape(u.shape)
    raise ValueError(f"unknown method {method!r}")


def characteristic_exponent(t: LevyTriplet, u, method: str = "auto"):
    """Evaluate psi(u) for scalar or array ``u``.

    ``method`` selects how the jump part is computed: ``"closed"`` uses the
    law's closed form, ``"quad"`` integrates the density (continuous laws
    only) and ``"auto"`` uses quadrature for Gaussian jumps, closed form
    otherwise.
    """
    u_arr = np.asarray(u, dtype=float)
    psi = 1j * u_arr * t.b - 0.5 * t.sigma2 * u_arr**2 + 0j
    if t.intensity > 0:
        psi = psi + t.intensity * _jump_integral(t.jump_law, u_arr, t.cutoff, method)
    # exact zero at the origin, regardless of quadrature noise
    psi = np.where(u_arr == 0, 0j, psi)
    return complex(psi) if np.ndim(psi) == 0 else psi


def retruncate(t: LevyTriplet, new_cutoff: float) -> LevyTriplet:
    """Same process under cutoff ``new_cutoff``; only the drift changes."""
    if not new_cutoff > 0:
        raise ValueError(f"new_cutoff must be > 0, got {new_cutoff}")
    if new_cutoff == t.cutoff:
        return t
    law = t.jump_law
    shift = t.intensity * (law.truncated_mean(new_cutoff) - law.truncated_mean(t.cutoff))
    return replace(t, b=t.b + shift, cutoff=new_cutoff)


def fv_drift(t: LevyTriplet) -> float:
    """Drift of the representation ``drift * t + sigma W + compound Poisson``."""
    return t.b - t.intensity * t.jump_law.truncated_mean(t.cutoff)


def canonical_drift(t: LevyTriplet) -> float:
    """Slope of the predictable part of the canonical decomposition.

    Equals ``b + intensity * E[Z 1{|Z| > cutoff}]``.
    """
    law = t.jump_law
    return t.b + t.intensity * (law.moment(1) - law.truncated_mean(t.cutoff))


def is_martingale(t: LevyTriplet) -> bool:
    return abs(canonical_drift(t)) <= MARTINGALE_ATOL


def angle_bracket_rate(t: LevyTriplet) -> float:
    """Rate ``mu = sigma2 + intensity * E[Z^2]`` so that <L>_t = mu t."""
    if t.intensity == 0:
        return t.sigma2
    return t.sigma2 + t.intensity * t.jump_law.moment(2)

