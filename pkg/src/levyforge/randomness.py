"""Reproducible per-path random streams and the elementary samplers.

Every path ``i`` of a run with root seed ``s`` draws from a Philox stream
keyed by ``SeedSequence([s, i, sub])``.  The sequence of path ``i`` therefore
does not depend on how many paths exist or on the order (or worker) in which
paths are generated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "DIFFUSION",
    "JUMPS",
    "Dirac",
    "Gaussian",
    "JumpLaw",
    "RngStream",
    "TwoPoint",
    "Uniform",
    "make_stream",
    "sample_exponential",
    "sample_jump",
    "sample_normal",
]

_SEED_MASK = (1 << 64) - 1

# fixed sub-indices so that adding jumps never perturbs the Brownian draws
DIFFUSION = 0
JUMPS = 1


class RngStream:
    """Single-consumer random stream for one path.

    Parameters
    ----------
    root_seed : int
        Run seed, reduced modulo 2**64.
    path_index : int
        Non-negative path number.
    substream : int, optional
        Sub-index used to split one path's randomness into independent parts.
    """

    def __init__(self, root_seed: int, path_index: int, substream: int = 0):
        if path_index < 0:
            raise ValueError(f"path_index must be non-negative, got {path_index}")
        if substream < 0:
            raise ValueError(f"substream must be non-negative, got {substream}")
        self.root_seed = int(root_seed) & _SEED_MASK
        self.path_index = int(path_index)
        self.substream = int(substream)
        seq = np.random.SeedSequence([self.root_seed, self.path_index, self.substream])
        self._gen = np.random.Generator(np.random.Philox(seq))

    def __repr__(self) -> str:
        return (
            f"RngStream(root_seed={self.root_seed}, path_index={self.path_index}, "
            f"substream={self.substream})"
        )

    def split(self, substream: int) -> "RngStream":
        """Independent stream for the same (seed, path) with another sub-index."""
        return RngStream(self.root_seed, self.path_index, substream)

    def uniform_open0(self, size=None):
        """Uniform draws on (0, 1], so that ``log`` is always finite."""
        return 1.0 - self._gen.random(size)

    def standard_normal(self, size=None):
        return self._gen.standard_normal(size)

    def normal(self, mean: float = 0.0, std: float = 1.0, size=None):
        if std < 0:
            raise ValueError(f"std must be >= 0, got {std}")
        z = self._gen.standard_normal(size)
        return mean + std * z

    def exponential(self, rate: float, size=None):
        if not rate > 0:
            raise ValueError(f"rate must be > 0, got {rate}")
        return -np.log(self.uniform_open0(size)) / rate

    def jump(self, law: "JumpLaw", size=None):
        return law.sample(self, size)


def make_stream(root_seed: int, path_index: int) -> RngStream:
    return RngStream(root_seed, path_index)


def sample_normal(s: RngStream, mean: float, std: float) -> float:
    return float(s.normal(mean, std))


def sample_exponential(s: RngStream, rate: float) -> float:
    """One Exp(rate) draw by inverse transform, ``-log(U) / rate`` with U in (0, 1]."""
    return float(s.exponential(rate))


def sample_jump(s: RngStream, law: "JumpLaw") -> float:
    return float(law.sample(s))


# ---------------------------------------------------------------------------
# jump-size laws
#
# Each law knows how to sample itself and its closed-form moments.  The
# truncated moments are what the triplet algebra in ``levy_model`` needs.


class JumpLaw:
    """Base class of the supported (normalized) jump-size distributions."""

    kind: str = ""
    # False for laws whose draws consume no randomness
    random: bool = True

    def sample(self, s: RngStream, size=None):
        raise NotImplementedError

    def moment(self, p: int) -> float:
        """E[Z**p] for p in {1, 2}."""
        raise NotImplementedError

    def abs_moment(self) -> float:
        """E|Z|."""
        raise NotImplementedError

    def truncated_mean(self, r: float) -> float:
        """E[Z 1{|Z| <= r}]."""
        raise NotImplementedError

    def cf(self, u):
        """Characteristic function E[exp(iuZ)]."""
        raise NotImplementedError

    def pdf(self, x):
        """Density, only for absolutely continuous laws."""
        raise TypeError(f"{type(self).__name__} has no density")

    @property
    def support(self) -> tuple[float, float]:
        raise NotImplementedError

    def params(self) -> dict:
        raise NotImplementedError

    def to_dict(self) -> dict:
        return {"kind": self.kind, "params": self.params()}

    @staticmethod
    def from_dict(d: dict) -> "JumpLaw":
        kind = d.get("kind")
        params = dict(d.get("params", {}))
        try:
            cls = _LAWS[kind]
        except KeyError:
            raise ValueError(f"unknown jump law kind {kind!r}") from None
        return cls(**params)


@dataclass(frozen=True)
class Dirac(JumpLaw):
    a: float = 1.0
    kind = "dirac"
    random = False

    def __post_init__(self):
        if self.a == 0 or not math.isfinite(self.a):
            raise ValueError("Dirac jump size must be finite and nonzero")

    def sample(self, s, size=None):
        if size is None:
            return self.a
        return np.full(size, float(self.a))

    def moment(self, p):
        _check_p(p)
        return float(self.a) ** p

    def abs_moment(self):
        return abs(self.a)

    def truncated_mean(self, r):
        return float(self.a) if abs(self.a) <= r else 0.0

    def cf(self, u):
        return np.exp(1j * np.asarray(u, dtype=float) * self.a)

    @property
    def support(self):
        return (self.a, self.a)

    def params(self):
        return {"a": self.a}


@dataclass(frozen=True)
class Uniform(JumpLaw):
    a: float = -1.0
    b: float = 1.0
    kind = "uniform"

    def __post_init__(self):
        if not self.a < self.b:
            raise ValueError(f"Uniform requires a < b, got a={self.a}, b={self.b}")

    def sample(self, s, size=None):
        u = s._gen.random(size)
        return self.a + (self.b - self.a) * u

    def moment(self, p):
        _check_p(p)
        a, b = self.a, self.b
        return (b ** (p + 1) - a ** (p + 1)) / ((p + 1) * (b - a))

    def abs_moment(self):
        a, b = self.a, self.b
        if a >= 0:
            return (a + b) / 2
        if b <= 0:
            return -(a + b) / 2
        return (a * a + b * b) / (2 * (b - a))

    def truncated_mean(self, r):
        lo, hi = max(self.a, -r), min(self.b, r)
        if lo >= hi:
            return 0.0
        return (hi * hi - lo * lo) / (2 * (self.b - self.a))

    def cf(self, u):
        u = np.asarray(u, dtype=float)
        a, b = self.a, self.b
        out = np.ones(u.shape, dtype=complex)
        nz = u != 0
        un = u[nz]
        out[nz] = (np.exp(1j * un * b) - np.exp(1j * un * a)) / (1j * un * (b - a))
        return out if out.ndim else out[()]

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.where((x >= self.a) & (x <= self.b), 1.0 / (self.b - self.a), 0.0)

    @property
    def support(self):
        return (self.a, self.b)

    def params(self):
        return {"a": self.a, "b": self.b}


@dataclass(frozen=True)
class TwoPoint(JumpLaw):
    """Jumps of size +a or -a with probability 1/2 each."""

    a: float = 1.0
    kind = "two_point"

    def __post_init__(self):
        if self.a == 0 or not math.isfinite(self.a):
            raise ValueError("TwoPoint magnitude must be finite and nonzero")

    def sample(self, s, size=None):
        m = abs(self.a)
        u = s._gen.random(size)
        if size is None:
            return -m if u < 0.5 else m
        return np.where(u < 0.5, -m, m)

    def moment(self, p):
        _check_p(p)
        return 0.0 if p == 1 else float(self.a) ** 2

    def abs_moment(self):
        return abs(self.a)

    def truncated_mean(self, r):
        return 0.0

    def cf(self, u):
        return np.cos(np.asarray(u, dtype=float) * self.a) + 0j

    @property
    def support(self):
        return (-abs(self.a), abs(self.a))

    def params(self):
        return {"a": self.a}


@dataclass(frozen=True)
class Gaussian(JumpLaw):
    """Centred normal jumps with standard deviation ``s``."""

    s: float = 1.0
    kind = "gaussian"

    def __post_init__(self):
        if not self.s > 0:
            raise ValueError(f"Gaussian jump std must be > 0, got {self.s}")

    def sample(self, stream, size=None):
        return self.s * stream._gen.standard_normal(size)

    def moment(self, p):
        _check_p(p)
        return 0.0 if p == 1 else float(self.s) ** 2

    def abs_moment(self):
        return self.s * math.sqrt(2 / math.pi)

    def truncated_mean(self, r):
        return 0.0

    def cf(self, u):
        u = np.asarray(u, dtype=float)
        return np.exp(-0.5 * (self.s * u) ** 2) + 0j

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.exp(-0.5 * (x / self.s) ** 2) / (self.s * math.sqrt(2 * math.pi))

    @property
    def support(self):
        return (-math.inf, math.inf)

    def params(self):
        return {"s": self.s}


def _check_p(p):
    if p not in (1, 2):
        raise ValueError(f"only moments p in {{1, 2}} are supported, got {p}")


_LAWS = {cls.kind: cls for cls in (Dirac, Uniform, TwoPoint, Gaussian)}
