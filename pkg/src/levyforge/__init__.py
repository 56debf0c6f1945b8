"""Simulation and discrete stochastic calculus for finite-intensity Lévy processes."""

__version__ = "0.1.0"

from .levy_model import (
    LevyTriplet,
    angle_bracket_rate,
    canonical_drift,
    characteristic_exponent,
    fv_drift,
    is_martingale,
    retruncate,
)
from .paths import (
    PathSet,
    SamplePath,
    TimeGrid,
    compensate,
    jump_count,
    simulate_bm_drift,
    simulate_compound_poisson,
    simulate_jump_diffusion,
    simulate_levy,
    simulate_poisson,
)
from .randomness import Dirac, Gaussian, RngStream, TwoPoint, Uniform, make_stream

__all__ = [
    "Dirac",
    "Gaussian",
    "LevyTriplet",
    "PathSet",
    "RngStream",
    "SamplePath",
    "TimeGrid",
    "TwoPoint",
    "Uniform",
    "angle_bracket_rate",
    "canonical_drift",
    "characteristic_exponent",
    "compensate",
    "fv_drift",
    "is_martingale",
    "jump_count",
    "make_stream",
    "retruncate",
    "simulate_bm_drift",
    "simulate_compound_poisson",
    "simulate_jump_diffusion",
    "simulate_levy",
    "simulate_poisson",
]
