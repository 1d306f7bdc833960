"""Traveling fronts of the hyperbolic Fisher-KPP equation: profiles, simulation and stability."""

from .dispersion import (
    Regime,
    WaveParameters,
    char_roots_one,
    char_roots_zero,
    classify,
    minimal_speed,
    theta,
    wave_parameters,
    weight_slope,
)
from .growth import GrowthFunction, evaluate, from_callables, logistic, validate
from .profile import FrontKind, FrontProfile, NoFrontError, ProfileOptions, build, build_minimal
from .solver import GridSpec, KineticState, density, current, init_step_state, run, step

__version__ = "0.1.0"

__all__ = [
    "FrontKind", "FrontProfile", "GridSpec", "GrowthFunction", "KineticState", "NoFrontError",
    "ProfileOptions", "Regime", "WaveParameters", "build", "build_minimal", "char_roots_one",
    "char_roots_zero", "classify", "current", "density", "evaluate", "from_callables",
    "init_step_state", "logistic", "minimal_speed", "run", "step", "theta", "validate",
    "wave_parameters", "weight_slope",
]
