"""Optimal dividends in the scaled Cramér-Lundberg model and its diffusion limit."""

from .diffusion import DiffusionSolution, solve_diffusion
from .errors import (
    CapabilityError,
    ConvergenceError,
    DivergenceError,
    DivlabError,
    IncompleteBandError,
    InvalidBarrierError,
    StructuralError,
)
from .ide import ExpSumSegment, PiecewiseValueFunction, eval_Fn, eval_Gn
from .model import CLParameters, ClaimDistribution, ScaledParameters, example_parameters, scale
from .strategy import BandStrategy, barrier_payoff, construct_band_value, exp_optimal_barrier

__version__ = "0.1.0"

__all__ = [
    "BandStrategy",
    "CLParameters",
    "CapabilityError",
    "ClaimDistribution",
    "ConvergenceError",
    "DiffusionSolution",
    "DivergenceError",
    "DivlabError",
    "ExpSumSegment",
    "IncompleteBandError",
    "InvalidBarrierError",
    "PiecewiseValueFunction",
    "ScaledParameters",
    "StructuralError",
    "barrier_payoff",
    "construct_band_value",
    "eval_Fn",
    "eval_Gn",
    "example_parameters",
    "exp_optimal_barrier",
    "scale",
    "solve_diffusion",
]
