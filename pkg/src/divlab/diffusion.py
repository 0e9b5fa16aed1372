"""Closed-form dividend problem for the diffusion approximation.

Uncontrolled surplus follows ``theta lam E[Y] dt + sqrt(lam E[Y^2]) dB``. The optimal
policy is a barrier at ``b_D`` and the value function is

    V_D(x) = (exp(g1 x) - exp(-g2 x)) / C          for x <= b_D
    V_D(x) = theta lam E[Y] / delta + (x - b_D)    for x >  b_D
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .ide import ExpSumSegment, PiecewiseValueFunction, affine_segment
from .model import CLParameters


def _roots(drift: float, variance: float, delta: float):
    """Positive roots (g1, g2) of 0.5 var r^2 + drift r - delta = 0 at r = g1 and r = -g2."""
    # larger-magnitude root first, the other from the product c/a
    disc = math.sqrt(drift * drift + 2.0 * delta * variance)
    q = -0.5 * (drift + disc)
    g2 = -q / (0.5 * variance)
    g1 = delta / -q
    return g1, g2


@dataclass(frozen=True)
class DiffusionSolution:
    gamma1: float
    gamma2: float
    b_D: float
    C: float
    params: CLParameters

    @property
    def value_at_barrier(self) -> float:
        return self.params.drift / self.params.delta

    def extended_terms(self):
        """V_D below the barrier as an exponential sum valid on the whole real line."""
        return [(1.0 / self.C, self.gamma1), (-1.0 / self.C, -self.gamma2)]

    def __call__(self, x):
        return vd_eval(self, x)

    def derivative(self, x, order: int = 1):
        return vd_derivatives(self, x)[order - 1]

    def as_piecewise(self, shift: float = 0.0) -> PiecewiseValueFunction:
        """V_D + shift as a two-segment piecewise function."""
        terms = [(a, al) for a, al in self.extended_terms()]
        if shift:
            terms.append((shift, 0.0))
        return PiecewiseValueFunction((
            ExpSumSegment(0.0, self.b_D, terms=tuple(terms)),
            affine_segment(self.b_D, math.inf, self.value_at_barrier - self.b_D + shift, 1.0),
        ))


def solve_diffusion(params: CLParameters) -> DiffusionSolution:
    g1, g2 = _roots(params.drift, params.variance, params.delta)
    b_D = 2.0 / (g1 + g2) * math.log(g2 / g1)
    C = (g1 + g2) * (g2 / g1) ** ((g1 - g2) / (g1 + g2))
    return DiffusionSolution(g1, g2, b_D, C, params)


def vd_eval(sol: DiffusionSolution, x):
    x = np.asarray(x, dtype=float)
    below = (np.exp(sol.gamma1 * np.minimum(x, sol.b_D)) - np.exp(-sol.gamma2 * np.minimum(x, sol.b_D))) / sol.C
    above = sol.value_at_barrier + (x - sol.b_D)
    out = np.where(x <= sol.b_D, below, above)
    return float(out) if out.ndim == 0 else out


def vd_derivatives(sol: DiffusionSolution, x):
    """(V_D', V_D'') of the active branch."""
    x = np.asarray(x, dtype=float)
    xc = np.minimum(x, sol.b_D)
    g1, g2, C = sol.gamma1, sol.gamma2, sol.C
    d1 = np.where(x <= sol.b_D, (g1 * np.exp(g1 * xc) + g2 * np.exp(-g2 * xc)) / C, 1.0)
    d2 = np.where(x <= sol.b_D, (g1**2 * np.exp(g1 * xc) - g2**2 * np.exp(-g2 * xc)) / C, 0.0)
    if d1.ndim == 0:
        return float(d1), float(d2)
    return d1, d2
