"""Dividend strategies and their payoff functions in the scaled model.

* ``construct_band_value`` builds the optimal band strategy and value function by the
  band-by-band extension scheme: a pay band ``x + K`` is closed at the level ``b`` for
  which the extension solving G_n = 0 from ``b`` touches slope 1 tangentially; the
  touching point is the top of the next no-pay band.
* ``barrier_payoff`` is the payoff of an arbitrary barrier, ``g_n / g_n'(b)`` below it.
* ``exp_optimal_barrier`` is the closed-form optimal barrier for exponential claims.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from . import ide
from .diffusion import solve_diffusion
from .errors import CapabilityError, IncompleteBandError, InvalidBarrierError
from .ide import ExpSumSegment, PiecewiseValueFunction, affine_segment
from .model import ScaledParameters

MAX_BANDS = 16


@dataclass(frozen=True)
class BandStrategy:
    """Pay intervals ``[lo, hi)`` of the surplus axis; the last one is ``[top_threshold, inf)``.

    Surplus landing inside a pay interval is paid down to its lower end at once and the
    premium is paid out while the surplus sits there.
    """

    pay_intervals: tuple

    def __post_init__(self):
        iv = tuple((float(a), float(b)) for a, b in self.pay_intervals)
        if not iv:
            raise ValueError("a strategy needs at least one pay interval")
        for a, b in iv:
            if not b > a or a < 0:
                raise ValueError(f"bad pay interval [{a}, {b})")
        for (_, b1), (a2, _) in zip(iv, iv[1:]):
            if a2 < b1:
                raise ValueError("pay intervals must be disjoint and ordered")
        if not math.isinf(iv[-1][1]):
            raise ValueError("the last pay interval must be unbounded")
        object.__setattr__(self, "pay_intervals", iv)

    @property
    def top_threshold(self) -> float:
        return self.pay_intervals[-1][0]

    @property
    def thresholds(self) -> list:
        """Finite band edges above 0, in increasing order."""
        edges = {e for iv in self.pay_intervals for e in iv if 0 < e < math.inf}
        return sorted(edges)

    @classmethod
    def barrier(cls, b: float) -> "BandStrategy":
        return cls(((b, math.inf),))

    def to_dict(self) -> dict:
        return {"pay_intervals": [[a, None if math.isinf(b) else b] for a, b in self.pay_intervals]}

    @classmethod
    def from_dict(cls, d) -> "BandStrategy":
        if set(d) - {"pay_intervals"}:
            raise ValueError(f"unknown strategy field(s): {sorted(set(d) - {'pay_intervals'})}")
        return cls(tuple((a, math.inf if b is None else b) for a, b in d["pay_intervals"]))


@dataclass(frozen=True)
class BandValue:
    value: PiecewiseValueFunction
    strategy: BandStrategy
    pays_at_zero: bool
    x_max: float
    diagnostics: dict = field(default_factory=dict)

    def __iter__(self):
        yield self.value
        yield self.strategy


# ---------------------------------------------------------------------------
# helpers on a single exponential-sum segment


def _scan(seg: ExpSumSegment, lo: float, hi: float, step: float):
    m = max(int(math.ceil((hi - lo) / step)), 16)
    return np.linspace(lo, hi, m + 1)


def _min_slope(seg: ExpSumSegment, lo: float, hi: float, step: float):
    """(argmin, min) of seg' over [lo, hi], refined where seg'' changes sign."""
    grid = _scan(seg, lo, hi, step)
    d1 = seg.derivative(grid, 1)
    i = int(np.argmin(d1))
    best_x, best = float(grid[i]), float(d1[i])
    if 0 < i < len(grid) - 1:
        try:
            xr = optimize.brentq(lambda t: float(seg.derivative(t, 2)), grid[i - 1], grid[i + 1], xtol=1e-13)
            v = float(seg.derivative(xr, 1))
            if v <= best:
                best_x, best = xr, v
        except ValueError:
            pass
    return best_x, best


def _first_upcrossing_below(values_fn, lo, hi, step):
    """First x in [lo, hi] where values_fn(x) < 0, bisected; None if never negative on the grid."""
    grid = np.linspace(lo, hi, max(int(math.ceil((hi - lo) / step)), 16) + 1)
    vals = values_fn(grid)
    neg = np.nonzero(vals < 0)[0]
    if neg.size == 0:
        return None
    j = int(neg[0])
    if j == 0:
        return float(grid[0])
    return float(optimize.brentq(lambda t: float(values_fn(np.array([t]))[0]), grid[j - 1], grid[j], xtol=1e-12))


# ---------------------------------------------------------------------------
# band construction


def _pay_band_end(scaled, current: PiecewiseValueFunction, lo: float, x_max: float, step: float, tol: float):
    """Level at which the pay band starting at ``lo`` must stop, or None if it never does.

    The pay band ``x + K`` is admissible only where G_n of it is nonnegative.
    """
    def gn(xs):
        return ide.eval_Gn(current, xs, scaled) / scaled.lam_n + tol

    return _first_upcrossing_below(gn, lo, x_max, step)


def _extension(scaled, current: PiecewiseValueFunction, b: float):
    return ide.fit_exp_sum(scaled, b, float(current(b)), current)


def _tangency_gap(scaled, current, b, x_max, step):
    seg = _extension(scaled, current, b)
    xm, m = _min_slope(seg, b, x_max, step)
    return m - 1.0, xm, seg


def construct_band_value(scaled: ScaledParameters, x_max: float | None = None,
                         tol: float = 1e-12) -> BandValue:
    """Optimal band strategy and value function V_n for integer-shape Gamma claims.

    Raises IncompleteBandError if a no-pay band does not close below ``x_max``
    (default ``4 b_D``).
    """
    sol = solve_diffusion(scaled.base)
    x_max = float(x_max or 4.0 * sol.b_D)
    step = sol.b_D / 1024
    g = ide.fit_exp_sum(scaled, 0.0, 1.0)
    b_star, min_slope = _min_slope(g, 0.0, x_max, step)
    diag = {"g_min_slope_at": b_star}

    if b_star <= 0.0 or min_slope >= float(g.derivative(0.0)):
        pays_at_zero = True
        K = scaled.pay_at_zero_value
        current = PiecewiseValueFunction((affine_segment(0.0, math.inf, K),))
        lo = 0.0
        pay = []
    else:
        pays_at_zero = False
        scale_ = 1.0 / float(g.derivative(b_star))
        first = ExpSumSegment(0.0, b_star, tuple((a * scale_, al) for a, al in g.terms), origin=g.origin)
        top_val = float(first(b_star))
        current = PiecewiseValueFunction((first, affine_segment(b_star, math.inf, top_val - b_star)))
        lo = b_star
        pay = []

    for _ in range(MAX_BANDS):
        z = _pay_band_end(scaled, current, lo, x_max, step, tol)
        if z is None:
            pay.append((lo, math.inf))
            break
        # tangency level: largest b in [lo, z] whose extension keeps slope >= 1
        grid = np.linspace(lo, z, 65)
        gaps = []
        for b in grid[1:]:
            gaps.append(_tangency_gap(scaled, current, b, x_max, step)[0])
        gaps = np.array(gaps)
        neg = np.nonzero(gaps < 0)[0]
        if neg.size == 0:
            b0 = z
        else:
            j = int(neg[0])
            left = grid[j] if j > 0 else grid[0]
            if j == 0 and lo == grid[0]:
                left = lo + 1e-9 * max(1.0, z - lo)
                if _tangency_gap(scaled, current, left, x_max, step)[0] < 0:
                    raise IncompleteBandError("no tangency level inside the pay band", {"lo": lo, "z": z})
            b0 = optimize.brentq(lambda b: _tangency_gap(scaled, current, b, x_max, step)[0],
                                 left, grid[j + 1], xtol=1e-12)
        gap, b1, seg = _tangency_gap(scaled, current, b0, x_max, step)
        if b1 >= x_max - step:
            raise IncompleteBandError(
                f"no slope-1 touching point below x_max={x_max}; increase x_max",
                {"band_start": b0, "min_slope": gap + 1.0},
            )
        if lo < b0:
            pay.append((lo, b0))
        value_top = float(seg(b1))
        current = current.replace_tail(ExpSumSegment(b0, b1, seg.terms, origin=seg.origin))
        current = current.replace_tail(affine_segment(b1, math.inf, value_top - b1))
        lo = b1
    else:
        raise IncompleteBandError(f"more than {MAX_BANDS} bands", {"lo": lo})

    strategy = BandStrategy(tuple(_merge(pay)))
    return BandValue(current, strategy, pays_at_zero, x_max, diag)


def _merge(intervals):
    out = []
    for a, b in intervals:
        if out and abs(out[-1][1] - a) < 1e-14:
            out[-1] = (out[-1][0], b)
        else:
            out.append((a, b))
    return out


# ---------------------------------------------------------------------------
# barrier strategies


def barrier_payoff(scaled: ScaledParameters, b: float) -> PiecewiseValueFunction:
    """Payoff of the barrier strategy at level ``b``: g_n / g_n'(b) below, slope 1 above."""
    if not b > 0:
        if b == 0:
            return PiecewiseValueFunction((affine_segment(0.0, math.inf, scaled.pay_at_zero_value),))
        raise InvalidBarrierError(f"barrier must be nonnegative, got {b}")
    g = ide.fit_exp_sum(scaled, 0.0, 1.0)
    slope = float(g.derivative(b))
    if not slope > 0:
        raise InvalidBarrierError(f"g_n'(b) = {slope} is not positive at b = {b}")
    below = ExpSumSegment(0.0, b, tuple((a / slope, al) for a, al in g.terms), origin=g.origin)
    top = float(below(b))
    return PiecewiseValueFunction((below, affine_segment(b, math.inf, top - b)))


@dataclass(frozen=True)
class BarrierSolution:
    r1: float
    r2: float
    b_n: float


def exp_optimal_barrier(scaled: ScaledParameters) -> BarrierSolution:
    """Optimal barrier of the scaled model with exponential claims.

    The textbook formulas are stated for unit-mean claims; other rates follow by
    rescaling money (barrier in units of the claim mean).
    """
    claim = scaled.base.claim
    if claim.family != "exponential":
        raise CapabilityError("closed-form optimal barrier needs exponential claims")
    mu = claim.rate
    lam, theta, delta, n = scaled.base.lam, scaled.base.theta, scaled.delta, scaled.n
    rn = math.sqrt(n)
    disc = math.sqrt((rn * lam * theta + delta) ** 2 + 4.0 * n * delta * lam)
    den = 2.0 * lam * (rn + theta)
    r1 = (disc - (rn * lam * theta - delta)) / den
    r2 = (disc + (rn * lam * theta - delta)) / den
    if not rn > r2:
        raise ValueError(f"sqrt(n) = {rn} must exceed r2 = {r2} for a finite barrier")
    b = math.log(r2**2 * (rn - r2) / (r1**2 * (rn + r1))) / (r1 + r2)
    return BarrierSolution(r1 * mu, r2 * mu, b / mu)


def barrier_rate_check(base, n_list):
    """Rows (n, b_n, sqrt(n) |b_n - b_D|) for exponential claims."""
    from .model import scale

    b_D = solve_diffusion(base).b_D
    rows = []
    for n in n_list:
        bn = exp_optimal_barrier(scale(base, n)).b_n
        rows.append((float(n), bn, math.sqrt(n) * abs(bn - b_D)))
    return rows
