"""Monte Carlo payoff of band strategies in the scaled Cramér-Lundberg model.

Between claims the surplus path is deterministic, so each path is advanced claim to
claim with the discounted dividend stream integrated in closed form. The only errors
are statistical and the horizon truncation, which is bounded by
``exp(-delta T) * (max(x0, top) + c_n / delta)``.

Randomness: every path owns a SplitMix64 stream whose state is derived from
``(seed, path_index)``. A claim always consumes ``1 + shape`` uniforms (inter-arrival
time, then the exponential summands of its size), so two strategies run with the same
seed see the same claim sequence (common random numbers), and results do not depend
on the number of worker threads.
"""

from __future__ import annotations

import math
import os
import warnings
from dataclasses import dataclass, field

import numba
import numpy as np

from .model import ScaledParameters
from .strategy import BandStrategy

if "NUMBA_THREADING_LAYER" not in os.environ:
    # the bundled TBB is too old for numba; skip it rather than warn on every run
    numba.config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_PATH_KEY = np.uint64(0xD1B54A32D192ED03)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_INV53 = 1.0 / 9007199254740992.0


@numba.njit(cache=True, inline="always")
def _mix(z):
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


@numba.njit(cache=True)
def _path_state(seed, path):
    return _mix(_mix(np.uint64(seed) + _GOLDEN) ^ (np.uint64(path) * _PATH_KEY))


@numba.njit(cache=True)
def _simulate_path(state, x0, lo, hi, c, lam, delta, shape, rate, horizon):
    """Return (payoff, final state). ``lo``/``hi`` are the pay intervals."""
    m = lo.shape[0]
    x = x0
    total = 0.0
    at_pay = False
    for i in range(m):
        if lo[i] <= x < hi[i]:
            total += x - lo[i]
            x = lo[i]
            at_pay = True
            break
    t = 0.0
    disc = 1.0
    while True:
        state += _GOLDEN
        u = (_mix(state) >> _S11) * _INV53
        tau = -math.log1p(-u) / lam
        decay = math.exp(-delta * tau)
        if at_pay:
            total += disc * c * (1.0 - decay) / delta
        else:
            top = math.inf
            for i in range(m):
                if lo[i] > x:
                    top = lo[i]
                    break
            h = (top - x) / c
            if tau <= h:
                x += c * tau
            else:
                x = top
                total += disc * c * (math.exp(-delta * h) - decay) / delta
        t += tau
        disc *= decay
        y = 0.0
        for _ in range(shape):
            state += _GOLDEN
            u = (_mix(state) >> _S11) * _INV53
            y -= math.log1p(-u)
        x -= y / rate
        if x < 0.0 or t > horizon:
            return total, state
        at_pay = False
        for i in range(m):
            if lo[i] <= x < hi[i]:
                total += disc * (x - lo[i])
                x = lo[i]
                at_pay = True
                break


@numba.njit(cache=True, parallel=True)
def _simulate_many(seed, first_path, paths, x0, lo, hi, c, lam, delta, shape, rate, horizon):
    out = np.empty(paths)
    for k in numba.prange(paths):
        state = _path_state(seed, first_path + k)
        out[k] = _simulate_path(state, x0, lo, hi, c, lam, delta, shape, rate, horizon)[0]
    return out


def _configure_threads():
    cap = os.environ.get("DIVLAB_THREADS")
    if cap:
        numba.set_num_threads(max(1, min(int(cap), numba.config.NUMBA_NUM_THREADS)))


@dataclass(frozen=True)
class SimConfig:
    paths: int = 100_000
    horizon: float | None = None
    seed: int = 0
    x0: float = 0.0
    bias_tol: float = 1e-6

    def __post_init__(self):
        if int(self.paths) != self.paths or self.paths < 1:
            raise ValueError("paths must be a positive integer")
        if self.x0 < 0:
            raise ValueError("initial surplus must be nonnegative")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must fit in 64 bits")

    def resolved_horizon(self, delta: float) -> float:
        return 50.0 / delta if self.horizon is None else float(self.horizon)


@dataclass
class SimResult:
    mean: float
    std_error: float
    truncation_bound: float
    paths: int
    warning: str | None = None
    samples: np.ndarray | None = field(default=None, repr=False)

    def to_dict(self) -> dict:
        d = {"mean": self.mean, "std_error": self.std_error, "truncation_bound": self.truncation_bound}
        if self.warning:
            d["warning"] = self.warning
        return d


def truncation_bound(scaled: ScaledParameters, strat: BandStrategy, x0: float, horizon: float) -> float:
    return math.exp(-scaled.delta * horizon) * (max(x0, strat.top_threshold) + scaled.c_n / scaled.delta)


def simulate_paths(scaled: ScaledParameters, strat: BandStrategy, cfg: SimConfig) -> np.ndarray:
    """Per-path discounted dividends, in path-index order."""
    _configure_threads()
    lo = np.array([a for a, _ in strat.pay_intervals], dtype=float)
    hi = np.array([b for _, b in strat.pay_intervals], dtype=float)
    claim = scaled.claim_n
    return _simulate_many(
        np.uint64(int(cfg.seed)), 0, int(cfg.paths), float(cfg.x0), lo, hi,
        scaled.c_n, scaled.lam_n, scaled.delta, claim.shape, claim.rate, cfg.resolved_horizon(scaled.delta),
    )


def _summarize(samples, bound, cfg, keep):
    warn = None
    if bound > cfg.bias_tol:
        warn = f"horizon truncation bias up to {bound:.3g} exceeds tolerance {cfg.bias_tol:.3g}"
        warnings.warn(warn, RuntimeWarning, stacklevel=3)
    n = samples.size
    mean = float(np.sum(samples) / n)
    se = float(np.std(samples, ddof=1) / math.sqrt(n)) if n > 1 else math.nan
    return SimResult(mean, se, bound, n, warn, samples if keep else None)


def simulate_payoff(scaled: ScaledParameters, strat: BandStrategy, cfg: SimConfig,
                    keep_samples: bool = False) -> SimResult:
    """Estimate E[int_0^tau e^{-delta t} dD_t] under ``strat`` from ``cfg.x0``."""
    samples = simulate_paths(scaled, strat, cfg)
    bound = truncation_bound(scaled, strat, cfg.x0, cfg.resolved_horizon(scaled.delta))
    return _summarize(samples, bound, cfg, keep_samples)


@dataclass
class GapReport:
    n: float
    gap: float
    std_error: float
    bound: float
    passed: bool
    optimal: BandStrategy
    barrier: float

    def to_dict(self) -> dict:
        return {"n": self.n, "gap": self.gap, "std_error": self.std_error, "bound": self.bound,
                "passed": self.passed, "optimal": self.optimal.to_dict(), "barrier": self.barrier}


def simulate_band_optimality_gap(scaled: ScaledParameters, cfg: SimConfig,
                                 C_double_prime: float | None = None) -> GapReport:
    """Paired estimate of V_n(x0) - V_{b_D,n}(x0) on common random numbers."""
    from .analysis import bound_certificate
    from .diffusion import solve_diffusion
    from .strategy import construct_band_value

    b_D = solve_diffusion(scaled.base).b_D
    optimal = construct_band_value(scaled).strategy
    if C_double_prime is None:
        C_double_prime = bound_certificate(scaled.base).C_double_prime
    a = simulate_paths(scaled, optimal, cfg)
    b = simulate_paths(scaled, BandStrategy.barrier(b_D), cfg)
    d = a - b
    gap = float(np.sum(d) / d.size)
    se = float(np.std(d, ddof=1) / math.sqrt(d.size)) if d.size > 1 else 0.0
    bound = C_double_prime / scaled.sqrt_n
    return GapReport(scaled.n, gap, se, bound, gap <= bound + 3 * se, optimal, b_D)
