import math
import warnings

import numpy as np
import pytest

from divlab.model import scale
from divlab.sim import SimConfig, simulate_band_optimality_gap, simulate_paths, simulate_payoff
from divlab.strategy import BandStrategy, barrier_payoff


def test_barrier_zero_closed_form(scaled1):
    r = simulate_payoff(scaled1, BandStrategy.barrier(0.0), SimConfig(paths=200_000, seed=1, x0=1.5))
    assert abs(r.mean - (1.5 + scaled1.pay_at_zero_value)) < 3 * r.std_error
    assert r.warning is None and r.truncation_bound < 1e-15


def test_barrier_bD_n9(params, sol):
    s = scale(params, 9)
    r = simulate_payoff(s, BandStrategy.barrier(sol.b_D), SimConfig(paths=40_000, seed=2, x0=5.0))
    assert abs(r.mean - float(barrier_payoff(s, sol.b_D)(5.0))) < 3 * r.std_error


def test_same_seed_is_bit_identical(scaled1):
    strat = BandStrategy(((0.0, 1.0), (6.0, math.inf)))
    cfg = SimConfig(paths=3000, seed=11, x0=2.0)
    a, b = simulate_paths(scaled1, strat, cfg), simulate_paths(scaled1, strat, cfg)
    assert np.array_equal(a, b)
    c = simulate_paths(scaled1, strat, SimConfig(paths=3000, seed=12, x0=2.0))
    assert not np.array_equal(a, c)


def test_thread_cap_does_not_change_results(scaled1, monkeypatch):
    strat = BandStrategy.barrier(4.0)
    cfg = SimConfig(paths=2000, seed=5, x0=1.0)
    a = simulate_paths(scaled1, strat, cfg)
    monkeypatch.setenv("DIVLAB_THREADS", "1")
    assert np.array_equal(a, simulate_paths(scaled1, strat, cfg))


def test_prefix_stability(scaled1):
    # path i depends only on (seed, i), so fewer paths give a prefix
    strat = BandStrategy.barrier(4.0)
    a = simulate_paths(scaled1, strat, SimConfig(paths=500, seed=9))
    b = simulate_paths(scaled1, strat, SimConfig(paths=200, seed=9))
    assert np.array_equal(a[:200], b)


def test_lump_above_barrier_is_pathwise(scaled1):
    b = 3.0
    strat = BandStrategy.barrier(b)
    base = simulate_paths(scaled1, strat, SimConfig(paths=5000, seed=4, x0=b))
    up = simulate_paths(scaled1, strat, SimConfig(paths=5000, seed=4, x0=b + 7.0))
    np.testing.assert_allclose(up - base, 7.0, atol=1e-12)


def test_identical_strategies_zero_gap(params, sol):
    s = scale(params, 4)
    strat = BandStrategy.barrier(sol.b_D)
    cfg = SimConfig(paths=2000, seed=3, x0=5.0)
    d = simulate_paths(s, strat, cfg) - simulate_paths(s, strat, cfg)
    assert np.all(d == 0.0)


def test_gap_report(params):
    rep = simulate_band_optimality_gap(scale(params, 4), SimConfig(paths=20_000, seed=6, x0=5.0))
    assert rep.passed
    assert rep.bound == pytest.approx(2 * 4.650978 / 2, rel=1e-6)


def test_short_horizon_warns(scaled1):
    with warnings.catch_warnings(record=True) as w:
        warnings.simplefilter("always")
        r = simulate_payoff(scaled1, BandStrategy.barrier(2.0), SimConfig(paths=100, horizon=1.0))
    assert r.warning and any(issubclass(x.category, RuntimeWarning) for x in w)


def test_sim_config_validation():
    for kw in ({"paths": 0}, {"paths": 1.5}, {"x0": -1.0}, {"seed": -1}):
        with pytest.raises(ValueError):
            SimConfig(**kw)
    assert SimConfig().resolved_horizon(0.1) == pytest.approx(500.0)
