"""Acceptance criteria, one pass/fail line each (collected in the terminal summary)."""

import math
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from divlab import analysis, ide
from divlab.diffusion import solve_diffusion
from divlab.model import scale
from divlab.sim import SimConfig, simulate_band_optimality_gap, simulate_payoff
from divlab.strategy import BandStrategy, barrier_payoff, barrier_rate_check, construct_band_value, exp_optimal_barrier

from .conftest import record


def test_c1_diffusion_closed_form(params):
    t = time.perf_counter()
    s = solve_diffusion(params)
    dt = time.perf_counter() - t
    ok = (abs(s.gamma1 - 0.03894) <= 5e-5 and abs(s.gamma2 - 0.08561) <= 5e-5
          and abs(s.b_D - 12.650) <= 5e-3 and dt < 0.1)
    record("1", ok, f"gamma1={s.gamma1:.6f} gamma2={s.gamma2:.6f} b_D={s.b_D:.5f} ({dt * 1e3:.2f} ms)")
    assert ok


def test_c2_bound_constants(params):
    t = time.perf_counter()
    c = analysis.bound_certificate(params)
    dt = time.perf_counter() - t
    ok = (abs(c.A - 0.04651) <= 5e-5 and abs(c.q - 4.651) <= 5e-3 and abs(c.p - 2.687) <= 5e-3
          and abs(c.C_prime - 4.651) <= 5e-3 and dt < 0.1)
    record("2", ok, f"A={c.A:.6f} q={c.q:.5f} p={c.p:.5f} C'={c.C_prime:.5f} ({dt * 1e3:.2f} ms)")
    assert ok


def test_c3_bands_n1(params):
    t = time.perf_counter()
    s = scale(params, 1)
    band = construct_band_value(s)
    roots = np.sort(np.real(ide.characteristic_roots(s)))[::-1]
    dt = time.perf_counter() - t
    th = band.strategy.thresholds
    v0 = float(band.value(0.0))
    ok = (len(th) == 2 and abs(th[0] - 1.80303) <= 1e-3 and abs(th[1] - 10.2162) <= 1e-2
          and abs(v0 - 2.119) <= 1e-3
          and np.all(np.abs(roots - [0.039567, -0.079355, -1.48825]) <= 1e-4) and dt < 10)
    record("3", ok, f"b0={th[0]:.6f} b1={th[1]:.5f} V1(0)={v0:.5f} roots={np.round(roots, 6).tolist()} ({dt:.2f} s)")
    assert ok


C4_TARGETS = {4: (0.63, 10.8), 9: (0.266, 13.24343), 25: (0.105, 12.11)}


@pytest.mark.parametrize("n", [4, 9, 25])
def test_c4_bands_larger_n(params, n):
    t = time.perf_counter()
    band = construct_band_value(scale(params, n))
    dt = time.perf_counter() - t
    th = band.strategy.thresholds
    first, second = C4_TARGETS[n]
    ok = len(th) == 2 and abs(th[0] - first) <= 1e-2 and abs(th[1] - second) <= 0.15 and dt < 20
    record(f"4 (n={n})", ok, f"first-band top {th[0]:.5f} vs {first}, second threshold {th[-1]:.5f} vs {second} ({dt:.2f} s)")
    assert ok


def test_c5_convergence_bounds(params, sol):
    t = time.perf_counter()
    rep = analysis.convergence_report(params, [4, 9, 25])
    dt = time.perf_counter() - t
    q, p = rep.certificate.q, rep.certificate.p
    parts, ok = [], dt < 60
    for r in rep.rows:
        fig = rep.figures[r.n]
        assert fig[0, 0] == 0.0 and fig[-1, 0] == pytest.approx(2 * sol.b_D)
        diff = fig[:, 5]
        rn = math.sqrt(r.n)
        good = (np.max(np.abs(diff)) <= 4.651 / rn and np.all(diff >= -q / rn) and np.all(diff <= p / rn))
        ok = ok and bool(good)
        parts.append(f"n={int(r.n)}: sup={np.max(np.abs(diff)):.4f} <= {4.651 / rn:.4f}")
    record("5", ok, "; ".join(parts) + f" ({dt:.2f} s)")
    assert ok


def test_c6_operator_residuals(params, sol):
    worst, ok = 0.0, True
    for n in (1, 4, 9, 25):
        s = scale(params, n)
        band = construct_band_value(s)
        pay = band.strategy.pay_intervals
        free = [(hi, lo2) for (_, hi), (lo2, _) in zip(pay, pay[1:])]
        if pay[0][0] > 0:
            free.insert(0, (0.0, pay[0][0]))
        for lo, hi in free:
            x = np.linspace(lo, hi, ide.GRID_PER_BAND)
            size = s.lam_n * float(np.max(np.abs(band.value(x))))
            rel = float(np.max(np.abs(ide.eval_Gn(band.value, x, s)))) / size
            worst = max(worst, rel)
            ok = ok and rel <= 1e-6
        g = ide.solve_gn(s, 2 * sol.b_D)
        x = np.linspace(0.0, 2 * sol.b_D, ide.GRID_PER_BAND)
        rel = float(np.max(np.abs(ide.eval_Gn(g, x, s)))) / (s.lam_n * float(np.max(np.abs(g(x)))))
        worst = max(worst, rel)
        ok = ok and rel <= 1e-6
    record("6", ok, f"worst relative residual {worst:.2e} (limit 1e-6), n in 1,4,9,25")
    assert ok


def test_c7_certification_n25(params, sol):
    s = scale(params, 25)
    grid = analysis.default_grid(sol)
    sub = analysis.certify_subsolution(s, sol, 4.651, grid)
    sup = analysis.certify_supersolution(s, sol, 2.688, grid)
    ok = sub.passed and sup.passed
    crit = analysis.critical_constants(s, sol)
    record("7", ok, f"subsolution q=4.651 {'PASS' if sub.passed else 'FAIL'} (worst F={sub.worst_value:.3g}); "
                    f"supersolution p=2.688 {'PASS' if sup.passed else 'FAIL'} (worst F={sup.worst_value:.3g} "
                    f"at x={sup.worst_x:.3g}; smallest passing p at n=25 is {crit['p_min']:.4f})")
    assert ok


def test_c8a_pay_everything(params):
    lines, ok = [], True
    for n, x0 in ((1, 0.0), (1, 2.0), (9, 3.5)):
        s = scale(params, n)
        r = simulate_payoff(s, BandStrategy.barrier(0.0), SimConfig(paths=10**6, seed=101 + n, x0=x0))
        exact = x0 + s.pay_at_zero_value
        good = abs(r.mean - exact) <= 3 * r.std_error
        ok = ok and good
        lines.append(f"n={n},x0={x0}: {r.mean:.5f} vs {exact:.5f} (SE {r.std_error:.1e})")
    record("8a", ok, "; ".join(lines) + " at 1e6 paths")
    assert ok


def test_c8b_bD_barrier_payoff(params, sol):
    xs = np.linspace(0.0, 1.8 * sol.b_D, 10)
    worst, ok = 0.0, True
    for n, paths in ((1, 200_000), (9, 200_000)):
        s = scale(params, n)
        exact = barrier_payoff(s, sol.b_D)
        for i, x0 in enumerate(xs):
            r = simulate_payoff(s, BandStrategy.barrier(sol.b_D), SimConfig(paths=paths, seed=1000 * n + i, x0=float(x0)))
            z = abs(r.mean - float(exact(x0))) / r.std_error
            worst = max(worst, z)
            ok = ok and z <= 3
    record("8b", ok, f"10 points x 2 levels (n=1,9), worst |sim - V_bD,n| = {worst:.2f} SE (limit 3) at 2e5 paths")
    assert ok


def test_c8c_optimality_gap(params):
    lines, ok = [], True
    for n in (4, 25):
        rep = simulate_band_optimality_gap(scale(params, n), SimConfig(paths=200_000, seed=7 + n, x0=5.0))
        bound = 2 * 4.651 / math.sqrt(n)
        good = rep.gap <= bound + 3 * rep.std_error
        ok = ok and good
        lines.append(f"n={n}: gap {rep.gap:.4f} (SE {rep.std_error:.1e}) <= {bound:.4f}")
    record("8c", ok, "; ".join(lines))
    assert ok


def test_c9_exponential_barrier_rates(exp_params):
    sol = solve_diffusion(exp_params)
    ks = []
    for n in (1e2, 1e4, 1e6):
        r = exp_optimal_barrier(scale(exp_params, n))
        ks.append((math.sqrt(n) * abs(r.r1 - sol.gamma1), math.sqrt(n) * abs(r.r2 - sol.gamma2)))
    ks = np.array(ks)
    spread = ks.max(axis=0) / ks.min(axis=0)
    rates = np.array([row[2] for row in barrier_rate_check(exp_params, [1, 4, 16, 64, 256])])
    ok = bool(np.all(spread <= 1.05) and rates.max() / rates.min() <= 1.1)
    record("9", ok, f"K1={ks[:, 0].round(6).tolist()} K2={ks[:, 1].round(6).tolist()}; "
                    f"sqrt(n)|b_n-b_D|={rates.round(4).tolist()}")
    assert ok


def test_c10_property_suites():
    root = Path(__file__).parent / "properties"
    suites = sorted(p.stem for p in root.glob("test_*_props.py"))
    expected = ["test_diffusion_props", "test_ide_props", "test_model_props", "test_sim_props", "test_strategy_props"]
    proc = subprocess.run([sys.executable, "-m", "pytest", "-q", "-p", "no:cacheprovider", str(root)],
                          capture_output=True, text=True)
    ok = suites == expected and proc.returncode == 0
    tail = proc.stdout.strip().splitlines()[-1] if proc.stdout.strip() else proc.stderr[-200:]
    record("10", ok, f"{len(suites)} property suites without example fixtures: {tail}")
    assert ok
