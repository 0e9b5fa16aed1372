"""Command-line front end.

Exit codes: 0 success, 2 usage or input error, 3 numerical convergence failure,
4 selftest mismatch.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import ConvergenceError, DivlabError
from .model import CLParameters, scale

EXIT_USAGE = 2
EXIT_CONVERGENCE = 3
EXIT_SELFTEST = 4

FMT = "%.9g"

DIFFUSION_COLUMNS = ("x", "V_D", "V_D_prime", "V_D_second")
VALUE_COLUMNS = ("x", "V")


class UsageError(Exception):
    pass


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--params", type=Path, default=None,
                        help="parameter JSON (default: packaged Gamma(2,1) example)")
    common.add_argument("--output-dir", type=Path, default=Path("."), help="directory for CSV/JSON files")

    p = argparse.ArgumentParser(prog="divlab", description="Optimal dividends in the scaled Cramér-Lundberg model.")
    sub = p.add_subparsers(dest="command")

    d = sub.add_parser("diffusion", parents=[common], help="diffusion barrier and V_D samples")
    d.add_argument("--points", type=int, default=101)

    b = sub.add_parser("bands", parents=[common], help="optimal band strategy and V_n")
    b.add_argument("--n", required=True, help="comma-separated scaling levels")
    b.add_argument("--points", type=int, default=257)

    br = sub.add_parser("barrier", parents=[common], help="payoff of a barrier strategy")
    br.add_argument("--b", required=True, help="barrier level or 'bD'")
    br.add_argument("--n", default="1", help="comma-separated scaling levels")
    br.add_argument("--points", type=int, default=257)

    bo = sub.add_parser("bounds", parents=[common], help="error-bound constants")
    bo.add_argument("--certify-n", default="", help="comma-separated n for grid certificates")

    c = sub.add_parser("converge", parents=[common], help="V_n against V_D with error bands")
    c.add_argument("--n", default="4,9,25")

    s = sub.add_parser("simulate", parents=[common], help="Monte Carlo payoff of a strategy")
    s.add_argument("--n", type=float, required=True)
    s.add_argument("--strategy", default="bD", help="'bD', 'optimal' or a strategy JSON file")
    s.add_argument("--paths", type=int, default=100_000)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--x0", type=float, default=0.0)
    s.add_argument("--horizon", type=float, default=None)

    sub.add_parser("selftest", parents=[common], help="regression against the worked example")
    return p


# ---------------------------------------------------------------------------
# formatting


def _num(x):
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    x = float(x)
    if math.isinf(x) or math.isnan(x):
        return None
    return float(FMT % x)


def _clean(obj):
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (float, int, np.floating, np.integer, np.bool_)):
        return _num(obj)
    return obj


def _dump(obj) -> str:
    return json.dumps(_clean(obj), indent=2)


def _write_csv(path: Path, header, rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow([FMT % v for v in r])


def _n_list(text: str) -> list:
    try:
        out = [float(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise UsageError(f"bad --n list {text!r}") from exc
    if not out or any(not v > 0 for v in out):
        raise UsageError("scaling levels must be positive")
    return out


def _tag(n: float) -> str:
    return str(int(n)) if float(n).is_integer() else ("%g" % n)


def _load_params(path) -> CLParameters:
    try:
        if path is None:
            text = resources.files("divlab").joinpath("data/example_gamma.json").read_text()
        else:
            text = Path(path).read_text()
        return CLParameters.from_dict(json.loads(text))
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise UsageError(f"cannot load parameters: {exc}") from exc


# ---------------------------------------------------------------------------
# subcommands


def _cmd_diffusion(args, params, out):
    from .diffusion import solve_diffusion

    sol = solve_diffusion(params)
    xs = np.linspace(0.0, 2.0 * sol.b_D, args.points)
    d1, d2 = sol.derivative(xs, 1), sol.derivative(xs, 2)
    out.write("quantity,value\n")
    for k, v in (("gamma1", sol.gamma1), ("gamma2", sol.gamma2), ("b_D", sol.b_D), ("C", sol.C)):
        out.write(f"{k},{FMT % v}\n")
    out.write("\n" + ",".join(DIFFUSION_COLUMNS) + "\n")
    for row in zip(xs, sol(xs), d1, d2):
        out.write(",".join(FMT % v for v in row) + "\n")
    return 0


def _value_payload(n, strategy, value, extra=None):
    d = {"n": n, "thresholds": strategy.thresholds, "pay_intervals": strategy.to_dict()["pay_intervals"],
         "segments": value.to_json()}
    d.update(extra or {})
    return d


def _cmd_bands(args, params, out):
    from .diffusion import solve_diffusion
    from .strategy import construct_band_value

    b_D = solve_diffusion(params).b_D
    summary = []
    for n in _n_list(args.n):
        band = construct_band_value(scale(params, n))
        payload = _value_payload(n, band.strategy, band.value, {"pays_at_zero": band.pays_at_zero})
        tag = _tag(n)
        args.output_dir.mkdir(parents=True, exist_ok=True)
        (args.output_dir / f"bands_{tag}.json").write_text(_dump(payload))
        xs = np.linspace(0.0, 2.0 * b_D, args.points)
        _write_csv(args.output_dir / f"bands_{tag}.csv", VALUE_COLUMNS, zip(xs, band.value(xs)))
        summary.append(payload)
    out.write(_dump(summary) + "\n")
    return 0


def _cmd_barrier(args, params, out):
    from .diffusion import solve_diffusion
    from .strategy import BandStrategy, barrier_payoff

    b_D = solve_diffusion(params).b_D
    if args.b.strip().lower() == "bd":
        b = b_D
    else:
        try:
            b = float(args.b)
        except ValueError as exc:
            raise UsageError(f"--b must be a number or 'bD', got {args.b!r}") from exc
    summary = []
    for n in _n_list(args.n):
        value = barrier_payoff(scale(params, n), b)
        strat = BandStrategy.barrier(b)
        payload = _value_payload(n, strat, value, {"barrier": b})
        tag = _tag(n)
        args.output_dir.mkdir(parents=True, exist_ok=True)
        (args.output_dir / f"barrier_{tag}.json").write_text(_dump(payload))
        xs = np.linspace(0.0, 2.0 * max(b_D, b), args.points)
        _write_csv(args.output_dir / f"barrier_{tag}.csv", VALUE_COLUMNS, zip(xs, value(xs)))
        summary.append(payload)
    out.write(_dump(summary) + "\n")
    return 0


def _cmd_bounds(args, params, out):
    from .analysis import bound_certificate

    ns = _n_list(args.certify_n) if args.certify_n else ()
    out.write(_dump(bound_certificate(params, certify_n=ns).to_dict()) + "\n")
    return 0


SUMMARY_COLUMNS = ("n", "sup_vn_vd", "bound_vn_vd", "sup_vbn_vd", "sup_vn_vbn", "bound_vn_vbn", "lower_ok", "upper_ok")


def _cmd_converge(args, params, out):
    from .analysis import FIGURE_COLUMNS, convergence_report

    rep = convergence_report(params, _n_list(args.n))
    for n, fig in rep.figures.items():
        _write_csv(args.output_dir / f"converge_{_tag(n)}.csv", FIGURE_COLUMNS, fig)
    out.write(",".join(SUMMARY_COLUMNS) + "\n")
    for r in rep.rows:
        vals = [getattr(r, c) for c in SUMMARY_COLUMNS]
        out.write(",".join(str(v) if isinstance(v, bool) else FMT % v for v in vals) + "\n")
    return 0


def _cmd_simulate(args, params, out):
    from .diffusion import solve_diffusion
    from .sim import SimConfig, simulate_payoff
    from .strategy import BandStrategy, construct_band_value

    if not args.n > 0:
        raise UsageError("--n must be positive")
    scaled = scale(params, args.n)
    key = args.strategy.strip()
    if key.lower() == "bd":
        strat = BandStrategy.barrier(solve_diffusion(params).b_D)
    elif key.lower() == "optimal":
        strat = construct_band_value(scaled).strategy
    else:
        try:
            strat = BandStrategy.from_dict(json.loads(Path(key).read_text()))
        except (OSError, ValueError, KeyError, TypeError) as exc:
            raise UsageError(f"cannot load strategy {key!r}: {exc}") from exc
    try:
        cfg = SimConfig(paths=args.paths, horizon=args.horizon, seed=args.seed, x0=args.x0)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    out.write(_dump(simulate_payoff(scaled, strat, cfg).to_dict()) + "\n")
    return 0


def selftest_checks(params: CLParameters) -> list:
    """(name, computed, expected, tolerance) for the worked Gamma(2,1) example."""
    from .analysis import bound_certificate
    from .diffusion import solve_diffusion
    from .ide import characteristic_roots
    from .strategy import construct_band_value

    sol = solve_diffusion(params)
    cert = bound_certificate(params)
    s1 = scale(params, 1)
    band1 = construct_band_value(s1)
    roots = sorted(np.real(characteristic_roots(s1)), reverse=True)
    band25 = construct_band_value(scale(params, 25))
    t1, t25 = band1.strategy.thresholds, band25.strategy.thresholds

    def at(seq, i):
        return seq[i] if i < len(seq) else math.nan

    checks = [
        ("gamma1", sol.gamma1, 0.03894, 5e-5),
        ("gamma2", sol.gamma2, 0.08561, 5e-5),
        ("b_D", sol.b_D, 12.650, 5e-3),
        ("A", cert.A, 0.04651, 5e-5),
        ("q", cert.q, 4.651, 5e-3),
        ("p", cert.p, 2.687, 5e-3),
        ("C_prime", cert.C_prime, 4.651, 5e-3),
        ("n1_b0", at(t1, 0), 1.80303, 1e-3),
        ("n1_b1", at(t1, 1), 10.2162, 1e-2),
        ("n1_V0", float(band1.value(0.0)), 2.119, 1e-3),
        ("n25_b0", at(t25, 0), 0.105, 1e-2),
        ("n25_b1", at(t25, 1), 12.11, 0.15),
    ]
    for i, ref in enumerate((0.039567, -0.079355, -1.48825)):
        checks.append((f"n1_root{i}", at(roots, i), ref, 1e-4))
    return checks


def _cmd_selftest(args, params, out):
    bad = 0
    for name, got, want, tol in selftest_checks(params):
        ok = bool(abs(got - want) <= tol)
        bad += not ok
        out.write(f"{'PASS' if ok else 'FAIL'} {name}: {FMT % got} vs {want} (tol {tol:g})\n")
    out.write(f"{bad} mismatch(es)\n")
    return EXIT_SELFTEST if bad else 0


COMMANDS = {
    "diffusion": _cmd_diffusion,
    "bands": _cmd_bands,
    "barrier": _cmd_barrier,
    "bounds": _cmd_bounds,
    "converge": _cmd_converge,
    "simulate": _cmd_simulate,
    "selftest": _cmd_selftest,
}


def dispatch(argv, out=None, err=None) -> int:
    out = sys.stdout if out is None else out
    err = sys.stderr if err is None else err
    parser = _parser()
    if not argv:
        parser.print_usage(err)
        return EXIT_USAGE
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0) and EXIT_USAGE
    if args.command is None:
        parser.print_usage(err)
        return EXIT_USAGE
    try:
        params = _load_params(args.params)
        return COMMANDS[args.command](args, params, out)
    except UsageError as exc:
        err.write(f"error: {exc}\n")
        return EXIT_USAGE
    except ConvergenceError as exc:
        err.write(f"convergence failure: {exc}\n")
        return EXIT_CONVERGENCE
    except DivlabError as exc:
        err.write(f"error: {exc}\n")
        return EXIT_USAGE


def main(argv=None) -> int:
    return dispatch(sys.argv[1:] if argv is None else list(argv))
