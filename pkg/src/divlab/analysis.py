"""Error-bound constants, sub/supersolution certificates and convergence tables.

The lower bound ``V_D - q/sqrt(n) <= V_n`` comes from ``V_D - q/sqrt(n)`` being a
subsolution of ``F_n = 0``; the upper bound ``V_n <= V_D + p/sqrt(n)`` from
``V_D + p/sqrt(n)`` being a supersolution. The certificates evaluate ``F_n`` on a grid
with the exact operator, so they check the inequalities directly instead of relying
on the asymptotic argument.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import integrate

from . import ide
from .diffusion import DiffusionSolution, solve_diffusion
from .errors import DivergenceError
from .model import CLParameters, ClaimDistribution, ScaledParameters, scale
from .strategy import barrier_payoff, construct_band_value

CERT_TOL = 1e-7
P_SAFETY = 1.000001


def minimal_N(sol: DiffusionSolution, dist: ClaimDistribution) -> float:
    """Default threshold scale: 1 when admissible, else the scale putting the tilt at half the radius."""
    if sol.gamma2 < dist.mgf_radius:
        return 1.0
    return (2.0 * sol.gamma2 / dist.mgf_radius) ** 2


def constant_A(sol: DiffusionSolution, dist: ClaimDistribution, N: float = 1.0) -> float:
    """A = (g1^3 e^{g1 b_D} E[Y^3] + g2^3 E[Y^3 e^{g2 Y / sqrt(N)}]) / (6 C)."""
    tilt = sol.gamma2 / math.sqrt(N)
    if tilt >= dist.mgf_radius:
        n_min = (sol.gamma2 / dist.mgf_radius) ** 2
        raise DivergenceError(tilt, dist.mgf_radius,
                              f"E[Y^3 exp({tilt:.6g} Y)] diverges; need N > {n_min:.6g}")
    g1, g2 = sol.gamma1, sol.gamma2
    return (g1**3 * math.exp(g1 * sol.b_D) * dist.moment(3) + g2**3 * dist.tilted_moment(3, tilt)) / (6.0 * sol.C)


def constant_q(sol: DiffusionSolution, A: float) -> float:
    return sol.params.lam * A / sol.params.delta


def constant_p(sol: DiffusionSolution, dist: ClaimDistribution, safety: float = P_SAFETY) -> float:
    """Smallest p with p C > (g1 + g2) sup ME and p > sup ME, times ``safety``."""
    me = dist.sup_mean_excess()
    if not math.isfinite(me):
        raise ValueError("mean excess is unbounded for this claim law")
    return max((sol.gamma1 + sol.gamma2) * me / sol.C, me) * safety


def remainder_bound(sol: DiffusionSolution, dist: ClaimDistribution, n: float, x: float) -> float:
    """Taylor-remainder form of the full-line part of G_n(V_D)(x), by quadrature over omega.

    lam / (2 C sqrt n) * int_0^1 (1-w)^2 {g1^3 e^{g1 x} E[Y^3 e^{-g1 w Y/sqrt n}]
                                        + g2^3 e^{-g2 x} E[Y^3 e^{g2 w Y/sqrt n}]} dw
    """
    g1, g2, rn = sol.gamma1, sol.gamma2, math.sqrt(n)

    def integrand(w):
        return (1 - w) ** 2 * (g1**3 * math.exp(g1 * x) * dist.tilted_moment(3, -g1 * w / rn)
                               + g2**3 * math.exp(-g2 * x) * dist.tilted_moment(3, g2 * w / rn))

    val, _ = integrate.quad(integrand, 0.0, 1.0, epsabs=0.0, epsrel=1e-13)
    return sol.params.lam * val / (2.0 * sol.C * rn)


@dataclass
class CertificationReport:
    kind: str
    n: float
    constant: float
    passed: bool
    worst_value: float
    worst_x: float
    boundary_ok: bool
    theory_threshold: float
    note: str = ""
    x: np.ndarray = field(default=None, repr=False)
    values: np.ndarray = field(default=None, repr=False)

    def summary(self) -> dict:
        d = asdict(self)
        d.pop("x")
        d.pop("values")
        return d


def default_grid(sol: DiffusionSolution, extra=(), points: int = 1025, upper: float | None = None) -> np.ndarray:
    upper = 2.0 * sol.b_D if upper is None else upper
    pts = np.concatenate([np.linspace(0.0, upper, points), [sol.b_D], [e for e in extra if 0 <= e <= upper]])
    return np.unique(pts)


def certify_subsolution(scaled: ScaledParameters, sol: DiffusionSolution, q: float,
                        grid=None, tol: float = CERT_TOL, N: float = 1.0) -> CertificationReport:
    """F_n(V_D - q/sqrt n) <= tol on the grid, and V_D(0) - q/sqrt n < 0."""
    grid = default_grid(sol) if grid is None else np.asarray(grid, dtype=float)
    u = sol.as_piecewise(shift=-q / scaled.sqrt_n)
    vals = ide.eval_Fn(u, grid, scaled)
    i = int(np.argmax(vals))
    threshold = max(N, q * q)
    boundary = float(u(0.0)) < 0.0
    passed = bool(np.all(vals <= tol)) and boundary
    note = "" if scaled.n > threshold else f"outside proven range: needs n > max(N, q^2) = {threshold:.6g}"
    return CertificationReport("subsolution", scaled.n, q, passed, float(vals[i]), float(grid[i]),
                               boundary, threshold, note, grid, vals)


def certify_supersolution(scaled: ScaledParameters, sol: DiffusionSolution, p: float,
                          grid=None, tol: float = CERT_TOL, N_prime: float = 1.0) -> CertificationReport:
    """F_n(V_D + p/sqrt n) >= -tol on the grid (both sides of b_D)."""
    grid = default_grid(sol) if grid is None else np.asarray(grid, dtype=float)
    u = sol.as_piecewise(shift=p / scaled.sqrt_n)
    vals = ide.eval_Fn(u, grid, scaled)
    i = int(np.argmin(vals))
    passed = bool(np.all(vals >= -tol))
    note = "" if scaled.n >= N_prime else f"outside proven range: needs n >= N' = {N_prime:.6g}"
    return CertificationReport("supersolution", scaled.n, p, passed, float(vals[i]), float(grid[i]),
                               True, N_prime, note, grid, vals)


@dataclass
class BoundCertificate:
    A: float
    q: float
    p: float
    N: float
    N_prime: float
    C_prime: float
    C_double_prime: float
    grid_report: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "A": self.A, "q": self.q, "p": self.p, "N": self.N, "N_prime": self.N_prime,
            "C_prime": self.C_prime, "C_double_prime": self.C_double_prime,
            "grid_report": [r.summary() for r in self.grid_report],
        }


def bound_certificate(params: CLParameters, N: float | None = None, N_prime: float | None = None,
                      certify_n=(), grid=None) -> BoundCertificate:
    sol = solve_diffusion(params)
    N = minimal_N(sol, params.claim) if N is None else float(N)
    N_prime = 1.0 if N_prime is None else float(N_prime)
    A = constant_A(sol, params.claim, N)
    q = constant_q(sol, A)
    p = constant_p(sol, params.claim)
    cp = max(q, p)
    reports = []
    for n in certify_n:
        s = scale(params, n)
        reports.append(certify_subsolution(s, sol, q, grid, N=N))
        reports.append(certify_supersolution(s, sol, p, grid, N_prime=N_prime))
    return BoundCertificate(A, q, p, N, N_prime, cp, 2.0 * cp, reports)


@dataclass
class ConvergenceRow:
    n: float
    sup_vn_vd: float
    sup_vbn_vd: float
    sup_vn_vbn: float
    bound_vn_vd: float
    bound_vbn_vd: float
    bound_vn_vbn: float
    lower_ok: bool
    upper_ok: bool
    thresholds: tuple

    @property
    def within_bounds(self) -> bool:
        return (self.sup_vn_vd <= self.bound_vn_vd and self.sup_vbn_vd <= self.bound_vbn_vd
                and self.sup_vn_vbn <= self.bound_vn_vbn)


@dataclass
class ConvergenceReport:
    certificate: BoundCertificate
    rows: list
    figures: dict

    def table(self) -> list:
        return [asdict(r) for r in self.rows]


FIGURE_COLUMNS = ("x", "V_n", "V_D", "V_D_plus", "V_D_minus", "diff")


def convergence_report(params: CLParameters, n_list, grid=None, x_max: float | None = None) -> ConvergenceReport:
    """Sup-grid distances between V_n, the b_D-barrier payoff and V_D against C'/sqrt n, C''/sqrt n."""
    sol = solve_diffusion(params)
    cert = bound_certificate(params)
    rows, figures = [], {}
    for n in n_list:
        s = scale(params, n)
        band = construct_band_value(s, x_max=x_max)
        xs = default_grid(sol, band.strategy.thresholds) if grid is None else np.asarray(grid, dtype=float)
        vn = band.value(xs)
        vbn = barrier_payoff(s, sol.b_D)(xs)
        vd = sol(xs)
        rn = s.sqrt_n
        diff = vn - vd
        rows.append(ConvergenceRow(
            n=float(n),
            sup_vn_vd=float(np.max(np.abs(diff))),
            sup_vbn_vd=float(np.max(np.abs(vbn - vd))),
            sup_vn_vbn=float(np.max(np.abs(vn - vbn))),
            bound_vn_vd=cert.C_prime / rn,
            bound_vbn_vd=cert.C_prime / rn,
            bound_vn_vbn=cert.C_double_prime / rn,
            lower_ok=bool(np.all(diff >= -cert.q / rn)),
            upper_ok=bool(np.all(diff <= cert.p / rn)),
            thresholds=tuple(band.strategy.thresholds),
        ))
        figures[float(n)] = np.column_stack([xs, vn, vd, vd + cert.p / rn, vd - cert.q / rn, diff])
    return ConvergenceReport(cert, rows, figures)


def critical_constants(scaled: ScaledParameters, sol: DiffusionSolution, grid=None) -> dict:
    """Smallest q and p for which the grid certificates pass at this ``n``.

    G_n is linear, so G_n(V_D + k/sqrt n) = G_n(V_D) + (k/sqrt n)(delta + n lam S_Y(sqrt n x));
    above b_D the slope argument of F_n is zero, so only the sign of G_n matters there.
    """
    grid = default_grid(sol, points=4097) if grid is None else np.asarray(grid, dtype=float)
    g = ide.eval_Gn(sol.as_piecewise(), grid, scaled)
    weight = scaled.delta + scaled.lam_n * scaled.base.claim.survival(scaled.sqrt_n * grid)
    ratio = scaled.sqrt_n * g / weight
    below = grid <= sol.b_D
    return {
        "n": scaled.n,
        "q_min": float(max(np.max(ratio[below]), 0.0)),
        "p_min": float(max(np.max(-ratio), 0.0)),
        "p_min_at": float(grid[np.argmax(-ratio)]),
    }
