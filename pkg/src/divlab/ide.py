"""Integro-differential engine for the scaled operator

    G_n u(x) = (n lam + delta) u(x) - c_n u'(x) - n lam * int_0^x u(x - y) dF_{Y_n}(y),

and exponential-sum solutions of ``G_n u = 0``.

For integer-shape Gamma claims the scaled density is ``poly(y) * exp(-beta y)``, so
every convolution of an exponential-sum or affine piece has a closed form. The same
kernel moments give the linear constraints that pin down the coefficients of an
exponential-sum solution, which makes the fit an exactly determined linear solve.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy import integrate

from .errors import CapabilityError, ConvergenceError, DivergenceError, StructuralError
from .model import ScaledParameters

RESIDUAL_TOL = 1e-8
GRID_PER_BAND = 512


# ---------------------------------------------------------------------------
# kernel integrals


def _unit_moments(z, imax):
    """K_i(z) = int_0^1 t^i e^{z t} dt for i = 0..imax (z real or complex, Re z <= 0)."""
    z = np.asarray(z, dtype=complex)
    shape = z.shape
    z = z.reshape(-1)
    out = np.empty((imax + 1, z.size), dtype=complex)
    small = np.abs(z) < 1.0
    if np.any(small):
        zs = z[small]
        for i in range(imax + 1):
            term = np.ones_like(zs)
            acc = term / (i + 1)
            for j in range(1, 28):
                term = term * zs / j
                acc = acc + term / (i + j + 1)
            out[i][small] = acc
    big = ~small
    if np.any(big):
        zb = z[big]
        ez = np.exp(zb)
        k = np.expm1(zb) / zb
        out[0][big] = k
        for i in range(1, imax + 1):
            k = (ez - i * k) / zb
            out[i][big] = k
    return out.reshape((imax + 1,) + shape)


def _poly_exp_integral(m, sigma, v1, v2):
    """Return ``(value, ref)`` with value = int_{v1}^{v2} v^m exp(-sigma (v - ref)) dv.

    ``ref`` is the endpoint where the exponential is largest, so ``value`` never
    overflows; callers fold ``exp(-sigma * ref)`` into their own prefactor.
    """
    sigma = complex(sigma)
    v1 = np.asarray(v1, dtype=float)
    v2 = np.asarray(v2, dtype=float)
    length = v2 - v1
    if sigma.real >= 0:
        ref = v1
        base = v1
        sign = 1.0
        ks = _unit_moments(-sigma * length, m)
    else:
        ref = v2
        base = v2
        sign = -1.0
        ks = _unit_moments(sigma * length, m)
    value = np.zeros(np.broadcast(v1, v2).shape, dtype=complex)
    for i in range(m + 1):
        value = value + math.comb(m, i) * base ** (m - i) * sign**i * length ** (i + 1) * ks[i]
    return value, ref


# ---------------------------------------------------------------------------
# piecewise value functions


@dataclass(frozen=True, eq=False)
class ExpSumSegment:
    """One band of a piecewise value function on ``[lo, hi)``.

    Either ``terms`` or ``affine`` is populated. ``terms`` holds pairs ``(a, alpha)``
    representing ``Re(a * exp(alpha * (x - origin)))``; a complex pair stands for the
    cos/sin-weighted real term ``exp(Re alpha (x - origin)) (Re a cos(w t) - Im a sin(w t))``.
    ``affine`` is ``(intercept, slope)`` in absolute coordinates.
    """

    lo: float
    hi: float
    terms: tuple = ()
    affine: tuple | None = None
    origin: float = 0.0

    def __post_init__(self):
        if bool(self.terms) == (self.affine is not None):
            raise StructuralError("a segment carries either exponential terms or an affine part, not both")
        if not self.hi > self.lo:
            raise StructuralError(f"empty segment [{self.lo}, {self.hi})")
        object.__setattr__(self, "terms", tuple((complex(a), complex(al)) for a, al in self.terms))

    @property
    def is_affine(self) -> bool:
        return self.affine is not None

    def _coef(self):
        a = np.array([t[0] for t in self.terms], dtype=complex)
        al = np.array([t[1] for t in self.terms], dtype=complex)
        return a, al

    def derivative(self, x, order: int = 1):
        x = np.asarray(x, dtype=float)
        if self.is_affine:
            p, q = self.affine
            if order == 0:
                return p + q * x
            if order == 1:
                return np.full_like(x, q)
            return np.zeros_like(x)
        a, al = self._coef()
        e = np.exp(np.multiply.outer(x - self.origin, al))
        return (e * (a * al**order)).sum(axis=-1).real

    def __call__(self, x):
        return self.derivative(x, 0)

    def kernel_moment(self, anchor, beta: float, m: int):
        """int over [lo, min(hi, anchor)] of u(s) (anchor - s)^m exp(-beta (anchor - s)) ds."""
        anchor = np.asarray(anchor, dtype=float)
        v2 = anchor - self.lo
        v1 = np.maximum(anchor - self.hi, 0.0)
        active = v2 > 0
        v2c = np.where(active, v2, 0.0)
        v1c = np.where(active, np.minimum(v1, v2c), 0.0)
        total = np.zeros(anchor.shape, dtype=complex)
        if self.is_affine:
            p, q = self.affine
            val0, ref = _poly_exp_integral(m, beta, v1c, v2c)
            val1, _ = _poly_exp_integral(m + 1, beta, v1c, v2c)
            total = ((p + q * anchor) * val0 - q * val1) * np.exp(-beta * ref)
        else:
            for a, al in self.terms:
                sigma = al + beta
                val, ref = _poly_exp_integral(m, sigma, v1c, v2c)
                total = total + a * val * np.exp(al * (anchor - self.origin) - sigma * ref)
        return np.where(active, total.real, 0.0)

    def absolute_terms(self):
        """Terms re-expressed without an origin shift, ``a * exp(alpha * x)``."""
        return [(a * np.exp(-al * self.origin), al) for a, al in self.terms]

    def to_dict(self) -> dict:
        d = {"lo": float(self.lo), "hi": None if math.isinf(self.hi) else float(self.hi)}
        if self.is_affine:
            d["intercept"], d["slope"] = float(self.affine[0]), float(self.affine[1])
            return d
        out = []
        for a, al in self.absolute_terms():
            if al.imag == 0 and a.imag == 0:
                out.append([a.real, al.real])
            else:
                out.append([a.real, al.real, -a.imag, al.imag])
        d["terms"] = out
        return d

    @classmethod
    def from_dict(cls, d) -> "ExpSumSegment":
        hi = math.inf if d.get("hi") is None else float(d["hi"])
        if "terms" in d:
            terms = []
            for t in d["terms"]:
                if len(t) == 2:
                    terms.append((t[0], t[1]))
                elif len(t) == 4:
                    # e^{alpha x} (a cos(w x) + b sin(w x)) = Re((a - i b) e^{(alpha + i w) x})
                    terms.append((complex(t[0], -t[2]), complex(t[1], t[3])))
                else:
                    raise StructuralError(f"bad term {t!r}")
            return cls(float(d["lo"]), hi, terms=tuple(terms))
        return cls(float(d["lo"]), hi, affine=(float(d["intercept"]), float(d["slope"])))


@dataclass(frozen=True, eq=False)
class PiecewiseValueFunction:
    """Ordered segments covering ``[0, inf)``; evaluation at a junction uses the right segment."""

    segments: tuple
    _los: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        segs = tuple(self.segments)
        if not segs:
            raise StructuralError("no segments")
        if segs[0].lo != 0.0:
            raise StructuralError(f"first segment starts at {segs[0].lo}, not 0")
        for left, right in zip(segs, segs[1:]):
            if left.hi != right.lo:
                raise StructuralError(f"gap or overlap between {left.hi} and {right.lo}")
        object.__setattr__(self, "segments", segs)
        object.__setattr__(self, "_los", np.array([s.lo for s in segs]))

    @property
    def breakpoints(self) -> list:
        return [s.lo for s in self.segments[1:]]

    @property
    def x_max(self) -> float:
        return self.segments[-1].hi

    def segment_index(self, x):
        x = np.asarray(x, dtype=float)
        if np.any(x < 0) or (not math.isinf(self.x_max) and np.any(x >= self.x_max)):
            raise StructuralError(f"x outside [0, {self.x_max})")
        return np.searchsorted(self._los, x, side="right") - 1

    def derivative(self, x, order: int = 1):
        x = np.asarray(x, dtype=float)
        idx = self.segment_index(x)
        out = np.empty(x.shape)
        for i, seg in enumerate(self.segments):
            mask = idx == i
            if np.any(mask):
                out[mask] = seg.derivative(x[mask], order)
        return out if out.ndim else float(out)

    def __call__(self, x):
        return self.derivative(x, 0)

    def left_derivative(self, x, order: int = 1):
        """Derivative from the left (uses the segment ending at ``x`` when ``x`` is a junction)."""
        x = np.asarray(x, dtype=float)
        idx = np.searchsorted(self._los, x, side="left") - 1
        idx = np.maximum(idx, 0)
        out = np.empty(x.shape)
        for i, seg in enumerate(self.segments):
            mask = idx == i
            if np.any(mask):
                out[mask] = seg.derivative(x[mask], order)
        return out if out.ndim else float(out)

    def convolve(self, x, beta: float, m: int):
        """sum over segments of ``kernel_moment(x, beta, m)``."""
        x = np.asarray(x, dtype=float)
        return sum(seg.kernel_moment(x, beta, m) for seg in self.segments)

    def junction_jumps(self):
        """(x, value jump, first-derivative jump) at each interior breakpoint."""
        out = []
        for left, right in zip(self.segments, self.segments[1:]):
            b = right.lo
            out.append((b, float(right(b) - left(b)), float(right.derivative(b) - left.derivative(b))))
        return out

    def to_json(self) -> list:
        return [s.to_dict() for s in self.segments]

    def dumps(self, **kw) -> str:
        return json.dumps(self.to_json(), **kw)

    @classmethod
    def from_json(cls, data) -> "PiecewiseValueFunction":
        if isinstance(data, str):
            data = json.loads(data)
        return cls(tuple(ExpSumSegment.from_dict(d) for d in data))

    def replace_tail(self, segment: ExpSumSegment) -> "PiecewiseValueFunction":
        """Cut the function at ``segment.lo`` and append ``segment``."""
        keep = []
        for s in self.segments:
            if s.lo >= segment.lo:
                break
            if s.hi > segment.lo:
                s = ExpSumSegment(s.lo, segment.lo, s.terms, s.affine, s.origin)
            keep.append(s)
        return PiecewiseValueFunction(tuple(keep) + (segment,))


def affine_segment(lo, hi, intercept, slope=1.0) -> ExpSumSegment:
    return ExpSumSegment(lo, hi, affine=(intercept, slope))


# ---------------------------------------------------------------------------
# operators


def _require_gamma(scaled: ScaledParameters):
    claim = scaled.base.claim
    if claim.family not in ("gamma", "exponential"):
        raise CapabilityError(f"closed-form route does not support {claim.family!r}; use the marching solver")
    return claim.shape, scaled.claim_n.rate


def _convolution(u: PiecewiseValueFunction, x, scaled: ScaledParameters):
    k, beta = _require_gamma(scaled)
    return beta**k / math.factorial(k - 1) * u.convolve(x, beta, k - 1)


def _convolution_quad(u: PiecewiseValueFunction, x: float, scaled: ScaledParameters):
    """Adaptive quadrature of int_0^x u(x - y) f_{Y_n}(y) dy split at the junctions of u."""
    if x <= 0:
        return 0.0
    pdf = scaled.claim_n.pdf
    cuts = sorted({0.0, x} | {x - b for b in u.breakpoints if 0 < b < x})
    total = 0.0
    for a, b in zip(cuts, cuts[1:]):
        val, _ = integrate.quad(lambda y: float(u(x - y)) * float(pdf(y)), a, b, epsabs=0.0, epsrel=1e-13, limit=200)
        total += val
    return total


def eval_Gn(u: PiecewiseValueFunction, x, scaled: ScaledParameters, method: str = "closed"):
    """G_n applied to ``u`` at ``x`` (scalar or array).

    ``method="closed"`` integrates each segment exactly; ``"quadrature"`` uses adaptive
    Gauss-Kronrod quadrature split at the segment junctions and accepts any claim law
    with a density.
    """
    x = np.asarray(x, dtype=float)
    if method == "closed":
        conv = _convolution(u, x, scaled)
    elif method == "quadrature":
        conv = np.vectorize(lambda t: _convolution_quad(u, float(t), scaled))(x)
    else:
        raise ValueError(f"unknown method {method!r}")
    out = (scaled.lam_n + scaled.delta) * u(x) - scaled.c_n * u.derivative(x) - scaled.lam_n * conv
    return float(out) if np.ndim(out) == 0 else out


def eval_Fn(u: PiecewiseValueFunction, x, scaled: ScaledParameters, method: str = "closed"):
    """min(G_n u, u' - 1)."""
    g = eval_Gn(u, x, scaled, method)
    out = np.minimum(g, u.derivative(x) - 1.0)
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class GnDecomposition:
    """G_n at an exponential sum extended to the whole line.

    ``total = full_line + tail`` where ``full_line`` integrates over all claim sizes
    and ``tail`` adds back ``n lam * int_{x}^{inf} u(x - y) dF_{Y_n}(y)``.
    """

    total: float
    full_line: float
    tail: float


def eval_Gn_at_extended(terms: Sequence, x: float, scaled: ScaledParameters) -> GnDecomposition:
    """G_n at ``u(x) = sum a_i exp(alpha_i x)`` taken as defined for all real ``x``.

    The full-line integral is ``sum a_i e^{alpha_i x} M_{Y_n}(-alpha_i)``, so every
    tilt ``-alpha_i`` must lie below the radius of the scaled claim MGF.
    """
    claim = scaled.claim_n
    lam_n, c_n, delta = scaled.lam_n, scaled.c_n, scaled.delta
    full = 0.0
    tail = 0.0
    for a, al in terms:
        a, al = float(np.real(a)), float(np.real(al))
        s = -al
        if s >= claim.mgf_radius:
            raise DivergenceError(s, claim.mgf_radius, f"tilt {s} at or beyond scaled radius {claim.mgf_radius}")
        e = a * math.exp(al * x)
        full += (lam_n + delta) * e - c_n * al * e - lam_n * e * claim.mgf(s)
        tail += lam_n * e * claim.partial_tilted_moment(0, s, x)
    return GnDecomposition(total=full + tail, full_line=full, tail=tail)


# ---------------------------------------------------------------------------
# exponential-sum solutions


def characteristic_polynomial(scaled: ScaledParameters) -> np.ndarray:
    """Coefficients (highest degree first) of (n lam + delta - c_n a)(beta + a)^k - n lam beta^k."""
    k, beta = _require_gamma(scaled)
    lin = np.array([-scaled.c_n, scaled.lam_n + scaled.delta])
    power = np.array([1.0])
    for _ in range(k):
        power = np.polymul(power, [1.0, beta])
    poly = np.polymul(lin, power)
    poly[-1] -= scaled.lam_n * beta**k
    return poly


def characteristic_roots(scaled: ScaledParameters) -> np.ndarray:
    """Exponents ``alpha`` for which ``exp(alpha x)`` annihilates the symbol of G_n.

    Sorted by decreasing real part; for integer-shape Gamma claims there are
    ``shape + 1`` roots and exactly one is positive. Roots are polished by Newton
    steps on the polynomial.
    """
    poly = characteristic_polynomial(scaled)
    roots = np.roots(poly).astype(complex)
    dpoly = np.polyder(poly)
    for _ in range(3):
        roots = roots - np.polyval(poly, roots) / np.polyval(dpoly, roots)
    roots = np.where(np.abs(roots.imag) < 1e-12 * np.maximum(1.0, np.abs(roots)), roots.real, roots)
    order = np.lexsort((-roots.imag, -roots.real))
    roots = roots[order]
    if np.all(roots.imag == 0):
        roots = roots.real
    return roots


def symbol(alpha, scaled: ScaledParameters):
    """G_n applied to exp(alpha x) with the integral taken over all claim sizes, divided by exp(alpha x)."""
    k, beta = _require_gamma(scaled)
    return scaled.lam_n + scaled.delta - scaled.c_n * alpha - scaled.lam_n * (beta / (beta + alpha)) ** k


def _lower_context(lower: PiecewiseValueFunction | None, b: float, scaled: ScaledParameters):
    """Coefficients L_j (j < k) of exp(-beta w) w^j that the part of u below ``b`` contributes."""
    k, beta = _require_gamma(scaled)
    if lower is None or b <= 0:
        return np.zeros(k)
    pre = beta**k / math.factorial(k - 1)
    return np.array([pre * math.comb(k - 1, j) * float(lower.convolve(b, beta, k - 1 - j)) for j in range(k)])


def fit_exp_sum(scaled: ScaledParameters, b: float, value_at_b: float,
                lower: PiecewiseValueFunction | None = None, hi: float = math.inf) -> ExpSumSegment:
    """Exponential sum on ``[b, hi)`` solving G_n = 0 given ``u(b)`` and ``u`` below ``b``.

    Substituting ``u(x) = sum a_i exp(alpha_i (x - b))`` leaves a residual of the form
    ``exp(-beta (x - b)) * poly_{k-1}(x - b)``; zeroing its ``k`` coefficients plus the
    value condition is a square linear system.
    """
    k, beta = _require_gamma(scaled)
    roots = np.asarray(characteristic_roots(scaled), dtype=complex)
    if np.any(np.abs(roots + beta) < 1e-12):
        raise ConvergenceError("characteristic root coincides with -beta")
    rhs = np.zeros(k + 1, dtype=complex)
    mat = np.zeros((k + 1, k + 1), dtype=complex)
    mat[0, :] = 1.0
    rhs[0] = value_at_b
    ell = _lower_context(lower, b, scaled)
    for j in range(k):
        mat[j + 1, :] = (beta + roots) ** (j - k)
        rhs[j + 1] = math.factorial(j) * ell[j] / beta**k
    coef = np.linalg.solve(mat, rhs)
    terms = []
    for a, al in zip(coef, roots):
        if abs(al.imag) == 0:
            terms.append((a.real, al.real))
        elif al.imag > 0:
            terms.append((2 * a, al))
    return ExpSumSegment(b, hi, terms=tuple(terms), origin=b)


def _verification_grid(lo, hi, points=GRID_PER_BAND):
    return np.linspace(lo, hi, points)


def residual_report(u: PiecewiseValueFunction, lo: float, hi: float, scaled: ScaledParameters,
                    points: int = GRID_PER_BAND) -> float:
    grid = _verification_grid(lo, hi, points)
    return float(np.max(np.abs(eval_Gn(u, grid, scaled))))


def solve_gn(scaled: ScaledParameters, x_max: float, tol: float = RESIDUAL_TOL) -> PiecewiseValueFunction:
    """The solution of G_n g = 0 with g(0) = 1 (exponential sum valid on all of ``[0, inf)``).

    Raises ConvergenceError if the residual on ``[0, x_max]``, relative to the natural
    scale ``n lam * max|g|``, exceeds ``tol``.
    """
    if not x_max > 0:
        raise ValueError("x_max must be positive")
    g = PiecewiseValueFunction((fit_exp_sum(scaled, 0.0, 1.0),))
    _check_residual(g, 0.0, x_max, scaled, tol)
    return g


def solve_with_initial(scaled: ScaledParameters, b: float, value_at_b: float, x_max: float,
                       lower: PiecewiseValueFunction | None = None,
                       tol: float = RESIDUAL_TOL) -> PiecewiseValueFunction:
    """Extend ``lower`` (defined on ``[0, b)``) past ``b`` by the solution of G_n = 0 with u(b) = value_at_b."""
    if b <= 0:
        return solve_gn(scaled, x_max, tol)
    if lower is None:
        raise ValueError("solve_with_initial needs the function below b")
    seg = fit_exp_sum(scaled, b, value_at_b, lower)
    u = lower.replace_tail(seg)
    _check_residual(u, b, x_max, scaled, tol)
    return u


def _check_residual(u, lo, hi, scaled, tol):
    if hi <= lo:
        return
    grid = _verification_grid(lo, hi)
    res = np.abs(eval_Gn(u, grid, scaled))
    scale_ = scaled.lam_n * max(1.0, float(np.max(np.abs(u(grid)))))
    worst = float(np.max(res)) / scale_
    if not worst < tol:
        raise ConvergenceError(
            f"G_n residual {worst:.3e} (relative) exceeds {tol:.1e} on [{lo}, {hi}]",
            {"max_relative_residual": worst, "x_at_max": float(grid[np.argmax(res)])},
        )


# ---------------------------------------------------------------------------
# marching fallback


def _march_once(pdf, lam_n, c_n, delta, x_max, h):
    m = int(round(x_max / h))
    y = h * np.arange(m + 1)
    f = pdf(y)
    u = np.empty(m + 1)
    du = np.empty(m + 1)
    u[0] = 1.0
    du[0] = (lam_n + delta) / c_n
    for i in range(1, m + 1):
        # trapezoid for int_0^{x_i} u(x_i - y) f(y) dy; the y = 0 node multiplies the unknown u_i
        conv_known = h * (np.dot(u[i - 1 :: -1][: i], f[1 : i + 1]) - 0.5 * u[0] * f[i])
        conv_self = 0.5 * h * f[0]
        # u_i = u_{i-1} + h/2 (du_{i-1} + du_i),  du_i = ((lam_n + delta) u_i - lam_n conv_i) / c_n
        a = (lam_n + delta - lam_n * conv_self) / c_n
        rhs = u[i - 1] + 0.5 * h * (du[i - 1] - lam_n * conv_known / c_n)
        u[i] = rhs / (1.0 - 0.5 * h * a)
        du[i] = ((lam_n + delta) * u[i] - lam_n * (conv_known + conv_self * u[i])) / c_n
    return y, u, du


def solve_gn_marching(scaled: ScaledParameters, x_max: float, h: float = 0.01,
                      pdf: Callable | None = None):
    """Second-order step-marching solution of G_n g = 0, g(0) = 1, Richardson-extrapolated.

    Works for any scaled claim density ``pdf`` (defaults to the scaled claim law).
    Returns ``(x, g, g')`` on the grid of step ``h``.
    """
    pdf = pdf or scaled.claim_n.pdf
    args = (scaled.lam_n, scaled.c_n, scaled.delta, x_max)
    x1, u1, d1 = _march_once(pdf, *args, h)
    _, u2, d2 = _march_once(pdf, *args, h / 2)
    return x1, (4 * u2[::2] - u1) / 3, (4 * d2[::2] - d1) / 3
