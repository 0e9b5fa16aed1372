"""Claim-size laws and Cramér-Lundberg parameter sets, including the diffusion scaling.

The scaled model with factor ``n`` uses arrival rate ``n * lam``, claims ``Y / sqrt(n)``
and premium ``(sqrt(n) + theta) * lam * E[Y]``. Total-claim variance and net drift per
unit time are unchanged by the scaling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Mapping

import numpy as np
from scipy import special

from .errors import DivergenceError

FAMILIES = ("exponential", "gamma")


@dataclass(frozen=True)
class ClaimDistribution:
    """Integer-shape Gamma claim law; ``shape == 1`` is the exponential family.

    Every quantity the rest of the package needs is available in closed form:
    moments, survival, mean excess, tilted moments ``E[Y^k e^{sY}]`` and their
    restriction to ``{Y > d}``.
    """

    family: str
    rate: float
    shape: int = 1

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown claim family {self.family!r}; expected one of {FAMILIES}")
        if not (self.rate > 0 and math.isfinite(self.rate)):
            raise ValueError(f"rate must be a positive finite number, got {self.rate!r}")
        if int(self.shape) != self.shape or self.shape < 1:
            raise ValueError(f"shape must be a positive integer, got {self.shape!r}")
        if self.family == "exponential" and self.shape != 1:
            raise ValueError("exponential claims have shape 1")
        object.__setattr__(self, "shape", int(self.shape))
        object.__setattr__(self, "rate", float(self.rate))

    @property
    def mgf_radius(self) -> float:
        return self.rate

    @property
    def mean(self) -> float:
        return self.shape / self.rate

    def moment(self, k: int) -> float:
        """E[Y^k]."""
        return self.tilted_moment(k, 0.0)

    def pdf(self, y):
        y = np.asarray(y, dtype=float)
        k, r = self.shape, self.rate
        out = r**k * np.power(np.maximum(y, 0.0), k - 1) * np.exp(-r * np.maximum(y, 0.0)) / math.factorial(k - 1)
        return np.where(y >= 0, out, 0.0)

    def survival(self, d):
        """P(Y > d)."""
        d = np.asarray(d, dtype=float)
        out = special.gammaincc(self.shape, self.rate * np.maximum(d, 0.0))
        out = np.where(d < 0, 1.0, out)
        return float(out) if out.ndim == 0 else out

    def cdf(self, d):
        return 1.0 - self.survival(d)

    def mean_excess(self, d):
        """E[Y - d | Y > d].

        Uses the finite-sum form for integer shape, which stays accurate for large ``d``
        where the ratio of incomplete gamma functions would cancel.
        """
        t = self.rate * np.maximum(np.asarray(d, dtype=float), 0.0)
        k = self.shape
        num = np.zeros_like(t)
        den = np.zeros_like(t)
        term = np.ones_like(t)
        for i in range(k):
            if i > 0:
                term = term * t / i
            num = num + (k - i) * term
            den = den + term
        out = num / den / self.rate
        return float(out) if out.ndim == 0 else out

    def sup_mean_excess(self) -> float:
        # integer-shape Gamma has increasing failure rate, so the mean excess peaks at d = 0
        return self.mean

    def _check_tilt(self, s):
        if s >= self.rate:
            raise DivergenceError(s, self.rate)

    def mgf(self, s: float) -> float:
        return self.tilted_moment(0, s)

    def tilted_moment(self, k: int, s: float) -> float:
        """E[Y^k e^{sY}] for ``s < mgf_radius``."""
        if not 0 <= k <= 4:
            raise ValueError(f"tilted moments are supported for 0 <= k <= 4, got {k}")
        self._check_tilt(s)
        a, r = self.shape, self.rate
        return (r / (r - s)) ** a * math.exp(special.gammaln(a + k) - special.gammaln(a)) / (r - s) ** k

    def partial_tilted_moment(self, k: int, s: float, d: float) -> float:
        """E[Y^k e^{sY}; Y > d]."""
        return self.tilted_moment(k, s) * float(special.gammaincc(self.shape + k, (self.rate - s) * max(d, 0.0)))

    def scaled(self, n: float) -> "ClaimDistribution":
        """Law of ``Y / sqrt(n)``."""
        return ClaimDistribution(self.family, self.rate * math.sqrt(n), self.shape)

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        """Inverse-CDF exponentials, summed ``shape`` times for Gamma claims."""
        size = (size,) if np.isscalar(size) else tuple(size)
        u = rng.random(size + (self.shape,))
        return -np.log1p(-u).sum(axis=-1) / self.rate

    def to_dict(self) -> dict:
        out = {"family": self.family, "rate": self.rate}
        if self.family == "gamma":
            out["shape"] = self.shape
        return out

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "ClaimDistribution":
        _reject_unknown(data, {"family", "shape", "rate"}, "claim")
        family = data.get("family")
        if "rate" not in data:
            raise ValueError("claim.rate is required")
        if family == "gamma":
            if "shape" not in data:
                raise ValueError("claim.shape is required for gamma claims")
            return gamma(data["shape"], data["rate"])
        if family == "exponential":
            if data.get("shape", 1) != 1:
                raise ValueError("exponential claims have shape 1")
            return exponential(data["rate"])
        raise ValueError(f"unknown claim family {family!r}")


def exponential(rate: float = 1.0) -> ClaimDistribution:
    return ClaimDistribution("exponential", rate, 1)


def gamma(shape: int, rate: float = 1.0) -> ClaimDistribution:
    if isinstance(shape, float) and not shape.is_integer():
        raise ValueError(f"shape must be a positive integer, got {shape!r}")
    return ClaimDistribution("gamma", rate, int(shape))


def _reject_unknown(data, allowed, where):
    if not isinstance(data, Mapping):
        raise ValueError(f"{where} must be a JSON object")
    unknown = set(data) - set(allowed)
    if unknown:
        raise ValueError(f"unknown field(s) in {where}: {sorted(unknown)}")


def _positive(name, value):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValueError(f"{name} must be a number, got {value!r}")
    if not (value > 0 and math.isfinite(value)):
        raise ValueError(f"{name} must be positive and finite, got {value!r}")
    return float(value)


@dataclass(frozen=True)
class CLParameters:
    """Arrival rate, relative loading, discount rate and claim law of the unscaled model."""

    lam: float
    theta: float
    delta: float
    claim: ClaimDistribution

    def __post_init__(self):
        for name in ("lam", "theta", "delta"):
            object.__setattr__(self, name, _positive(name, getattr(self, name)))

    @property
    def c(self) -> float:
        """Premium rate ``(1 + theta) * lam * E[Y]``."""
        return (1.0 + self.theta) * self.lam * self.claim.mean

    @property
    def drift(self) -> float:
        """Net drift ``theta * lam * E[Y]`` of the diffusion approximation."""
        return self.theta * self.lam * self.claim.mean

    @property
    def variance(self) -> float:
        """Instantaneous variance ``lam * E[Y^2]``."""
        return self.lam * self.claim.moment(2)

    def to_dict(self) -> dict:
        return {"lambda": self.lam, "theta": self.theta, "delta": self.delta, "claim": self.claim.to_dict()}

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "CLParameters":
        _reject_unknown(data, {"lambda", "theta", "delta", "claim"}, "parameters")
        missing = {"lambda", "theta", "delta", "claim"} - set(data)
        if missing:
            raise ValueError(f"missing field(s) in parameters: {sorted(missing)}")
        return cls(
            lam=_positive("lambda", data["lambda"]),
            theta=_positive("theta", data["theta"]),
            delta=_positive("delta", data["delta"]),
            claim=ClaimDistribution.from_dict(data["claim"]),
        )


@dataclass(frozen=True)
class ScaledParameters:
    base: CLParameters
    n: float
    lam_n: float = field(init=False)
    c_n: float = field(init=False)
    theta_n: float = field(init=False)
    claim_n: ClaimDistribution = field(init=False)

    def __post_init__(self):
        n = _positive("n", self.n)
        b = self.base
        rn = math.sqrt(n)
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "lam_n", n * b.lam)
        object.__setattr__(self, "c_n", (rn + b.theta) * b.lam * b.claim.mean)
        object.__setattr__(self, "theta_n", b.theta / rn)
        object.__setattr__(self, "claim_n", b.claim.scaled(n))

    @property
    def sqrt_n(self) -> float:
        return math.sqrt(self.n)

    @property
    def delta(self) -> float:
        return self.base.delta

    @property
    def pay_at_zero_value(self) -> float:
        """Payoff at zero surplus when all premium is paid out until the first claim."""
        return self.c_n / (self.lam_n + self.base.delta)


def scale(base: CLParameters, n: float) -> ScaledParameters:
    return ScaledParameters(base, n)


def example_parameters() -> CLParameters:
    """Gamma(2, 1) claims, lam = 10, theta = 0.07, delta = 0.1."""
    return CLParameters(lam=10.0, theta=0.07, delta=0.1, claim=gamma(2, 1.0))
