import json
import math

import numpy as np
import pytest
from scipy import integrate, stats

from divlab.errors import DivergenceError
from divlab.model import CLParameters, ClaimDistribution, exponential, gamma, scale


@pytest.mark.parametrize("shape,rate", [(1, 1.0), (2, 1.0), (3, 0.5), (4, 2.5)])
def test_moments_match_scipy(shape, rate):
    d = gamma(shape, rate)
    ref = stats.gamma(a=shape, scale=1 / rate)
    for k in range(5):
        assert d.moment(k) == pytest.approx(ref.moment(k), rel=1e-12)
    xs = np.array([0.0, 0.3, 1.0, 4.0, 20.0])
    np.testing.assert_allclose(d.survival(xs), ref.sf(xs), rtol=1e-12, atol=1e-300)
    np.testing.assert_allclose(d.pdf(xs), ref.pdf(xs), rtol=1e-12)


@pytest.mark.parametrize("d0", [0.0, 0.7, 3.0, 40.0])
def test_mean_excess_by_quadrature(d0):
    d = gamma(3, 1.5)
    num, _ = integrate.quad(lambda y: (y - d0) * d.pdf(y), d0, np.inf, epsabs=0, epsrel=1e-12)
    assert d.mean_excess(d0) == pytest.approx(num / d.survival(d0), rel=1e-9)
    assert d.mean_excess(d0) <= d.sup_mean_excess() + 1e-15


def test_exponential_mean_excess_is_flat():
    d = exponential(2.0)
    np.testing.assert_allclose(d.mean_excess(np.array([0.0, 1.0, 50.0])), 0.5)


@pytest.mark.parametrize("k,s", [(0, 0.3), (3, 0.5), (3, -0.2), (4, 0.9)])
def test_tilted_moment_by_quadrature(k, s):
    d = gamma(2, 1.0)

    def f(y):
        return y ** (k + 1) * math.exp((s - 1.0) * y)

    ref, _ = integrate.quad(f, 0, np.inf, epsabs=0, epsrel=1e-12)
    assert d.tilted_moment(k, s) == pytest.approx(ref, rel=1e-9)
    part, _ = integrate.quad(f, 1.3, np.inf, epsabs=0, epsrel=1e-12)
    assert d.partial_tilted_moment(k, s, 1.3) == pytest.approx(part, rel=1e-9)


def test_tilt_beyond_radius_diverges():
    d = gamma(2, 1.0)
    with pytest.raises(DivergenceError) as exc:
        d.tilted_moment(3, 1.0)
    assert exc.value.radius == 1.0
    with pytest.raises(ValueError):
        d.mgf(2.0)


def test_sampler_mean_and_variance():
    d = gamma(2, 1.0)
    y = d.sample(np.random.default_rng(0), 200_000)
    assert abs(y.mean() - 2.0) < 4 * math.sqrt(2.0 / y.size)
    assert y.var() == pytest.approx(2.0, rel=0.02)


def test_example_scaling(params):
    s = scale(params, 4)
    assert s.lam_n == 40.0
    assert s.claim_n.rate == 2.0
    assert s.c_n == pytest.approx((2 + 0.07) * 10 * 2)
    assert s.theta_n == pytest.approx(0.035)
    assert scale(params, 1).pay_at_zero_value == pytest.approx(21.4 / 10.1)


def test_json_roundtrip(params):
    text = json.dumps(params.to_dict())
    assert CLParameters.from_dict(json.loads(text)) == params
    e = CLParameters(lam=2.0, theta=0.1, delta=0.05, claim=exponential(3.0))
    assert CLParameters.from_dict(e.to_dict()) == e


@pytest.mark.parametrize("bad", [
    {"lambda": 1, "theta": 0.1, "delta": 0.1, "claim": {"family": "gamma", "shape": 2, "rate": 1}, "extra": 1},
    {"lambda": 1, "theta": 0.1, "delta": 0.1, "claim": {"family": "gamma", "shape": 2, "rate": 1, "mu": 0}},
    {"lambda": -1, "theta": 0.1, "delta": 0.1, "claim": {"family": "gamma", "shape": 2, "rate": 1}},
    {"lambda": 1, "theta": 0.1, "claim": {"family": "gamma", "shape": 2, "rate": 1}},
    {"lambda": 1, "theta": 0.1, "delta": 0.1, "claim": {"family": "pareto", "rate": 1}},
    {"lambda": 1, "theta": 0.1, "delta": 0.1, "claim": {"family": "gamma", "shape": 2.5, "rate": 1}},
    {"lambda": 1, "theta": "x", "delta": 0.1, "claim": {"family": "exponential", "rate": 1}},
])
def test_invalid_parameters_rejected(bad):
    with pytest.raises(ValueError):
        CLParameters.from_dict(bad)


def test_claim_validation():
    with pytest.raises(ValueError):
        ClaimDistribution("exponential", 1.0, 2)
    with pytest.raises(ValueError):
        gamma(0, 1.0)
    with pytest.raises(ValueError):
        scale(CLParameters(1.0, 0.1, 0.1, exponential()), 0.0)
