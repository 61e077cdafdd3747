import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, stats

from tvfrailty.distributions import (
    EggParams,
    GenGammaParams,
    egg_integral,
    gengamma_cdf,
    gengamma_logpdf,
    gengamma_moment,
    gengamma_pdf,
    log_egg_integral,
    unit_mean_theta,
)
from tvfrailty.exceptions import DomainError

params = st.builds(
    GenGammaParams,
    theta=st.floats(0.2, 5.0),
    k=st.floats(0.3, 8.0),
    beta=st.floats(0.4, 3.0),
)


def test_pdf_special_cases():
    assert gengamma_pdf(GenGammaParams(1, 1, 1), 1.0) == pytest.approx(math.exp(-1), rel=1e-14)
    assert gengamma_pdf(GenGammaParams(1, 2, 1), 1.0) == pytest.approx(math.exp(-1), rel=1e-14)


def test_pdf_mpmath_oracle():
    # beta / (theta**(k beta) Gamma(k)) u**(k beta - 1) exp(-(u/theta)**beta)
    mpmath.mp.dps = 30
    k, beta, u = mpmath.mpf("0.5"), mpmath.mpf(2), mpmath.mpf(1)
    ref = beta / mpmath.gamma(k) * u ** (k * beta - 1) * mpmath.exp(-(u ** beta))
    assert gengamma_pdf(GenGammaParams(1, 0.5, 2), 1.0) == pytest.approx(float(ref), rel=1e-13)


def test_pdf_rejects_nonpositive_u():
    with pytest.raises(DomainError):
        gengamma_pdf(GenGammaParams(1, 1, 1), 0.0)
    with pytest.raises(DomainError):
        GenGammaParams(1, -1, 1)


@given(params)
@settings(max_examples=40, deadline=None)
def test_pdf_integrates_to_one(p):
    mode = math.log(p.theta) + math.log(p.k) / p.beta
    lo, hi = mode - 40 / (p.k * p.beta), mode + 5 / p.beta
    val, _ = integrate.quad(lambda z: math.exp(float(gengamma_logpdf(p, math.exp(z))) + z),
                            lo, hi, points=[mode], limit=400)
    assert val == pytest.approx(1.0, abs=1e-6)


@given(params, st.sampled_from([0.5, 1.0, 2.0, 3.0]))
@settings(max_examples=40, deadline=None)
def test_moment_matches_quadrature(p, r):
    # integrate in z = log u to cope with spiky densities
    def f(z):
        return math.exp(r * z + float(gengamma_logpdf(p, math.exp(z))) + z)

    mode = math.log(p.theta) + math.log(p.k + r / p.beta) / p.beta
    lo, hi = mode - 40 / (p.k * p.beta + r), mode + 5 / p.beta
    val, _ = integrate.quad(f, lo, hi, points=[mode], limit=400, epsrel=1e-10)
    assert gengamma_moment(p, r) == pytest.approx(val, rel=1e-6)


def test_moment_examples():
    assert gengamma_moment(GenGammaParams(1, 1, 1), 1) == pytest.approx(1.0, rel=1e-14)
    assert gengamma_moment(GenGammaParams(0.5, 2, 1), 1) == pytest.approx(1.0, rel=1e-14)
    assert gengamma_moment(GenGammaParams(1, 1, 2), 0.5) == pytest.approx(float(mpmath.gamma(1.25)), rel=1e-13)
    with pytest.raises(DomainError):
        gengamma_moment(GenGammaParams(1, 0.5, 1), -1.0)


def test_unit_mean_theta():
    assert unit_mean_theta(1, 1) == pytest.approx(1.0, rel=1e-14)
    assert unit_mean_theta(4, 1) == pytest.approx(0.25, rel=1e-14)
    assert unit_mean_theta(0.5, 2) == pytest.approx(float(mpmath.sqrt(mpmath.pi)), rel=1e-13)


@given(st.floats(0.01, 200.0), st.floats(0.1, 10.0))
@settings(max_examples=100, deadline=None)
def test_unit_mean_mode(k, beta):
    assert GenGammaParams.unit_mean(k, beta).mean() == pytest.approx(1.0, abs=1e-12)


def test_beta_one_is_gamma():
    p = GenGammaParams(0.7, 2.3, 1.0)
    u = np.linspace(0.01, 10, 50)
    np.testing.assert_allclose(gengamma_pdf(p, u), stats.gamma.pdf(u, 2.3, scale=0.7), rtol=1e-10)
    np.testing.assert_allclose(gengamma_cdf(p, u), stats.gamma.cdf(u, 2.3, scale=0.7), rtol=1e-10)
    for r in (0.5, 1, 2):
        assert gengamma_moment(p, r) == pytest.approx(stats.gamma.moment(r, 2.3, scale=0.7)
                                                      if r == int(r) else
                                                      0.7 ** r * math.gamma(2.3 + r) / math.gamma(2.3),
                                                      rel=1e-10)


def test_cdf_matches_scipy_gengamma():
    p = GenGammaParams(1.3, 0.8, 1.7)
    u = np.linspace(0.05, 6, 40)
    np.testing.assert_allclose(gengamma_cdf(p, u), stats.gengamma.cdf(u, 0.8, 1.7, scale=1.3), rtol=1e-10)


def test_egg_examples():
    assert egg_integral(EggParams(3, 1, 1, 0)) == pytest.approx(2.0, rel=1e-10)
    assert egg_integral(EggParams(1, 1, 1, 1)) == pytest.approx(0.5, rel=1e-10)
    assert egg_integral(EggParams(1, 1, 1, 0), scale_lambda=1.0) == pytest.approx(0.5, rel=1e-10)


def test_egg_dense_grid_oracle():
    v = np.linspace(0.0, 12.0, 2_000_001)
    f = v ** 0.5 * np.exp(-0.7 * v - v ** 2)
    ref = integrate.trapezoid(f, v)
    assert egg_integral(EggParams(1.5, 2, 1, 0.7)) == pytest.approx(ref, rel=1e-8)


def test_egg_mpmath_oracle_with_theta():
    e = EggParams(2.2, 0.6, 1.7, 0.3)
    ref = mpmath.quad(lambda u: (u / 1.7) ** 1.2 * mpmath.exp(-0.3 * u / 1.7 - (u / 1.7) ** 0.6), [0, 1, 10, mpmath.inf])
    assert egg_integral(e) == pytest.approx(float(ref), rel=1e-8)


@given(params)
@settings(max_examples=30, deadline=None)
def test_egg_normalizes_gengamma(p):
    # pdf = (u/theta)**(alpha-1) exp(-(u/theta)**beta) / I*  with alpha = k beta
    e = EggParams.from_gengamma(p)
    norm = egg_integral(e)
    for u in (0.3 * p.theta, p.theta, 2.0 * p.theta):
        built = (u / p.theta) ** (e.alpha - 1) * math.exp(-((u / p.theta) ** p.beta)) / norm
        assert built == pytest.approx(gengamma_pdf(p, u), rel=1e-8)


def test_extreme_parameters_stay_finite():
    p = GenGammaParams.unit_mean(500.0, 0.2)
    assert np.isfinite(gengamma_logpdf(p, 1.0))
    assert gengamma_moment(p, 1.0) == pytest.approx(1.0, abs=1e-12)
    # I*(alpha, beta, 1, 0) = Gamma(alpha / beta) / beta, far beyond double range here
    ref = float(mpmath.loggamma(400.0 / 0.3) - mpmath.log(0.3))
    assert log_egg_integral(EggParams(400.0, 0.3)) == pytest.approx(ref, rel=1e-10)
