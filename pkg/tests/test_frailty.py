import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, special, stats

from tvfrailty.distributions import GenGammaParams, gengamma_moment
from tvfrailty.exceptions import DomainError
from tvfrailty.frailty import (
    FrailtySpec,
    ModulationFn,
    conditional_frailty_moments,
    cv_squared,
    cv_squared_derivative,
    mu_t,
    rfv_scaled,
    rfv_star,
    rfv_star_linear_approx,
    transform_params,
)
from tvfrailty.survival import HazardSpec


# -- modulation ---------------------------------------------------------------


@pytest.mark.parametrize("mod", [
    ModulationFn(),
    ModulationFn("exp_quadratic", rho=0.01),
    ModulationFn("exp_quadratic", rho=-0.001, constraint_decreasing=False),
    ModulationFn("exp_transition", rho=0.2, target=0.6),
])
def test_modulation_starts_at_one_and_stays_positive(mod):
    assert mod(0.0) == 1.0
    t = np.linspace(0, 80, 161)
    assert np.all(mod(t) > 0)


def test_exp_transition_limit():
    mod = ModulationFn("exp_transition", rho=0.3, target=0.5)
    assert mod(200.0) == pytest.approx(0.5, abs=1e-12)
    assert mod(1.0) == pytest.approx(math.exp(-0.3) + (1 - math.exp(-0.3)) * 0.5)


def test_increasing_modulation_needs_override():
    with pytest.raises(DomainError):
        ModulationFn("exp_quadratic", rho=-0.01)
    with pytest.raises(DomainError):
        ModulationFn("exp_transition", rho=0.1, target=1.5)
    assert ModulationFn("exp_quadratic", rho=-0.01, constraint_decreasing=False).is_increasing


def test_modulation_derivative_matches_finite_difference():
    for mod in (ModulationFn("exp_quadratic", rho=0.01), ModulationFn("exp_transition", rho=0.2, target=0.4)):
        t = np.array([0.5, 3.0, 12.0])
        fd = (mod(t + 1e-6) - mod(t - 1e-6)) / 2e-6
        np.testing.assert_allclose(mod.derivative(t), fd, rtol=1e-7)


# -- frailty spec and moments -----------------------------------------------------


def test_spec_requires_unit_mean():
    with pytest.raises(DomainError):
        FrailtySpec(GenGammaParams(1.0, 2.0, 1.0))
    FrailtySpec(GenGammaParams(0.5, 2.0, 1.0))


def test_transform_params_examples():
    p = GenGammaParams(2.0, 1.0, 1.5)
    q = transform_params(p, 0.5)
    assert (q.theta, q.k, q.beta) == pytest.approx((math.sqrt(2), 1.0, 3.0))
    assert transform_params(p, 1.0) == p
    q = transform_params(GenGammaParams(1.0, 0.5, 1.0), 0.25)
    assert (q.theta, q.k, q.beta) == pytest.approx((1.0, 0.5, 4.0))
    with pytest.raises(DomainError):
        transform_params(p, 0.0)


def test_closure_small_sample():
    rng = np.random.default_rng(11)
    p = GenGammaParams(1.0, 0.5, 1.0)
    u = rng.standard_gamma(0.5, 100_000) ** 0.25
    q = transform_params(p, 0.25)
    res = stats.kstest(u, stats.gengamma(q.k, q.beta, scale=q.theta).cdf)
    assert res.pvalue > 0.01


def test_mu_t_examples():
    spec = FrailtySpec.gamma(1.0)
    assert mu_t(spec, 7.0) == pytest.approx(1.0, abs=1e-14)
    spec = FrailtySpec.gengamma(1.0, 1.0, ModulationFn("exp_quadratic", rho=math.log(2.0)))
    assert mu_t(spec, 1.0) == pytest.approx(special.gamma(1.5), rel=1e-13)
    spec = FrailtySpec.gamma(0.3, rho=0.5)
    assert mu_t(spec, 20.0) == pytest.approx(1.0, abs=1e-12)
    assert mu_t(spec, 0.0) == pytest.approx(1.0, abs=1e-14)


@given(st.floats(0.05, 20), st.floats(0.3, 3), st.floats(0, 0.05), st.floats(0, 40))
@settings(max_examples=60, deadline=None)
def test_normalized_frailty_has_unit_mean(k, beta, rho, t):
    spec = FrailtySpec.gengamma(k, beta, ModulationFn("exp_quadratic", rho=rho))
    h = float(spec.h(t))
    q = transform_params(spec.base, h)
    assert gengamma_moment(q, 1.0) / mu_t(spec, t) == pytest.approx(1.0, abs=1e-8)


def test_cv_squared_examples():
    assert cv_squared(FrailtySpec.gamma(4.0), 3.0) == pytest.approx(0.25, rel=1e-12)
    spec = FrailtySpec.gamma(2.0, rho=0.5)
    assert cv_squared(spec, 30.0) == pytest.approx(0.0, abs=1e-12)


def test_cv_squared_against_moment_quadrature():
    spec = FrailtySpec.gengamma(0.5, 0.8, ModulationFn("exp_quadratic", rho=-math.log(0.6),
                                                        constraint_decreasing=True))
    p = spec.base
    dist = stats.gengamma(p.k, p.beta, scale=p.theta)

    def moment(r):
        def f(z):
            return math.exp(r * 0.6 * z + dist.logpdf(math.exp(z)) + z)
        return integrate.quad(f, -80, 8, points=[math.log(p.theta)], limit=400, epsrel=1e-12)[0]

    ref = moment(2) / moment(1) ** 2 - 1
    assert cv_squared(spec, 1.0) == pytest.approx(ref, rel=1e-8)


def test_cv_squared_second_component():
    spec = FrailtySpec.gamma(2.0, k2=4.0)
    assert cv_squared(spec, 5.0) == pytest.approx((1 + 0.5) * (1 + 0.25) - 1, rel=1e-12)


def test_cv_squared_derivative():
    assert cv_squared_derivative(FrailtySpec.gamma(1.0), 4.0) == 0.0
    spec = FrailtySpec.gamma(1.0, rho=0.01)
    h = 1e-5
    fd = (cv_squared(spec, 5 + h) - cv_squared(spec, 5 - h)) / (2 * h)
    assert cv_squared_derivative(spec, 5.0) == pytest.approx(fd, rel=1e-6)
    inc = FrailtySpec.gamma(1.0, rho=-0.01, constraint_decreasing=False)
    assert cv_squared_derivative(inc, 3.0) > 0


def test_cv_squared_follows_h():
    spec = FrailtySpec.gengamma(0.7, 1.3, ModulationFn("exp_quadratic", rho=0.003))
    cv = cv_squared(spec, np.linspace(0, 60, 121))
    assert np.all(np.diff(cv) <= 0)


# -- relative frailty variance ------------------------------------------------------


@pytest.mark.parametrize("s", [0.0, 0.3, 5.0, 200.0])
def test_rfv_scaled_gamma_constant(s):
    assert rfv_scaled(GenGammaParams.unit_mean(0.7, 1.0), s) == pytest.approx(1 / 0.7, rel=1e-8)


def test_rfv_scaled_at_zero_is_cv_squared():
    p = GenGammaParams.unit_mean(0.5, 1.25)
    assert rfv_scaled(p, 0.0) == pytest.approx(float(cv_squared(FrailtySpec(p), 0.0)), rel=1e-9)


def test_rfv_scaled_dense_grid_oracle():
    p = GenGammaParams.unit_mean(0.5, 1.25)
    lam = 10.0 * p.theta
    z = np.linspace(-60.0, 6.0, 1_000_001)
    v = np.exp(z)

    def integral(alpha):
        return integrate.trapezoid(np.exp(alpha * z - lam * v - v ** 1.25), z)

    a = 0.5 * 1.25
    ref = integral(a + 2) * integral(a) / integral(a + 1) ** 2 - 1
    assert rfv_scaled(p, 10.0) == pytest.approx(ref, rel=1e-8)


def test_rfv_scaled_monotone_direction():
    s = np.logspace(-2, 4, 25)
    dec = [rfv_scaled(GenGammaParams.unit_mean(1.0, 0.8), x) for x in s]
    inc = [rfv_scaled(GenGammaParams.unit_mean(1.0, 1.25), x) for x in s]
    assert np.all(np.diff(dec) < 0)
    assert np.all(np.diff(inc) > 0)


def test_rfv_star_gamma_constant():
    spec = FrailtySpec.gamma(0.4)
    t = np.arange(0, 51)
    np.testing.assert_allclose(rfv_star(spec, HazardSpec.constant(0.05), t), 2.5, rtol=1e-10)


def test_rfv_star_at_zero_is_cv_squared():
    spec = FrailtySpec.gengamma(0.5, 0.8, ModulationFn("exp_quadratic", rho=1e-4))
    assert rfv_star(spec, HazardSpec.constant(0.05), 0.0) == pytest.approx(float(cv_squared(spec, 0.0)), rel=1e-9)


@pytest.mark.parametrize("beta", [0.8, 1.25])
def test_rfv_star_matches_rfv_scaled_when_time_invariant(beta):
    p = GenGammaParams.unit_mean(0.5, beta)
    spec = FrailtySpec(p)
    for rate in (0.02, 0.3):
        hz = HazardSpec.constant(rate)
        for t in (5.0, 40.0):
            assert rfv_star(spec, hz, t) == pytest.approx(rfv_scaled(p, rate * t), abs=1e-6)


def test_rfv_star_double_integration_oracle():
    k, beta, rho, lam, t = 0.5, 0.8, 1e-4, math.exp(-3.34), 30
    spec = FrailtySpec.gengamma(k, beta, ModulationFn("exp_quadratic", rho=rho))
    p = spec.base
    hs = np.exp(-rho * np.arange(1, t + 1) ** 2)
    mus = p.theta ** hs * special.gamma(k + hs / beta) / special.gamma(k)
    h_t, mu_t_ = hs[-1], mus[-1]
    dist = stats.gengamma(k, beta, scale=p.theta)

    def moment(j):
        def f(z):
            u = math.exp(z)
            cum = lam * np.sum(u ** hs / mus)
            return (u ** h_t / mu_t_) ** j * math.exp(-cum + dist.logpdf(u) + z)
        return integrate.quad(f, -150, 8, points=[0.0, -5.0, -20.0], limit=500, epsrel=1e-12)[0]

    ref = moment(2) * moment(0) / moment(1) ** 2 - 1
    assert rfv_star(spec, HazardSpec.constant(lam), t) == pytest.approx(ref, rel=1e-7)


def test_two_component_rfv_star_gamma_gamma():
    # gamma U (h = 1) times gamma V: survivors' heterogeneity is not constant,
    # but at t = 0 it equals the product-rule CV^2
    spec = FrailtySpec.gamma(2.0, k2=3.0)
    assert rfv_star(spec, HazardSpec.constant(0.05), 0.0) == pytest.approx(float(cv_squared(spec, 0.0)), rel=1e-9)
    assert np.all(np.isfinite(rfv_star(spec, HazardSpec.constant(0.05), np.arange(0, 30))))


def test_linear_approx_limits():
    spec = FrailtySpec.gamma(100.0, rho=0.001)
    assert rfv_star_linear_approx(FrailtySpec.gamma(1.0), 0.3, 0.9, 10.0) == pytest.approx(0.3)
    assert rfv_star_linear_approx(FrailtySpec.gamma(1.0, rho=1.0), 0.3, 0.9, 50.0) == pytest.approx(0.0, abs=1e-300)
    with pytest.raises(DomainError):
        rfv_star_linear_approx(spec, 0.01, 0.0, 1.0)


def test_linear_approx_close_to_exact_for_small_variance():
    spec = FrailtySpec.gamma(100.0, rho=0.001)
    hz = HazardSpec.constant(0.05)
    mu_c, rfv0 = conditional_frailty_moments(spec, hz, 10.0)
    exact = rfv_star(spec, hz, 10.0)
    assert rfv_star_linear_approx(spec, rfv0, mu_c, 10.0) == pytest.approx(exact, rel=0.05)
