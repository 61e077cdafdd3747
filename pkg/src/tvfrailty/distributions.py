"""Generalized gamma frailty densities, moments and the Egg-family integral.

The generalized gamma density with scale ``theta``, shape ``k`` and power
shape ``beta`` is

    f(u) = beta / (theta**(k*beta) * Gamma(k)) * u**(k*beta - 1) * exp(-(u/theta)**beta)

for ``u > 0``.  ``beta = 1`` gives the ordinary gamma distribution and
``k = 1`` the Weibull.  Everything here is evaluated in log space so that
large ``k`` or small ``beta`` do not overflow.
"""

from dataclasses import dataclass

import numpy as np
from scipy import integrate, optimize, special

from ._special import digamma, log_gamma, log_gamma_ratio, trigamma
from .exceptions import DomainError, NumericError

__all__ = [
    "GenGammaParams",
    "EggParams",
    "gengamma_pdf",
    "gengamma_logpdf",
    "gengamma_cdf",
    "gengamma_moment",
    "gengamma_log_moment",
    "unit_mean_theta",
    "egg_integral",
    "log_egg_integral",
    "digamma",
    "log_gamma",
    "trigamma",
]


def _require_positive(**values):
    for name, v in values.items():
        if not (np.isfinite(v) and v > 0):
            raise DomainError(f"{name} must be finite and positive, got {v!r}")


@dataclass(frozen=True)
class GenGammaParams:
    """Parameters ``(theta, k, beta)`` of a generalized gamma distribution."""

    theta: float
    k: float
    beta: float = 1.0

    def __post_init__(self):
        _require_positive(theta=self.theta, k=self.k, beta=self.beta)

    @classmethod
    def unit_mean(cls, k, beta=1.0):
        """Parameters with ``theta`` chosen so that the mean is exactly one."""
        return cls(unit_mean_theta(k, beta), k, beta)

    @property
    def log_theta(self):
        return float(np.log(self.theta))

    def mean(self):
        return gengamma_moment(self, 1.0)

    def variance(self):
        return gengamma_moment(self, 2.0) - gengamma_moment(self, 1.0) ** 2


@dataclass(frozen=True)
class EggParams:
    """Parameters of the extended generalized gamma / inverse Gaussian family.

    The generalized gamma is the member with ``lam = 0`` and ``alpha = k * beta``.
    """

    alpha: float
    beta: float
    theta: float = 1.0
    lam: float = 0.0

    def __post_init__(self):
        _require_positive(alpha=self.alpha, beta=self.beta, theta=self.theta)
        if not (np.isfinite(self.lam) and self.lam >= 0):
            raise DomainError(f"lam must be finite and nonnegative, got {self.lam!r}")

    @classmethod
    def from_gengamma(cls, p):
        return cls(alpha=p.k * p.beta, beta=p.beta, theta=p.theta, lam=0.0)


def gengamma_logpdf(p, u):
    """Log density of ``GenGamma(p)`` at ``u > 0``."""
    u = np.asarray(u, dtype=float)
    if np.any(~(u > 0)):
        raise DomainError("generalized gamma density is defined for u > 0 only")
    z = np.log(u) - np.log(p.theta)
    out = (np.log(p.beta) - log_gamma(p.k) + (p.k * p.beta - 1.0) * np.log(u)
           - p.k * p.beta * np.log(p.theta) - np.exp(p.beta * z))
    return out[()] if np.ndim(out) == 0 else out


def gengamma_pdf(p, u):
    """Density of ``GenGamma(p)`` at ``u > 0``."""
    return np.exp(gengamma_logpdf(p, u))


def gengamma_cdf(p, u):
    """Distribution function, ``P(k, (u/theta)**beta)`` with ``P`` the regularized gamma."""
    u = np.asarray(u, dtype=float)
    w = np.where(u > 0, (np.maximum(u, 0.0) / p.theta) ** p.beta, 0.0)
    return special.gammainc(p.k, w)


def gengamma_log_moment(p, r):
    """``log E(U**r)`` for ``U ~ GenGamma(p)``; needs ``k + r/beta > 0``."""
    r = np.asarray(r, dtype=float)
    arg = p.k + r / p.beta
    if np.any(~(arg > 0)):
        raise DomainError("moment of order r requires k + r/beta > 0")
    out = r * np.log(p.theta) + log_gamma_ratio(p.k, r / p.beta)
    return out[()] if np.ndim(out) == 0 else out


def gengamma_moment(p, r):
    """``E(U**r) = theta**r * Gamma(k + r/beta) / Gamma(k)``."""
    return np.exp(gengamma_log_moment(p, r))


def unit_mean_theta(k, beta=1.0):
    """Scale making the generalized gamma mean equal one: ``Gamma(k)/Gamma(k + 1/beta)``."""
    _require_positive(k=k, beta=beta)
    return float(np.exp(-log_gamma_ratio(k, 1.0 / beta)))


def _egg_log_integrand(z, alpha, beta, lam):
    # integrand of I* after v = u/theta = exp(z): v**alpha * exp(-lam v - v**beta)
    return alpha * z - lam * np.exp(z) - np.exp(beta * z)


def log_egg_integral(e, epsrel=1e-10):
    """Log of ``I*(alpha, beta, theta, lam)``.

    The integral is taken over ``z = log(u/theta)``, where the integrand is a
    smooth unimodal bump.  The peak is located by root finding, the range is
    cut where the log integrand has fallen by 60, and the remaining finite
    integral goes to adaptive Gauss-Kronrod quadrature.
    """
    alpha, beta, lam = e.alpha, e.beta, e.lam

    def slope(z):
        return alpha - lam * np.exp(z) - beta * np.exp(beta * z)

    # slope is strictly decreasing from alpha to -inf
    hi = 1.0
    while slope(hi) > 0:
        hi *= 2.0
    lo = -1.0
    while slope(lo) < 0:
        lo *= 2.0
    z_peak = optimize.brentq(slope, lo, hi, xtol=1e-14, rtol=1e-14)
    g_peak = _egg_log_integrand(z_peak, alpha, beta, lam)

    # cut both tails where the (concave) log integrand has fallen by `drop`
    drop = 60.0

    def excess(z):
        return _egg_log_integrand(z, alpha, beta, lam) - g_peak + drop

    cuts = []
    for side in (-1.0, 1.0):
        d = 1.0
        while excess(z_peak + side * d) > 0:
            d *= 2.0
        cuts.append(optimize.brentq(excess, z_peak, z_peak + side * d, xtol=1e-10))
    left, right = cuts

    def f(z):
        return np.exp(_egg_log_integrand(z, alpha, beta, lam) - g_peak)

    # geometric breakpoints keep long, nearly exponential tails resolved
    gaps = 2.0 ** np.arange(-4, 64)
    points = np.concatenate([z_peak - gaps[z_peak - gaps > left], [z_peak],
                             z_peak + gaps[z_peak + gaps < right]])
    val, err = integrate.quad(f, left, right, points=np.sort(points), epsrel=epsrel,
                              epsabs=0.0, limit=400)
    if not (val > 0) or err > 1e-8 * val:
        raise NumericError("Egg integral quadrature did not converge", achieved=err / val)
    return float(np.log(e.theta) + g_peak + np.log(val))


def egg_integral(e, scale_lambda=None):
    """``I*(alpha, beta, theta, lam)``, the Egg-family normalizing integral.

    ``scale_lambda`` overrides ``e.lam`` when given.
    """
    if scale_lambda is not None:
        e = EggParams(e.alpha, e.beta, e.theta, scale_lambda)
    return float(np.exp(log_egg_integral(e)))


def log_gamma_sd(k):
    """Standard deviation of ``log W`` for ``W ~ Gamma(k)``."""
    return float(np.sqrt(trigamma(k)))
