"""Time-varying frailty ``U(t) = U**h(t) / E{U**h(t)}`` and its heterogeneity measures.

``U`` is a unit-mean generalized gamma variable, so ``U**h`` is again
generalized gamma with ``theta_t = theta**h`` and ``beta_t = beta / h``.  An
optional second, time-invariant gamma component ``V`` (mean one, variance
``1/k2``) multiplies the first.
"""

import math
from dataclasses import dataclass, field, replace

import numpy as np

from ._special import digamma, log_gamma_ratio
from .distributions import (
    EggParams,
    GenGammaParams,
    gengamma_log_moment,
    log_egg_integral,
)
from .exceptions import DomainError

__all__ = [
    "ModulationFn",
    "FrailtySpec",
    "transform_params",
    "mu_t",
    "cv_squared",
    "cv_squared_derivative",
    "rfv_scaled",
    "rfv_star",
    "rfv_star_linear_approx",
    "conditional_frailty_moments",
]

MODULATION_KINDS = ("constant_one", "exp_quadratic", "exp_transition")


@dataclass(frozen=True)
class ModulationFn:
    """Deterministic modulation ``h(t)`` with ``h(0) = 1``.

    Parameters
    ----------
    kind : {"constant_one", "exp_quadratic", "exp_transition"}
        ``exp_quadratic`` is ``exp(-rho t**2)``; ``exp_transition`` is
        ``exp(-rho t) + (1 - exp(-rho t)) * target``, which moves a generalized
        gamma toward the gamma when ``target`` equals its ``beta``.
    rho : float
        Rate parameter.
    target : float
        Limit of ``h`` as ``t -> inf`` for ``exp_transition``.
    constraint_decreasing : bool
        Reject parameter values that make ``h`` increasing.
    """

    kind: str = "constant_one"
    rho: float = 0.0
    target: float = 1.0
    constraint_decreasing: bool = True

    def __post_init__(self):
        if self.kind not in MODULATION_KINDS:
            raise DomainError(f"unknown modulation kind {self.kind!r}")
        if not np.isfinite(self.rho):
            raise DomainError("rho must be finite")
        if self.kind == "exp_transition":
            if not (self.rho > 0 and self.target > 0):
                raise DomainError("exp_transition needs rho > 0 and target > 0")
        if self.constraint_decreasing and self.is_increasing:
            raise DomainError(
                f"{self.kind} with rho={self.rho}, target={self.target} gives an "
                "increasing h(t); pass constraint_decreasing=False to allow it")

    @property
    def is_constant(self):
        if self.kind == "constant_one":
            return True
        if self.kind == "exp_quadratic":
            return self.rho == 0.0
        return self.target == 1.0

    @property
    def is_increasing(self):
        if self.kind == "exp_quadratic":
            return self.rho < 0
        if self.kind == "exp_transition":
            return self.target > 1
        return False

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if self.kind == "constant_one":
            out = np.ones_like(t)
        elif self.kind == "exp_quadratic":
            out = np.exp(-self.rho * t * t)
        else:
            e = np.exp(-self.rho * t)
            out = e + (1.0 - e) * self.target
        return out[()] if out.ndim == 0 else out

    def derivative(self, t):
        t = np.asarray(t, dtype=float)
        if self.kind == "constant_one":
            out = np.zeros_like(t)
        elif self.kind == "exp_quadratic":
            out = -2.0 * self.rho * t * np.exp(-self.rho * t * t)
        else:
            out = self.rho * np.exp(-self.rho * t) * (self.target - 1.0)
        return out[()] if out.ndim == 0 else out


@dataclass(frozen=True)
class FrailtySpec:
    """One- or two-component time-varying frailty.

    ``base`` must have unit mean; use :meth:`gamma` or :meth:`gengamma` to
    build one.  ``k2`` switches on the gamma component ``V``.
    """

    base: GenGammaParams
    modulation: ModulationFn = field(default_factory=ModulationFn)
    k2: float | None = None
    normalization: str = "unit_mean_Ut"

    def __post_init__(self):
        if self.normalization != "unit_mean_Ut":
            raise DomainError(f"unsupported normalization {self.normalization!r}")
        log_mean = gengamma_log_moment(self.base, 1.0)
        if abs(log_mean) > 1e-8:
            raise DomainError(
                f"frailty base must have unit mean (got mean {math.exp(log_mean):.10g}); "
                "build it with GenGammaParams.unit_mean")
        if self.k2 is not None and not (np.isfinite(self.k2) and self.k2 > 0):
            raise DomainError("k2 must be finite and positive")

    @classmethod
    def gamma(cls, k, rho=0.0, k2=None, constraint_decreasing=True):
        kind = "constant_one" if rho == 0.0 else "exp_quadratic"
        mod = ModulationFn(kind, rho=rho, constraint_decreasing=constraint_decreasing)
        return cls(GenGammaParams.unit_mean(k, 1.0), mod, k2)

    @classmethod
    def gengamma(cls, k, beta, modulation=None, k2=None):
        return cls(GenGammaParams.unit_mean(k, beta), modulation or ModulationFn(), k2)

    @property
    def two_component(self):
        return self.k2 is not None

    def h(self, t):
        return self.modulation(t)

    def log_mu(self, t):
        """``log E{U**h(t)}``."""
        return gengamma_log_moment(self.base, self.modulation(t))

    def with_modulation(self, modulation):
        return replace(self, modulation=modulation)


def transform_params(p, h):
    """Parameters of ``U**h`` for ``U ~ GenGamma(p)``: ``(theta**h, k, beta/h)``."""
    if not (np.isfinite(h) and h > 0):
        raise DomainError(f"power h must be positive, got {h!r}")
    return GenGammaParams(p.theta ** h, p.k, p.beta / h)


def mu_t(spec, t):
    """Normalizing mean ``E{U**h(t)}``."""
    return np.exp(spec.log_mu(t))


def _log1p_cv2_base(spec, t):
    # log(1 + CV^2) of U**h(t)
    k, beta = spec.base.k, spec.base.beta
    h = np.asarray(spec.modulation(t), dtype=float)
    return log_gamma_ratio(k, 2.0 * h / beta) - 2.0 * log_gamma_ratio(k, h / beta)


def cv_squared(spec, t):
    """Squared coefficient of variation of ``U(t)`` over the whole population.

    Unaffected by the unit-mean normalization.  With a second component the
    product rule ``(1 + c_U)(1 + c_V) - 1`` applies, ``c_V = 1/k2``.
    """
    log1p = _log1p_cv2_base(spec, t)
    if spec.k2 is not None:
        log1p = log1p + np.log1p(1.0 / spec.k2)
    return np.expm1(log1p)


def cv_squared_derivative(spec, t):
    """Time derivative of :func:`cv_squared`.

    Its sign is the sign of ``h'(t)`` because digamma is increasing.
    """
    k, beta = spec.base.k, spec.base.beta
    h = np.asarray(spec.modulation(t), dtype=float)
    dh = spec.modulation.derivative(t)
    psi_gap = digamma(k + 2.0 * h / beta) - digamma(k + h / beta)
    return (2.0 / beta) * dh * (1.0 + cv_squared(spec, t)) * psi_gap


def rfv_scaled(p, s):
    """Relative frailty variance of a time-invariant ``U`` at integrated hazard ``s``.

    Built from three Egg-family integrals; constant ``1/k`` for the gamma and
    tends to ``1/(k beta)`` as ``s`` grows.
    """
    if not (np.isfinite(s) and s >= 0):
        raise DomainError("s must be finite and nonnegative")
    a = p.k * p.beta
    lam = s * p.theta
    l2 = log_egg_integral(EggParams(a + 2.0, p.beta, 1.0, lam))
    l1 = log_egg_integral(EggParams(a + 1.0, p.beta, 1.0, lam))
    l0 = log_egg_integral(EggParams(a, p.beta, 1.0, lam))
    return float(np.expm1(l2 + l0 - 2.0 * l1))


def rfv_star(spec, hazard, t):
    """Relative frailty variance of ``U(t)`` among event-free survivors at ``t``.

    Computed as ``I2 I0 / I1**2 - 1`` where ``I_j`` is the survivor-weighted
    ``j``-th moment of ``U(t)``; the inner cumulative hazard uses the same
    ``delta`` step approximation as the survivor functions.
    """
    from .survival import SurvivalGrid

    times, idx, scalar = _grid_indices(hazard, t)
    grid = SurvivalGrid(spec, hazard.delta, int(idx.max(initial=0)))
    i0, i1, i2 = grid.frailty_moments(hazard.grid_rates(grid.n_steps), idx, current=True)
    out = np.expm1(np.log(i2) + np.log(i0) - 2.0 * np.log(i1))
    return float(out[0]) if scalar else out


def conditional_frailty_moments(spec, hazard, t):
    """Mean and squared CV of the time-invariant ``U`` among survivors at ``t``.

    Returns ``(mu_c, rfv0)``.  Selection follows the full time-varying model,
    so these feed :func:`rfv_star_linear_approx`.
    """
    from .survival import SurvivalGrid

    times, idx, scalar = _grid_indices(hazard, t)
    grid = SurvivalGrid(spec, hazard.delta, int(idx.max(initial=0)))
    i0, i1, i2 = grid.frailty_moments(hazard.grid_rates(grid.n_steps), idx, current=False)
    mu_c = i1 / i0
    rfv0 = np.expm1(np.log(i2) + np.log(i0) - 2.0 * np.log(i1))
    if scalar:
        return float(mu_c[0]), float(rfv0[0])
    return mu_c, rfv0


def rfv_star_linear_approx(spec, rfv0, mu_c, t):
    """First-order small-variance approximation of ``RFV*(t)``.

    ``rfv0 * [h / (h + (1 - h)/mu_c)]**2``; equals ``rfv0`` when ``h(t) = 1``
    and vanishes as ``h(t) -> 0``.
    """
    h = np.asarray(spec.modulation(t), dtype=float)
    if np.any(np.asarray(mu_c) <= 0):
        raise DomainError("mu_c must be positive")
    ratio = h / (h + (1.0 - h) / np.asarray(mu_c, dtype=float))
    out = np.asarray(rfv0, dtype=float) * ratio ** 2
    return out[()] if out.ndim == 0 else out


def _grid_indices(hazard, t):
    scalar = np.ndim(t) == 0
    times = np.atleast_1d(np.asarray(t, dtype=float))
    return times, hazard.grid_index(times), scalar
