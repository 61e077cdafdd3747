"""Population survivor functions under a time-varying shared frailty.

Time runs on a grid of step ``delta``.  On ``((m-1) delta, m delta]`` the
baseline hazard, ``h`` and ``mu`` are held at their right-endpoint values, so
for ``t = j delta`` the conditional cumulative hazard of an individual with
base frailty ``u`` is

    I(t, u) = delta * sum_{i=1..j} u**h(i delta) * lambda0(i delta) / mu(i delta).

The outer expectation over ``u`` uses the nodes of :mod:`._quadrature`;
with a gamma second component ``V`` it is applied to the gamma Laplace
transform ``(k2 / (k2 + I))**k2`` instead of ``exp(-I)``.
"""

import logging
from dataclasses import dataclass

import numpy as np

from ._quadrature import gengamma_nodes
from .exceptions import DomainError, NumericError

__all__ = [
    "HazardSpec",
    "BivariateSurvival",
    "SurvivalGrid",
    "cumulative_weighted_hazard",
    "survivor",
    "survivor_one_component",
    "survivor_two_component",
    "bivariate_probs",
]

logger = logging.getLogger(__name__)

HAZARD_KINDS = ("piecewise_constant", "log_linear")
CLIP_TOLERANCE = 1e-8


@dataclass(frozen=True)
class HazardSpec:
    """Baseline hazard on a ``delta`` grid.

    ``piecewise_constant``: ``rates[i]`` applies on ``(cutpoints[i-1], cutpoints[i]]``
    with the first piece starting at 0 and the last running to infinity, so
    ``len(rates) == len(cutpoints) + 1``.  ``log_linear``: ``exp(a + b t)``.
    """

    kind: str = "piecewise_constant"
    cutpoints: tuple = ()
    rates: tuple = (0.05,)
    a: float = 0.0
    b: float = 0.0
    delta: float = 1.0

    def __post_init__(self):
        if self.kind not in HAZARD_KINDS:
            raise DomainError(f"unknown hazard kind {self.kind!r}")
        if not (np.isfinite(self.delta) and self.delta > 0):
            raise DomainError("delta must be positive")
        object.__setattr__(self, "cutpoints", tuple(float(c) for c in self.cutpoints))
        object.__setattr__(self, "rates", tuple(float(r) for r in self.rates))
        if self.kind == "piecewise_constant":
            cut = np.asarray(self.cutpoints)
            if len(self.rates) != len(cut) + 1:
                raise DomainError("piecewise hazard needs len(rates) == len(cutpoints) + 1")
            if np.any(np.diff(cut) <= 0):
                raise DomainError("hazard cutpoints must be strictly ascending")
            if any(not (np.isfinite(r) and r >= 0) for r in self.rates):
                raise DomainError("hazard rates must be finite and nonnegative")
        elif not (np.isfinite(self.a) and np.isfinite(self.b)):
            raise DomainError("log-linear hazard coefficients must be finite")

    @classmethod
    def constant(cls, rate, delta=1.0):
        return cls("piecewise_constant", (), (rate,), delta=delta)

    @classmethod
    def piecewise(cls, cutpoints, rates, delta=1.0):
        return cls("piecewise_constant", tuple(cutpoints), tuple(rates), delta=delta)

    @classmethod
    def log_linear(cls, a, b=0.0, delta=1.0):
        return cls("log_linear", a=a, b=b, delta=delta)

    def rate(self, t):
        t = np.asarray(t, dtype=float)
        if self.kind == "log_linear":
            out = np.exp(self.a + self.b * t)
        else:
            piece = np.searchsorted(np.asarray(self.cutpoints), t, side="left")
            out = np.asarray(self.rates)[piece]
        return out[()] if np.ndim(out) == 0 else out

    def grid_index(self, t):
        """Integer ``j`` with ``t = j * delta``; raises if ``t`` is off the grid."""
        t = np.asarray(t, dtype=float)
        j = np.rint(t / self.delta)
        if np.any(t < 0) or np.any(np.abs(j * self.delta - t) > 1e-9 * np.maximum(1.0, np.abs(t))):
            bad = np.atleast_1d(t)[np.atleast_1d(np.abs(j * self.delta - t)
                                                 > 1e-9 * np.maximum(1.0, np.abs(t))) | (np.atleast_1d(t) < 0)]
            raise DomainError(f"time {float(bad[0]):g} is not a nonnegative multiple of delta={self.delta}")
        return j.astype(int)

    def grid_rates(self, n_steps):
        """Hazard at ``i * delta`` for ``i = 1..n_steps``."""
        return np.asarray(self.rate(self.delta * np.arange(1, n_steps + 1)), dtype=float).reshape(n_steps)

    def cumulative(self, t):
        """Step-approximated integrated baseline hazard at grid time ``t``."""
        j = self.grid_index(t)
        cum = np.concatenate([[0.0], np.cumsum(self.grid_rates(int(np.max(j, initial=0))))])
        return self.delta * cum[j]


@dataclass(frozen=True)
class BivariateSurvival:
    """Cell probabilities of a bivariate current-status observation.

    ``s01`` is event 2 only (no event 1), ``s10`` event 1 only, following
    ``S_ij`` with ``i`` indexing event 1 and ``j`` event 2.
    """

    s00: np.ndarray
    s01: np.ndarray
    s10: np.ndarray
    s11: np.ndarray

    @property
    def marginal1(self):
        """Probability of no event 1."""
        return self.s00 + self.s01

    @property
    def marginal2(self):
        """Probability of no event 2."""
        return self.s00 + self.s10

    def as_array(self):
        """Array of shape ``(n, 4)`` ordered ``s00, s01, s10, s11``."""
        return np.column_stack([np.atleast_1d(self.s00), np.atleast_1d(self.s01),
                                np.atleast_1d(self.s10), np.atleast_1d(self.s11)])


class SurvivalGrid:
    """Frailty nodes and the ``u**h / mu`` table for one spec and time grid.

    Instances are immutable after construction and may be shared between
    evaluations with different hazards.

    Parameters
    ----------
    spec : FrailtySpec
    delta : float
        Grid step.
    n_steps : int
        Number of grid steps covered (largest time is ``n_steps * delta``).
    quad_step : float, optional
        Trapezoid step multiplier passed to :func:`gengamma_nodes`.
    """

    def __init__(self, spec, delta, n_steps, quad_step=None):
        self.spec = spec
        self.delta = float(delta)
        self.n_steps = int(n_steps)
        self.times = self.delta * np.arange(1, self.n_steps + 1)
        self.h = np.asarray(spec.modulation(self.times), dtype=float).reshape(self.n_steps)
        self.log_mu = np.asarray(spec.log_mu(self.times), dtype=float).reshape(self.n_steps)
        h_max = max(1.0, float(self.h.max(initial=1.0)))
        kw = {} if quad_step is None else {"step": quad_step}
        self.nodes = gengamma_nodes(spec.base, h_max=h_max, **kw)
        self._scaled = np.exp(self.h[:, None] * self.nodes.log_u[None, :] - self.log_mu[:, None])
        self._scaled.flags.writeable = False

    def integrated(self, rates):
        """``I(j delta, u_n)`` for ``j = 0..n_steps``; shape ``(n_steps + 1, n_nodes)``."""
        rates = np.asarray(rates, dtype=float)
        out = np.zeros((self.n_steps + 1, self.nodes.log_u.size))
        np.cumsum(rates[:, None] * self._scaled, axis=0, out=out[1:])
        out[1:] *= self.delta
        return out

    def laplace(self, cum):
        """Conditional survival given ``U = u`` (and averaged over ``V``)."""
        if self.spec.k2 is None:
            return np.exp(-cum)
        k2 = self.spec.k2
        return np.exp(-k2 * np.log1p(cum / k2))

    def survivor(self, rates, idx):
        idx = np.asarray(idx)
        cum = self.integrated(rates)[idx]
        out = self.laplace(cum) @ self.nodes.weights
        # no exposure yet: exact, not sum(weights)
        return np.where(idx == 0, 1.0, out)

    def bivariate(self, rates1, rates2, idx):
        """Return ``(s00, s01, s10, s11)`` arrays at grid indices ``idx``."""
        idx = np.asarray(idx)
        c1 = self.integrated(rates1)[idx]
        c2 = self.integrated(rates2)[idx]
        w = self.nodes.weights
        if self.spec.k2 is None:
            e1 = np.exp(-c1)
            e2 = np.exp(-c2)
            s00 = (e1 * e2) @ w
            s01 = (e1 * -np.expm1(-c2)) @ w
            s10 = (e2 * -np.expm1(-c1)) @ w
            s11 = (np.expm1(-c1) * np.expm1(-c2)) @ w
            return self._exact_at_zero(idx, s00, s01, s10, s11)
        l1 = self.laplace(c1)
        l2 = self.laplace(c2)
        l12 = self.laplace(c1 + c2)
        s00 = l12 @ w
        s01 = (l1 - l12) @ w
        s10 = (l2 - l12) @ w
        s11 = (1.0 - l1 - l2 + l12) @ w
        return self._exact_at_zero(idx, s00, s01, s10, s11)

    @staticmethod
    def _exact_at_zero(idx, *cells):
        zero = idx == 0
        return tuple(np.where(zero, float(i == 0), c) for i, c in enumerate(cells))

    def frailty_moments(self, rates, idx, current=True):
        """Survivor-weighted moments ``I_0, I_1, I_2`` at grid indices ``idx``.

        ``current=True`` takes moments of the normalized ``U(t)`` (times ``V``
        when present); otherwise of the time-invariant base ``U``.
        """
        idx = np.asarray(idx)
        cum = self.integrated(rates)[idx]
        if current:
            t = idx * self.delta
            h_t = np.asarray(self.spec.modulation(t), dtype=float).reshape(idx.shape)
            log_mu_t = np.asarray(self.spec.log_mu(t), dtype=float).reshape(idx.shape)
            log_x = h_t[:, None] * self.nodes.log_u[None, :] - log_mu_t[:, None]
        else:
            log_x = np.broadcast_to(self.nodes.log_u, cum.shape)
        w = self.nodes.weights
        k2 = self.spec.k2
        out = []
        for j in range(3):
            if k2 is None or not current:
                surv = self.laplace(cum)
            else:
                # E[V^j exp(-V c)] for V ~ Gamma(k2, rate k2)
                c_j = 1.0 if j < 2 else (k2 + 1.0) / k2
                surv = c_j * np.exp(-(k2 + j) * np.log1p(cum / k2))
            out.append((np.exp(j * log_x) * surv) @ w)
        return tuple(out)


def cumulative_weighted_hazard(spec, hazard, t, u):
    """``I(t, u)``, the step approximation of ``int_0^t u**h(s) lambda0(s) / mu(s) ds``."""
    j = int(hazard.grid_index(t))
    u = np.asarray(u, dtype=float)
    if np.any(~(u > 0)):
        raise DomainError("frailty value u must be positive")
    if j == 0:
        return np.zeros_like(u)[()] if u.ndim == 0 else np.zeros_like(u)
    times = hazard.delta * np.arange(1, j + 1)
    h = np.asarray(spec.modulation(times), dtype=float).reshape(j)
    w = hazard.grid_rates(j) / np.exp(np.asarray(spec.log_mu(times), dtype=float).reshape(j))
    out = hazard.delta * (w[:, None] * np.exp(h[:, None] * np.log(np.atleast_1d(u))[None, :])).sum(axis=0)
    return out[0] if u.ndim == 0 else out.reshape(u.shape)


def _evaluate(spec, hazard, t, grid=None):
    scalar = np.ndim(t) == 0
    idx = np.atleast_1d(hazard.grid_index(t))
    if grid is None:
        grid = SurvivalGrid(spec, hazard.delta, int(idx.max(initial=0)))
    s = grid.survivor(hazard.grid_rates(grid.n_steps), idx)
    if np.any(~np.isfinite(s)):
        raise NumericError("survivor quadrature produced non-finite values")
    s = np.clip(s, 0.0, 1.0)
    return float(s[0]) if scalar else s


def survivor_one_component(spec, hazard, t):
    """``S(t) = E exp(-I(t, U))`` for a one-component frailty."""
    if spec.k2 is not None:
        raise DomainError("spec has a second component; use survivor_two_component")
    return _evaluate(spec, hazard, t)


def survivor_two_component(spec, hazard, t):
    """``S(t) = E[(k2 / (k2 + I(t, U)))**k2]`` for ``U(t) proportional to U**h V``."""
    if spec.k2 is None:
        raise DomainError("spec has no second component (k2)")
    return _evaluate(spec, hazard, t)


def survivor(spec, hazard, t):
    """Survivor function for either frailty structure."""
    return _evaluate(spec, hazard, t)


def _clip_cell(name, values):
    values = np.asarray(values, dtype=float)
    worst = float(values.min(initial=0.0))
    if worst < -CLIP_TOLERANCE:
        raise NumericError(f"{name} = {worst:.3g} is negative beyond tolerance; "
                           "quadrature tolerances are inconsistent", achieved=-worst)
    if worst < 0 or float(values.max(initial=0.0)) > 1.0:
        logger.debug("clipping %s to [0, 1] (min %.3g)", name, worst)
    return np.clip(values, 0.0, 1.0)


def bivariate_probs(spec, h1, h2, t, grid=None):
    """The four current-status probabilities ``S00, S01, S10, S11`` at ``t``.

    ``h1`` and ``h2`` are the baseline hazards of events 1 and 2; they must
    share the grid step.
    """
    if h1.delta != h2.delta:
        raise DomainError("both hazards must use the same delta grid")
    scalar = np.ndim(t) == 0
    idx = np.atleast_1d(h1.grid_index(t))
    if grid is None:
        grid = SurvivalGrid(spec, h1.delta, int(idx.max(initial=0)))
    cells = grid.bivariate(h1.grid_rates(grid.n_steps), h2.grid_rates(grid.n_steps), idx)
    cells = [_clip_cell(n, c) for n, c in zip(("s00", "s01", "s10", "s11"), cells)]
    if scalar:
        cells = [float(c[0]) for c in cells]
    return BivariateSurvival(*cells)
