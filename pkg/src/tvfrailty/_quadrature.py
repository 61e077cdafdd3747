"""Quadrature nodes for expectations over a generalized gamma frailty.

With ``U = theta * W**(1/beta)`` and ``W ~ Gamma(k)``, an expectation
``E g(U)`` becomes an integral over ``y = log W`` against the log-gamma
density ``exp(k y - e**y) / Gamma(k)``.  That density is entire and decays
exponentially in both directions, and every ``g`` used here (Laplace
factors of cumulative hazards, powers of ``u``) is analytic in ``y``, so the
plain trapezoid rule converges geometrically in the step size.  The grid is
truncated at the ``tail`` and ``1 - tail`` quantiles of ``W``.
"""

from dataclasses import dataclass

import numpy as np
from scipy import special

from ._special import log_gamma, trigamma

DEFAULT_STEP = 0.25
DEFAULT_TAIL = 1e-15


@dataclass(frozen=True)
class FrailtyNodes:
    """Nodes ``log_u`` and probability weights ``weights`` (summing to one)."""

    log_u: np.ndarray
    weights: np.ndarray

    def expect(self, values):
        return values @ self.weights


def _log_gamma_quantiles(k, tail):
    if k < 1.0:
        # P(W < w) = w**k / Gamma(k + 1) * (1 + O(w)) for tiny w
        lo = (np.log(tail) + log_gamma(k + 1.0)) / k
    else:
        lo = np.log(special.gammaincinv(k, tail))
    hi = np.log(special.gammainccinv(k, tail))
    return float(lo), float(hi)


def gengamma_nodes(p, h_max=1.0, step=DEFAULT_STEP, tail=DEFAULT_TAIL):
    """Trapezoid nodes for ``E g(U**h)`` with ``h <= h_max``.

    The step in ``y`` is ``step`` scaled down by the spread of ``log W``
    (narrow for large ``k``) and by ``beta / h_max`` (the rate at which
    ``u**h`` varies in ``y``).
    """
    k, beta = p.k, p.beta
    sd = float(np.sqrt(trigamma(k)))
    dy = step * min(1.0, sd) * min(1.0, beta / max(h_max, 1e-12))
    lo, hi = _log_gamma_quantiles(k, tail)
    n = int(np.ceil((hi - lo) / dy)) + 1
    y = np.linspace(lo, hi, n)
    d = y - np.log(k)
    # log density relative to its mode at y = log k
    logw = k * (d - np.expm1(d))
    w = np.exp(logw - logw.max())
    w /= w.sum()
    return FrailtyNodes(log_u=np.log(p.theta) + y / beta, weights=w)
