"""Age-specific association measure phi from the Clayton copula.

At each age the joint survivor ``s00`` is tied to the marginal survivors
``s1`` (no event 1) and ``s2`` (no event 2) through

    s00 = (s1**-phi + s2**-phi - 1)**(-1/phi),

with ``phi -> 0`` giving independence ``s00 = s1 s2``.  Under gamma shared
frailty with constant heterogeneity ``phi`` equals ``1/k`` at every age.
"""

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .exceptions import DomainError
from .likelihood import model_probabilities

__all__ = [
    "PhiSeries",
    "clayton_joint",
    "phi_from_probs",
    "empirical_phi",
    "fitted_phi",
]

_SMALL_PHI = 1e-4
_PHI_MAX = 1e6


def _log_joint(phi, a, b):
    # log of the Clayton joint survivor; a = log s1, b = log s2 (both < 0)
    if abs(phi) < _SMALL_PHI:
        return a + b + phi * a * b
    x = math.expm1(-phi * a) + math.expm1(-phi * b)
    if x <= -1.0:
        return -math.inf
    return -math.log1p(x) / phi


def clayton_joint(s1, s2, phi):
    """Joint survivor ``(s1**-phi + s2**-phi - 1)**(-1/phi)``, floored at 0."""
    return math.exp(_log_joint(phi, math.log(s1), math.log(s2)))


def phi_from_probs(s1, s2, s00):
    """Invert the Clayton relation for ``phi``.

    Requires ``0 < s1, s2 < 1`` and ``s00`` strictly inside the Fréchet
    bounds ``(max(0, s1 + s2 - 1), min(s1, s2))``.  ``s00`` on a bound gives
    ``+inf`` (upper) or the most negative attainable value (lower).
    """
    if not (0.0 < s1 < 1.0 and 0.0 < s2 < 1.0):
        raise DomainError(f"marginal survivors must lie in (0, 1), got {s1!r}, {s2!r}")
    lower = max(0.0, s1 + s2 - 1.0)
    upper = min(s1, s2)
    if not (lower <= s00 <= upper):
        raise DomainError(f"s00={s00!r} outside Fréchet bounds [{lower!r}, {upper!r}]")
    if s00 == upper:
        return math.inf
    if s00 == lower:
        return -1.0 if lower > 0 else -math.inf
    a, b = math.log(s1), math.log(s2)
    target = math.log(s00)
    indep = a + b
    if target == indep:
        return 0.0

    def f(phi):
        return _log_joint(phi, a, b) - target

    if target > indep:
        lo, hi = 0.0, 1.0
        while f(hi) < 0:
            lo, hi = hi, hi * 2.0
            if hi > _PHI_MAX:
                return math.inf
    else:
        # f increases on (-1, 0]; near -1 it may be -inf where the copula base hits zero
        lo, hi = -1.0, 0.0
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            val = f(mid)
            if val > 0:
                hi = mid
            elif math.isfinite(val):
                lo = mid
                break
            else:
                lo = mid
        else:
            return lo
    return optimize.brentq(f, lo, hi, xtol=1e-14, rtol=4 * np.finfo(float).eps, maxiter=500)


def _dlogjoint_dphi(phi, a, b):
    if abs(phi) < _SMALL_PHI:
        return a * b
    ea, eb = math.exp(-phi * a), math.exp(-phi * b)
    base = ea + eb - 1.0
    dbase = -(a * ea + b * eb)
    return math.log(base) / phi ** 2 - dbase / (phi * base)


def _phi_variance(s1, s2, s00, phi, n):
    """Delta-method variance of phi-hat under multinomial sampling of ``n`` pairs."""
    a, b = math.log(s1), math.log(s2)
    if abs(phi) < _SMALL_PHI:
        # log joint ~ a + b + phi a b
        d_s1 = (1.0 + phi * b) / s1
        d_s2 = (1.0 + phi * a) / s2
    else:
        base = math.exp(-phi * a) + math.exp(-phi * b) - 1.0
        d_s1 = s1 ** (-phi - 1.0) / base
        d_s2 = s2 ** (-phi - 1.0) / base
    d_phi = _dlogjoint_dphi(phi, a, b)
    if d_phi == 0 or not math.isfinite(d_phi):
        return math.nan
    # implicit function: F = logjoint(phi, s1, s2) - log s00 = 0
    grad_s = -np.array([d_s1, d_s2, -1.0 / s00]) / d_phi
    # (s1, s2, s00) = A p for cell probabilities p = (p00, p01, p10, p11)
    p = np.array([s00, s1 - s00, s2 - s00, 1.0 - s1 - s2 + s00])
    A = np.array([[1, 1, 0, 0], [1, 0, 1, 0], [1, 0, 0, 0]], dtype=float)
    cov_p = (np.diag(p) - np.outer(p, p)) / n
    g = grad_s @ A
    return float(g @ cov_p @ g)


@dataclass(frozen=True)
class PhiSeries:
    """Association measure by age.

    ``status`` is ``"ok"`` for retained points; other values give the reason
    a point was dropped (its ``phi`` and ``weight`` are then NaN).
    """

    ages: np.ndarray
    phi: np.ndarray
    weight: np.ndarray
    status: tuple

    @property
    def ok(self):
        return np.array([s == "ok" for s in self.status], dtype=bool)

    @property
    def n_dropped(self):
        return int((~self.ok).sum())

    def retained(self):
        m = self.ok
        return self.ages[m], self.phi[m], self.weight[m]

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["age", "phi", "weight", "status"])
            for t, p, wt, s in zip(self.ages, self.phi, self.weight, self.status):
                w.writerow([f"{t:.17g}", f"{p:.17g}", f"{wt:.17g}", s])


def empirical_phi(data):
    """Empirical ``phi`` at each age from fully tested pairs.

    Weights are inverse delta-method variances.  Ages where a marginal is 0
    or 1, or where ``s00`` sits on a Fréchet bound, are kept with a status
    explaining why they were dropped.
    """
    d = data.aggregated()
    phis, weights, status = [], [], []
    for t, row in zip(d.ages, d.counts):
        n = row.sum()
        phi, wt, st = math.nan, math.nan, "ok"
        if n <= 0:
            st = "no_pairs"
        else:
            s00 = row[0] / n
            s1 = (row[0] + row[1]) / n
            s2 = (row[0] + row[2]) / n
            if not (0 < s1 < 1 and 0 < s2 < 1):
                st = "degenerate_marginal"
            elif s00 <= max(0.0, s1 + s2 - 1) or s00 >= min(s1, s2):
                st = "frechet_bound"
            else:
                phi = phi_from_probs(s1, s2, s00)
                var = _phi_variance(s1, s2, s00, phi, n)
                if math.isfinite(var) and var > 0:
                    wt = 1.0 / var
                else:
                    phi, st = math.nan, "zero_variance"
        phis.append(phi)
        weights.append(wt)
        status.append(st)
    return PhiSeries(d.ages.copy(), np.array(phis), np.array(weights), tuple(status))


def fitted_phi(config, params, ages):
    """``phi`` implied by the model's survivor functions at ``ages`` (weight 1)."""
    ages = np.atleast_1d(np.asarray(ages, dtype=float))
    s00, s01, s10, _ = model_probabilities(config, params, ages)
    phis, status = [], []
    for a, b, c in zip(s00 + s01, s00 + s10, s00):
        try:
            phis.append(phi_from_probs(float(a), float(b), float(min(c, a, b))))
            status.append("ok")
        except DomainError:
            phis.append(math.nan)
            status.append("degenerate_marginal")
    return PhiSeries(ages, np.array(phis), np.ones(ages.size), tuple(status))
