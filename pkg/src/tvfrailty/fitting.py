"""Maximum likelihood fitting and profile-likelihood intervals.

The free parameters are optimized on the unconstrained scale defined by
their links: a bounded Nelder-Mead pass to get near the optimum, then
L-BFGS-B with central-difference gradients to converge.  Hessian-based
standard errors are reported but are advisory; intervals come from the
profile likelihood.
"""

import logging
import math
import warnings
from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np
from scipy import optimize, stats

from .exceptions import ConvergenceWarning, DomainError, NumericError
from .likelihood import aic, check_grid, deviance, loglik_status

__all__ = [
    "FitOptions",
    "FitResult",
    "ProfileCI",
    "fit",
    "profile_ci",
    "maximize",
    "profile_interval",
    "numeric_gradient",
    "numeric_hessian",
    "initial_values",
]

logger = logging.getLogger(__name__)

_PENALTY = 1e10


@dataclass(frozen=True)
class FitOptions:
    """Optimizer settings.

    Parameters
    ----------
    simplex : bool
        Run the Nelder-Mead stage before the quasi-Newton stage.
    simplex_maxiter : int, optional
        Nelder-Mead iteration cap; defaults to ``60 * n_params``.
    maxiter : int
        L-BFGS-B iteration cap.
    tol : float
        Projected-gradient tolerance on the per-observation log-likelihood.
    fd_step : float
        Relative central-difference step on the optimizer scale.
    init : {"auto", "config"}
        ``auto`` also tries data-driven starting values and keeps the better.
    ci_level : float, optional
        Compute profile intervals at this level for ``profile`` parameters.
    profile : tuple of str or "all"
        Parameters to profile when ``ci_level`` is set.
    compute_se : bool
        Compute the numerical Hessian and Wald standard errors.
    """

    simplex: bool = True
    simplex_maxiter: int | None = None
    maxiter: int = 500
    tol: float = 1e-7
    fd_step: float = 1e-5
    init: str = "auto"
    ci_level: float | None = None
    profile: tuple | str = "all"
    compute_se: bool = True


class ProfileCI(NamedTuple):
    lower: float
    upper: float
    level: float


@dataclass
class FitResult:
    """Outcome of :func:`fit`.

    ``convergence`` is one of ``"converged"``, ``"max_iter"``,
    ``"degenerate_hessian"`` or ``"failed"``.  ``se`` holds advisory Wald
    standard errors on the natural scale.
    """

    estimates: dict
    loglik_max: float
    aic: float
    deviance: float
    df: int
    convergence: str
    n_params: int
    free_names: list
    internal: np.ndarray
    config: object = None
    loglik_init: float = math.nan
    se: dict = field(default_factory=dict)
    cov_internal: np.ndarray | None = None
    profile_cis: dict = field(default_factory=dict)
    n_evals: int = 0
    message: str = ""

    @property
    def converged(self):
        return self.convergence in ("converged", "degenerate_hessian")

    def wald_ci(self, name, level=0.95):
        """Wald interval built on the optimizer scale and mapped back."""
        if self.cov_internal is None:
            return ProfileCI(math.nan, math.nan, level)
        i = self.free_names.index(name)
        sd = math.sqrt(self.cov_internal[i, i]) if self.cov_internal[i, i] > 0 else math.nan
        z = stats.norm.ppf(0.5 + level / 2.0)
        p = self.config.param(name)
        lo = p.to_natural(self.internal[i] - z * sd)
        hi = p.to_natural(self.internal[i] + z * sd)
        return ProfileCI(min(lo, hi), max(lo, hi), level)

    def to_dict(self):
        return {
            "estimates": self.estimates,
            "free_parameters": list(self.free_names),
            "loglik": self.loglik_max,
            "loglik_initial": self.loglik_init,
            "n_params": self.n_params,
            "aic": self.aic,
            "deviance": self.deviance,
            "df": self.df,
            "convergence": self.convergence,
            "message": self.message,
            "n_evaluations": self.n_evals,
            "standard_errors_advisory": self.se,
            "profile_cis": {k: {"lower": v.lower, "upper": v.upper, "level": v.level}
                            for k, v in self.profile_cis.items()},
        }


# -- numerical derivatives ------------------------------------------------------


def _steps(z, rel):
    return rel * np.maximum(1.0, np.abs(z))


def numeric_gradient(f, z, rel_step=1e-5):
    """Central-difference gradient of ``f`` at ``z``."""
    z = np.asarray(z, dtype=float)
    h = _steps(z, rel_step)
    g = np.empty_like(z)
    for i in range(z.size):
        e = np.zeros_like(z)
        e[i] = h[i]
        g[i] = (f(z + e) - f(z - e)) / (2.0 * h[i])
    return g


def numeric_hessian(f, z, rel_step=1e-4):
    """Central-difference Hessian of ``f`` at ``z``."""
    z = np.asarray(z, dtype=float)
    n = z.size
    h = _steps(z, rel_step)
    f0 = f(z)
    H = np.empty((n, n))
    for i in range(n):
        ei = np.zeros(n)
        ei[i] = h[i]
        H[i, i] = (f(z + ei) - 2.0 * f0 + f(z - ei)) / h[i] ** 2
        for j in range(i):
            ej = np.zeros(n)
            ej[j] = h[j]
            H[i, j] = H[j, i] = (f(z + ei + ej) - f(z + ei - ej) - f(z - ei + ej)
                                 + f(z - ei - ej)) / (4.0 * h[i] * h[j])
    return H


# -- generic optimizer ------------------------------------------------------------


class _Counted:
    def __init__(self, f):
        self.f = f
        self.n = 0

    def __call__(self, z):
        self.n += 1
        return self.f(z)


def _clip_to_bounds(z, bounds):
    z = np.array(z, dtype=float)
    for i, (lo, hi) in enumerate(bounds):
        if lo is not None:
            z[i] = max(z[i], lo)
        if hi is not None:
            z[i] = min(z[i], hi)
    return z


def maximize(neg_f, z0, bounds=None, options=FitOptions()):
    """Minimize ``neg_f`` from ``z0``: bounded Nelder-Mead then L-BFGS-B.

    Returns ``(z, value, status, message, n_evals)``, ``status`` being
    ``"converged"``, ``"max_iter"`` or ``"failed"``.
    """
    z0 = np.asarray(z0, dtype=float)
    n = z0.size
    bounds = list(bounds) if bounds is not None else [(None, None)] * n
    f = _Counted(neg_f)
    z = _clip_to_bounds(z0, bounds)
    if n == 0:
        return z, float(f(z)), "converged", "no free parameters", f.n

    if options.simplex:
        simplex = [z]
        for i in range(n):
            v = z.copy()
            step = 0.3 * max(1.0, abs(z[i]))
            hi = bounds[i][1]
            v[i] = z[i] + step if hi is None or z[i] + step <= hi else z[i] - step
            simplex.append(v)
        nm_bounds = None if all(b == (None, None) for b in bounds) else optimize.Bounds(
            [-np.inf if b[0] is None else b[0] for b in bounds],
            [np.inf if b[1] is None else b[1] for b in bounds])
        maxiter = options.simplex_maxiter or 60 * n
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            res = optimize.minimize(f, z, method="Nelder-Mead", bounds=nm_bounds,
                                    options={"initial_simplex": np.array(simplex), "maxiter": maxiter,
                                             "xatol": 1e-3, "fatol": 1e-9})
        if np.isfinite(res.fun) and res.fun <= f(z):
            z = _clip_to_bounds(res.x, bounds)

    def jac(x):
        return numeric_gradient(f, x, options.fd_step)

    res = optimize.minimize(f, z, jac=jac, method="L-BFGS-B", bounds=bounds,
                            options={"maxiter": options.maxiter, "gtol": options.tol,
                                     "ftol": 1e-15, "maxls": 40})
    z = res.x
    value = float(res.fun)
    if res.status == 1:
        status = "max_iter"
    elif res.success:
        status = "converged"
    else:
        # ABNORMAL_TERMINATION usually means the line search hit the
        # finite-difference noise floor; accept when the gradient is small
        g = jac(z)
        free = np.array([not ((lo is not None and zi <= lo and gi > 0) or
                              (hi is not None and zi >= hi and gi < 0))
                         for zi, gi, (lo, hi) in zip(z, g, bounds)])
        status = "converged" if np.all(np.abs(g[free]) < 100 * options.tol) else "failed"
    return z, value, status, str(res.message), f.n


# -- model objective ------------------------------------------------------------------


class _NegLoglik:
    """Negative log-likelihood on the optimizer scale."""

    def __init__(self, config, data):
        self.config = config
        self.data = data
        self.ok = True

    def total(self, z):
        try:
            x = self.config.from_internal(z)
            ll, ok = loglik_status(self.config, x, self.data, strict=False)
        except (DomainError, NumericError, OverflowError, FloatingPointError, ValueError):
            return _PENALTY * self.data.n_total
        if not ok or not math.isfinite(ll):
            return _PENALTY * self.data.n_total
        return -ll

    def __call__(self, z):
        return self.total(z) / self.data.n_total


# -- starting values --------------------------------------------------------------------


def _no_frailty_hazard(hazard, ages, neg, pos):
    """Rates of a frailty-free current-status fit for one event."""
    idx = hazard.grid_index(ages)
    n_steps = int(idx.max(initial=0))
    times = hazard.delta * np.arange(1, n_steps + 1)
    if hazard.kind == "log_linear":
        def cum(theta):
            return hazard.delta * np.concatenate([[0.0], np.cumsum(np.exp(theta[0] + theta[1] * times))])
        theta0 = np.array([np.log(0.05), 0.0])
    else:
        piece = np.searchsorted(np.asarray(hazard.cutpoints), times, side="left")

        def cum(theta):
            return hazard.delta * np.concatenate([[0.0], np.cumsum(np.exp(theta)[piece])])
        theta0 = np.full(len(hazard.rates), np.log(0.05))

    def nll(theta):
        lam = cum(theta)[idx]
        s = np.exp(-lam)
        with np.errstate(divide="ignore"):
            ll = neg * (-lam) + pos * np.log(np.maximum(-np.expm1(-lam), 1e-300))
        return -float(ll.sum())

    res = optimize.minimize(nll, theta0, method="L-BFGS-B",
                            bounds=[(-12, 3)] * theta0.size if hazard.kind != "log_linear"
                            else [(-15, 5), (-1, 1)])
    theta = res.x
    if hazard.kind == "log_linear":
        return {"a": theta[0], "b": theta[1]}
    # pieces without data keep the default
    used = np.zeros(theta.size, bool)
    used[np.unique(np.searchsorted(np.asarray(hazard.cutpoints), np.asarray(ages)[idx > 0], side="left"))] = True
    return {"rates": np.where(used, np.exp(theta), 0.05)}


def initial_values(config, data):
    """Data-driven starting values for the free parameters.

    Hazards come from a frailty-free fit to each margin.  Frailty shapes and
    the modulation rate come from the empirical association: ``phi`` is
    close to ``1/k`` for gamma frailty, and ``log phi`` falls roughly like
    ``-2 rho t**2`` under ``h(t) = exp(-rho t**2)``.
    """
    from .association import empirical_phi

    d = data.aggregated()
    vals = dict(config.values())
    neg1 = d.counts[:, 0] + d.counts[:, 1] + d.marginal1[:, 0]
    pos1 = d.counts[:, 2] + d.counts[:, 3] + d.marginal1[:, 1]
    neg2 = d.counts[:, 0] + d.counts[:, 2] + d.marginal2[:, 0]
    pos2 = d.counts[:, 1] + d.counts[:, 3] + d.marginal2[:, 1]
    for event, hz, neg, pos in ((1, config.hazard1, neg1, pos1), (2, config.hazard2, neg2, pos2)):
        est = _no_frailty_hazard(hz, d.ages, neg, pos)
        if hz.kind == "log_linear":
            vals[f"a{event}"], vals[f"b{event}"] = est["a"], est["b"]
        else:
            for i, r in enumerate(est["rates"]):
                vals[f"lambda{event}_{i}"] = float(r)

    ages, phi, w = empirical_phi(d).retained()
    keep = phi > 1e-3
    ages, phi, w = ages[keep], phi[keep], w[keep]
    t_max = max(float(d.ages.max()), 1.0)
    k0, rho0, k2_0 = 1.0, 0.0, None
    if ages.size >= 3:
        if config.modulation == "exp_quadratic":
            X = np.column_stack([np.ones_like(ages), ages ** 2])
            sw = np.sqrt(w / w.max())
            coef, *_ = np.linalg.lstsq(X * sw[:, None], np.log(phi) * sw, rcond=None)
            k0 = math.exp(-coef[0])
            rho0 = min(max(-coef[1] / 2.0, 0.0), 5.0 / t_max ** 2)
        else:
            k0 = 1.0 / float(np.average(phi, weights=w))
        if config.two_component:
            late = ages >= np.median(ages)
            k2_0 = 1.0 / float(np.average(phi[late], weights=w[late]))
            k0 = 1.0 / max(1.0 / k0 - 1.0 / k2_0, 0.05)
    k0 = min(max(k0, 0.02), 50.0)
    if config.family == "gengamma":
        beta0 = 1.0
        if config.parametrization == "alpha_beta":
            vals["alpha"] = k0 * beta0
        else:
            vals["k"] = k0
        vals["beta"] = beta0
    else:
        vals["k"] = k0
    if config.modulation == "exp_quadratic":
        vals["rho"] = rho0
    if config.two_component and k2_0 is not None:
        vals["k2"] = min(max(k2_0, 0.05), 100.0)
    free = set(config.free_names)
    return {n: v for n, v in vals.items() if n in free}


# -- public fitting API ----------------------------------------------------------------


def _start_candidates(config, data, options):
    cands = [config.pack()]
    if options.init == "auto":
        try:
            init = initial_values(config, data)
            cands.append(config.pack(init))
        except (DomainError, NumericError, ValueError, np.linalg.LinAlgError) as exc:
            logger.debug("data-driven initial values failed: %s", exc)
    return cands


def fit(config, data, options=None):
    """Maximum likelihood fit of ``config`` to ``data``.

    Raises :class:`DomainError` when the log-likelihood at the chosen
    starting point is not finite, naming the parameter most likely at
    fault.
    """
    options = options or FitOptions()
    check_grid(config, data)
    config = config.with_auto_scales(float(np.max(data.ages)))
    obj = _NegLoglik(config, data)

    best = None
    for x0 in _start_candidates(config, data, options):
        ok = all(config.param(n).contains(v) for n, v in zip(config.free_names, x0))
        z0 = config.to_internal(x0) if ok else None
        val = obj.total(z0) if ok else math.inf
        if val < _PENALTY * data.n_total and (best is None or val < best[1]):
            best = (z0, val)
    if best is None:
        x0 = config.pack()
        culprit = _blame(config, data, x0)
        raise DomainError(f"log-likelihood is not finite at the initial point (check {culprit!r})")
    z0, f0 = best

    z, _, status, message, n_evals = maximize(obj, z0, config.internal_bounds(), options)
    if status == "converged":
        z = _newton_polish(obj.total, z, config.internal_bounds(), options)
    ll = -obj.total(z)
    if ll < -f0:
        z, ll, status = z0, -f0, "failed"
    result = _make_result(config, data, z, ll, status, message, n_evals, -f0)

    if options.compute_se and config.n_params > 0:
        _attach_se(result, obj, options)
    if options.ci_level is not None:
        names = config.free_names if options.profile == "all" else list(options.profile)
        for name in names:
            result.profile_cis[name] = profile_ci(config, data, result, name, options.ci_level, options)
    return result


def _newton_polish(f, z, bounds, options, max_steps=3):
    """Newton steps on the numerical Hessian; quasi-Newton stalls at the gradient noise floor."""
    fz = f(z)
    for _ in range(max_steps):
        g = numeric_gradient(f, z, options.fd_step)
        H = numeric_hessian(f, z, rel_step=1e-4)
        try:
            if np.linalg.eigvalsh(H).min() <= 0:
                break
            step = np.linalg.solve(H, g)
        except np.linalg.LinAlgError:
            break
        trial = z - step
        if not np.array_equal(_clip_to_bounds(trial, bounds), trial):
            break
        ft = f(trial)
        if not ft < fz:
            break
        z, fz = trial, ft
    return z


def _blame(config, data, x0):
    """Name the free parameter whose value makes the log-likelihood non-finite.

    Each parameter in turn is reset to a neutral value (the model default,
    or the data-driven start); the first whose reset restores a finite
    log-likelihood is blamed.
    """
    names = config.free_names
    base = config.unpack(x0)
    neutral = replace(config, params=()).values()
    try:
        neutral.update(initial_values(config, data))
    except (DomainError, NumericError, ValueError, np.linalg.LinAlgError):
        pass

    def finite(values):
        try:
            return loglik_status(config, values, data)[1]
        except (DomainError, NumericError, FloatingPointError, ValueError):
            return False

    for name in names:
        if finite({**base, name: neutral[name]}):
            return name
    return names[0] if names else "<none>"


def _make_result(config, data, z, ll, status, message, n_evals, ll_init):
    x = config.from_internal(z)
    fitted = config.with_values(dict(zip(config.free_names, x)))
    dev, df = deviance(fitted, None, data) if ll > -_PENALTY else (math.nan, 0)
    return FitResult(
        estimates=fitted.values(),
        loglik_max=ll,
        aic=aic(ll, config.n_params),
        deviance=dev,
        df=df,
        convergence=status,
        n_params=config.n_params,
        free_names=config.free_names,
        internal=np.asarray(z, dtype=float),
        config=fitted,
        loglik_init=ll_init,
        n_evals=n_evals,
        message=message,
    )


def _attach_se(result, obj, options):
    H = numeric_hessian(obj.total, result.internal, rel_step=1e-4)
    try:
        eig = np.linalg.eigvalsh(H)
        if not np.all(np.isfinite(H)) or eig.min() <= 0:
            raise np.linalg.LinAlgError("Hessian not positive definite")
        cov = np.linalg.inv(H)
    except np.linalg.LinAlgError:
        if result.convergence == "converged":
            result.convergence = "degenerate_hessian"
        result.se = {n: math.nan for n in result.free_names}
        return
    result.cov_internal = cov
    jac = result.config.jacobian_diag(result.internal)
    se = np.abs(jac) * np.sqrt(np.diag(cov))
    result.se = dict(zip(result.free_names, map(float, se)))


def profile_interval(neg_f, z_hat, index, drop, bounds=None, se=None, options=FitOptions(),
                     max_expand=12):
    """Profile-likelihood interval for coordinate ``index`` on the optimizer scale.

    ``neg_f`` is the negative log-likelihood (total, not averaged).  The
    interval is where the profile lies within ``drop`` of its maximum.
    Returns ``(lower, upper, lower_open, upper_open)``; an open side could
    not be bracketed within the search range or the parameter's bounds.
    """
    z_hat = np.asarray(z_hat, dtype=float)
    n = z_hat.size
    bounds = list(bounds) if bounds is not None else [(None, None)] * n
    others = [j for j in range(n) if j != index]
    f_hat = neg_f(z_hat)
    inner_opts = FitOptions(simplex=False, maxiter=options.maxiter, tol=options.tol,
                            fd_step=options.fd_step)
    scale = max(1.0, abs(f_hat))
    warm = {1: z_hat[others].copy(), -1: z_hat[others].copy()}

    def profile_drop(v, direction):
        if not others:
            return neg_f(np.array([v])) - f_hat

        def reduced(y):
            z = np.empty(n)
            z[index] = v
            z[others] = y
            return neg_f(z) / scale

        y, val, *_ = maximize(reduced, warm[direction], [bounds[j] for j in others], inner_opts)
        warm[direction] = y
        return val * scale - f_hat

    if drop <= 0:
        return z_hat[index], z_hat[index], False, False

    step0 = se if se is not None and np.isfinite(se) and se > 0 else 0.5
    ends = []
    for direction in (-1, 1):
        bound = bounds[index][0] if direction < 0 else bounds[index][1]
        warm[direction] = z_hat[others].copy()
        inside, step = z_hat[index], step0
        outside, is_open = None, False
        for _ in range(max_expand):
            v = z_hat[index] + direction * step
            if bound is not None and direction * (v - bound) >= 0:
                v = bound
            d = profile_drop(v, direction)
            if d >= drop:
                outside = v
                break
            inside = v
            if v == bound:
                break
            step *= 2.0
        if outside is None:
            if inside != bound:
                is_open = True
                warnings.warn(f"profile did not drop by {drop:.4g} within the search range",
                              ConvergenceWarning, stacklevel=2)
            ends.append((inside, is_open))
            continue
        lo_v, hi_v = sorted((inside, outside))
        root = optimize.brentq(lambda v: profile_drop(v, direction) - drop, lo_v, hi_v,
                               xtol=1e-6 * max(1.0, abs(z_hat[index])), rtol=1e-8)
        ends.append((root, False))
    (lo, lo_open), (hi, hi_open) = ends
    return lo, hi, lo_open, hi_open


def profile_ci(config, data, fit_result, param, level=0.95, options=None):
    """Profile-likelihood interval for ``param`` on the natural scale.

    Endpoints solve ``profile(v) = loglik_max - chi2_1(level) / 2``, every
    other free parameter being re-optimized at each probe.  A side that
    cannot be bracketed is returned as ``-inf``/``inf`` (or the parameter's
    link limit) with a :class:`ConvergenceWarning`.
    """
    options = options or FitOptions()
    cfg = fit_result.config if fit_result.config is not None else config
    if param not in cfg.free_names:
        raise DomainError(f"{param!r} is not a free parameter")
    i = cfg.free_names.index(param)
    p = cfg.param(param)
    mle = p.to_natural(fit_result.internal[i])
    if level <= 0:
        return ProfileCI(mle, mle, level)
    drop = stats.chi2.ppf(level, 1) / 2.0
    se = None
    if fit_result.cov_internal is not None and fit_result.cov_internal[i, i] > 0:
        se = math.sqrt(fit_result.cov_internal[i, i])
    obj = _NegLoglik(cfg, data)
    lo, hi, lo_open, hi_open = profile_interval(obj.total, fit_result.internal, i, drop,
                                                cfg.internal_bounds(), se, options)
    nat = sorted((p.to_natural(lo), p.to_natural(hi)))
    if lo_open:
        nat[0] = 0.0 if p.link == "log" else (p.lower if p.link == "logit" else -math.inf)
    if hi_open:
        nat[1] = p.upper if p.link == "logit" else math.inf
    return ProfileCI(nat[0], nat[1], level)
