"""Simulation of bivariate current status data and Monte Carlo studies.

Each simulated individual gets a base frailty ``u`` (and ``v`` for the
two-component model).  Given the frailty the two events are independent,
with survival probabilities ``exp(-v * I_e(t, u))``, so the test results
are two independent Bernoulli draws.
"""

import csv
import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .exceptions import ConvergenceError, DomainError
from .fitting import FitOptions, fit
from .likelihood import CurrentStatusDataset, model_probabilities

__all__ = [
    "gengamma_rvs",
    "simulate_dataset",
    "SimDesign",
    "StudyReport",
    "run_study",
    "replicate_seed",
    "STUDY_COLUMNS",
]

logger = logging.getLogger(__name__)

STUDY_COLUMNS = ("scenario", "param", "true", "bias", "rmse", "mean_se", "sd", "coverage")


def gengamma_rvs(p, size, rng):
    """Draws from ``GenGamma(theta, k, beta)`` as ``theta * W**(1/beta)``, ``W ~ Gamma(k)``."""
    w = rng.standard_gamma(p.k, size=size)
    return p.theta * w ** (1.0 / p.beta)


def _log_gengamma_rvs(p, size, rng):
    # log-scale draws; W**(1/beta) underflows for small k and beta
    w = rng.standard_gamma(p.k, size=size)
    with np.errstate(divide="ignore"):
        log_w = np.log(w)
    tiny = w == 0.0
    if np.any(tiny):
        # W < 1e-308: use the small-value tail law, W ~ (G * U**(1/k)) with G ~ Gamma(k+1)
        g = rng.standard_gamma(p.k + 1.0, size=int(tiny.sum()))
        log_w[tiny] = np.log(g) + np.log(rng.random(int(tiny.sum()))) / p.k
    return math.log(p.theta) + log_w / p.beta


def replicate_seed(seed, rep):
    """Independent stream for replicate ``rep`` of a study seeded with ``seed``."""
    return np.random.SeedSequence([int(seed), int(rep)])


def simulate_dataset(truth, ages, n_per_age, seed=None, expected=False, values=None):
    """Simulate ``n_per_age`` fully tested pairs at each age.

    Parameters
    ----------
    truth : ModelConfig
        Model with the generating parameter values.
    ages : array_like
        Observation ages on the model grid.
    n_per_age : int or array_like
        Pairs per age.
    seed : int, SeedSequence or Generator, optional
    expected : bool
        Return expected cell counts ``n * S_ij(t)`` instead of random draws.
    values : dict, optional
        Parameter values overriding those stored in ``truth``.
    """
    ages = np.atleast_1d(np.asarray(ages, dtype=float))
    n = np.broadcast_to(np.asarray(n_per_age), ages.shape).astype(int)
    if np.any(n < 1):
        raise DomainError("n_per_age must be at least 1")
    vals = truth.values() if values is None else {**truth.values(), **values}
    if expected:
        cells = np.column_stack(model_probabilities(truth, vals, ages))
        return CurrentStatusDataset(ages, cells * n[:, None])

    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    spec, h1, h2 = truth.build(vals)
    idx = np.atleast_1d(h1.grid_index(ages))
    n_steps = int(idx.max(initial=0))
    times = h1.delta * np.arange(1, n_steps + 1)
    h = np.asarray(spec.modulation(times), dtype=float).reshape(n_steps)
    log_mu = np.asarray(spec.log_mu(times), dtype=float).reshape(n_steps)
    w1 = h1.delta * h1.grid_rates(n_steps)
    w2 = h1.delta * h2.grid_rates(n_steps)

    counts = np.zeros((ages.size, 4))
    for row, (j, m) in enumerate(zip(idx, n)):
        log_u = _log_gengamma_rvs(spec.base, m, rng)
        if j > 0:
            scaled = np.exp(h[:j, None] * log_u[None, :] - log_mu[:j, None])
            c1 = w1[:j] @ scaled
            c2 = w2[:j] @ scaled
        else:
            c1 = c2 = np.zeros(m)
        if spec.k2 is not None:
            v = rng.standard_gamma(spec.k2, size=m) / spec.k2
            c1, c2 = c1 * v, c2 * v
        pos1 = rng.random(m) < -np.expm1(-c1)
        pos2 = rng.random(m) < -np.expm1(-c2)
        cell = 2 * pos1 + pos2
        counts[row] = np.bincount(cell, minlength=4)
    return CurrentStatusDataset(ages, counts)


@dataclass(frozen=True)
class SimDesign:
    """Monte Carlo study design.

    Parameters
    ----------
    truth : ModelConfig
        Generating model with its true parameter values.
    ages : array_like
    n_per_age : int
    replicates : int
    seed : int
    fit_config : ModelConfig, optional
        Model fitted to each replicate; defaults to ``truth``.  May differ
        from ``truth`` to study misspecification.
    name : str
        Scenario label used in reports.
    options : FitOptions
    profile_coverage : bool
        Also compute profile-likelihood intervals (slow).
    level : float
        Nominal interval coverage.
    n_jobs : int
        Parallel replicate fits through joblib.
    expected : bool
        Fit expected cell counts instead of random draws (noise-free check).
    """

    truth: object
    ages: tuple
    n_per_age: int = 200
    replicates: int = 50
    seed: int = 0
    fit_config: object = None
    name: str = "scenario"
    options: FitOptions = field(default_factory=FitOptions)
    profile_coverage: bool = False
    level: float = 0.95
    n_jobs: int = 1
    expected: bool = False

    def __post_init__(self):
        object.__setattr__(self, "ages", tuple(float(a) for a in np.atleast_1d(self.ages)))
        if self.n_per_age < 1 or self.replicates < 1:
            raise DomainError("n_per_age and replicates must be at least 1")
        self.truth.hazard1.grid_index(np.array(self.ages))

    @property
    def model(self):
        return self.fit_config if self.fit_config is not None else self.truth

    def true_values(self):
        """True value of every reported parameter of the fitted model.

        Parameters absent from the truth are derived where the mapping is
        known (``alpha = k * beta``); others are omitted.
        """
        tv = dict(self.truth.values())
        if "beta" in tv and "k" in tv:
            tv.setdefault("alpha", tv["k"] * tv["beta"])
        if "alpha" in tv and "beta" in tv:
            tv.setdefault("k", tv["alpha"] / tv["beta"])
        if self.truth.family != self.model.family:
            # shape parameters of a misspecified family have no true value
            for name in ("k", "beta", "alpha"):
                tv.pop(name, None)
        if self.truth.modulation == "constant_one":
            tv.setdefault("rho", 0.0)
        elif self.truth.modulation != self.model.modulation:
            tv.pop("rho", None)
        return {n: tv[n] for n in self.model.free_names if n in tv}


@dataclass
class StudyReport:
    """Per-parameter summary of a Monte Carlo study.

    ``coverage`` is the Wald coverage; ``profile_coverage`` is filled when
    profile intervals were requested.  ``estimates`` holds one row per
    converged replicate.
    """

    scenario: str
    params: list
    true: dict
    estimates: np.ndarray
    ses: np.ndarray
    wald_cover: np.ndarray
    profile_cover: np.ndarray | None
    n_replicates: int
    n_nonconverged: int
    statuses: list

    def _col(self, name):
        return self.params.index(name)

    def bias(self, name):
        return float(np.mean(self.estimates[:, self._col(name)]) - self.true[name])

    def sd(self, name):
        return float(np.std(self.estimates[:, self._col(name)], ddof=0))

    def rmse(self, name):
        err = self.estimates[:, self._col(name)] - self.true[name]
        return float(np.sqrt(np.mean(err ** 2)))

    def mean_se(self, name):
        return float(np.nanmean(self.ses[:, self._col(name)]))

    def se_of_mean(self, name):
        """Monte Carlo standard error of the mean estimate."""
        col = self.estimates[:, self._col(name)]
        return float(np.std(col, ddof=1) / math.sqrt(col.size)) if col.size > 1 else math.nan

    def coverage(self, name):
        return float(np.mean(self.wald_cover[:, self._col(name)]))

    def profile_coverage(self, name):
        if self.profile_cover is None:
            return math.nan
        return float(np.mean(self.profile_cover[:, self._col(name)]))

    def rows(self):
        out = []
        for name in self.params:
            out.append({
                "scenario": self.scenario,
                "param": name,
                "true": self.true[name],
                "bias": self.bias(name),
                "rmse": self.rmse(name),
                "mean_se": self.mean_se(name),
                "sd": self.sd(name),
                "coverage": self.coverage(name),
            })
        return out

    def to_csv(self, path, append=False):
        with open(path, "a" if append else "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            if not append:
                w.writerow(STUDY_COLUMNS)
            for r in self.rows():
                w.writerow([r["scenario"], r["param"]] + [f"{r[c]:.17g}" for c in STUDY_COLUMNS[2:]])

    def to_dict(self):
        rows = self.rows()
        for r in rows:
            r["profile_coverage"] = self.profile_coverage(r["param"])
            r["se_of_mean"] = self.se_of_mean(r["param"])
        return {
            "scenario": self.scenario,
            "n_replicates": self.n_replicates,
            "n_converged": int(self.estimates.shape[0]),
            "n_nonconverged": self.n_nonconverged,
            "statuses": self.statuses,
            "summary": rows,
            "estimates": {p: self.estimates[:, i].tolist() for i, p in enumerate(self.params)},
        }

    def to_json(self, path):
        with open(path, "w") as fh:
            json.dump(_jsonable(self.to_dict()), fh, indent=2, sort_keys=True)
            fh.write("\n")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def _one_replicate(design, rep, params, true):
    data = simulate_dataset(design.truth, design.ages, design.n_per_age,
                            seed=replicate_seed(design.seed, rep), expected=design.expected)
    options = design.options
    try:
        res = fit(design.model, data, options)
    except (DomainError, ArithmeticError) as exc:
        logger.info("replicate %d failed: %s", rep, exc)
        return "failed", None, None, None, None
    est = np.array([res.estimates[p] for p in params])
    se = np.array([res.se.get(p, math.nan) for p in params])
    wald = np.array([_covers(res.wald_ci(p, design.level), true[p]) for p in params])
    prof = None
    if design.profile_coverage and res.converged:
        from .fitting import profile_ci
        prof = np.array([_covers(profile_ci(design.model, data, res, p, design.level, options), true[p])
                         for p in params])
    return res.convergence, est, se, wald, prof


def _covers(ci, value):
    return bool(ci.lower <= value <= ci.upper)


def run_study(design):
    """Fit the design's model to each simulated replicate and summarize.

    Aggregates are over converged fits; nonconverged replicates are counted.
    Raises :class:`ConvergenceError` if no replicate converged.
    """
    true = design.true_values()
    params = list(true)
    reps = range(design.replicates)
    if design.n_jobs != 1:
        from joblib import Parallel, delayed
        results = Parallel(n_jobs=design.n_jobs)(
            delayed(_one_replicate)(design, r, params, true) for r in reps)
    else:
        results = [_one_replicate(design, r, params, true) for r in reps]

    statuses = [r[0] for r in results]
    good = [r for r in results if r[0] in ("converged", "degenerate_hessian")]
    if not good:
        raise ConvergenceError(f"{design.name}: none of {design.replicates} replicates converged")
    prof = None
    if design.profile_coverage:
        prof = np.array([r[4] for r in good])
    return StudyReport(
        scenario=design.name,
        params=params,
        true=true,
        estimates=np.array([r[1] for r in good]),
        ses=np.array([r[2] for r in good]),
        wald_cover=np.array([r[3] for r in good]),
        profile_cover=prof,
        n_replicates=design.replicates,
        n_nonconverged=design.replicates - len(good),
        statuses=statuses,
    )
