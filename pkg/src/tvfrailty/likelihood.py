"""Bivariate current-status data and the multinomial likelihood.

Each row holds, for one age, the 4-nomial counts of fully tested pairs
(``n00, n01, n10, n11``; first index event 1, second event 2) and the
counts of individuals with only one test result (``m0x, m1x`` for test 1,
``mx0, mx1`` for test 2).  Marginal-only observations contribute the log of
the corresponding marginal probability.
"""

import csv
import logging
import math
from dataclasses import dataclass

import numpy as np

from .exceptions import DataError, DomainError
from .survival import SurvivalGrid

__all__ = [
    "CurrentStatusDataset",
    "CSV_COLUMNS",
    "check_grid",
    "model_probabilities",
    "loglik",
    "loglik_status",
    "saturated_loglik",
    "deviance",
    "aic",
    "LOGLIK_SENTINEL",
]

logger = logging.getLogger(__name__)

CSV_COLUMNS = ("age", "n00", "n01", "n10", "n11", "m0x", "m1x", "mx0", "mx1")
LOGLIK_SENTINEL = -1e100
PROB_FLOOR = 1e-300


@dataclass(frozen=True, eq=False)
class CurrentStatusDataset:
    """Per-age counts of bivariate current status observations.

    Parameters
    ----------
    ages : array of shape (n,)
        Nondecreasing observation ages.
    counts : array of shape (n, 4)
        ``n00, n01, n10, n11``.
    marginal1 : array of shape (n, 2), optional
        ``m0x, m1x``: only test 1 observed, negative / positive.
    marginal2 : array of shape (n, 2), optional
        ``mx0, mx1``: only test 2 observed, negative / positive.
    """

    ages: np.ndarray
    counts: np.ndarray
    marginal1: np.ndarray = None
    marginal2: np.ndarray = None

    def __post_init__(self):
        ages = np.asarray(self.ages, dtype=float).ravel()
        n = ages.size
        counts = np.asarray(self.counts, dtype=float).reshape(n, 4)
        m1 = np.zeros((n, 2)) if self.marginal1 is None else np.asarray(self.marginal1, float).reshape(n, 2)
        m2 = np.zeros((n, 2)) if self.marginal2 is None else np.asarray(self.marginal2, float).reshape(n, 2)
        for name, arr in (("counts", counts), ("marginal1", m1), ("marginal2", m2)):
            if np.any(~np.isfinite(arr)) or np.any(arr < 0):
                bad = int(np.argwhere(~np.isfinite(arr) | (arr < 0))[0, 0])
                raise DataError(f"{name} at age {ages[bad]:g} must be finite and nonnegative")
        if np.any(~np.isfinite(ages)) or np.any(ages < 0):
            raise DataError("ages must be finite and nonnegative")
        if np.any(np.diff(ages) < 0):
            bad = int(np.argmax(np.diff(ages) < 0)) + 1
            raise DataError(f"ages must be ascending; age {ages[bad]:g} follows {ages[bad - 1]:g}")
        if counts.sum() + m1.sum() + m2.sum() <= 0:
            raise DataError("dataset has no observations")
        for name, arr in (("ages", ages), ("counts", counts), ("marginal1", m1), ("marginal2", m2)):
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    def __len__(self):
        return self.ages.size

    @property
    def has_marginal(self):
        return bool(self.marginal1.sum() + self.marginal2.sum() > 0)

    @property
    def n_total(self):
        return float(self.counts.sum() + self.marginal1.sum() + self.marginal2.sum())

    @property
    def is_integer(self):
        return all(np.all(a == np.round(a)) for a in (self.counts, self.marginal1, self.marginal2))

    def aggregated(self):
        """Dataset with rows at equal ages summed."""
        uniq, inv = np.unique(self.ages, return_inverse=True)
        if uniq.size == self.ages.size:
            return self

        def agg(a):
            out = np.zeros((uniq.size, a.shape[1]))
            np.add.at(out, inv, a)
            return out

        return CurrentStatusDataset(uniq, agg(self.counts), agg(self.marginal1), agg(self.marginal2))

    def to_array(self):
        return np.column_stack([self.ages, self.counts, self.marginal1, self.marginal2])

    @classmethod
    def from_array(cls, X):
        """From an array with columns ``age, n00, n01, n10, n11[, m0x, m1x, mx0, mx1]``."""
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] not in (5, 9):
            raise DataError(f"expected 5 or 9 columns ({', '.join(CSV_COLUMNS)}), got shape {X.shape}")
        if X.shape[1] == 5:
            return cls(X[:, 0], X[:, 1:5])
        return cls(X[:, 0], X[:, 1:5], X[:, 5:7], X[:, 7:9])

    @classmethod
    def from_csv(cls, path):
        """Read the dataset CSV; marginal columns may be omitted (taken as 0)."""
        rows = []
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            header = reader.fieldnames or []
            missing = [c for c in CSV_COLUMNS[:5] if c not in header]
            if missing:
                raise DataError(f"{path}: missing required column(s) {', '.join(missing)}")
            unknown = [c for c in header if c not in CSV_COLUMNS]
            if unknown:
                raise DataError(f"{path}: unknown column(s) {', '.join(unknown)}")
            for lineno, rec in enumerate(reader, start=2):
                row = []
                for col in CSV_COLUMNS:
                    raw = rec.get(col)
                    if raw is None or raw.strip() == "":
                        if col in CSV_COLUMNS[:5]:
                            raise DataError(f"{path}: row {lineno}, column {col!r} is empty")
                        row.append(0.0)
                        continue
                    try:
                        v = float(raw)
                    except ValueError:
                        raise DataError(f"{path}: row {lineno}, column {col!r}: "
                                        f"cannot parse {raw!r} as a number") from None
                    if col != "age" and (v < 0 or v != math.floor(v)):
                        raise DataError(f"{path}: row {lineno}, column {col!r}: "
                                        f"counts must be nonnegative integers, got {raw!r}")
                    row.append(v)
                rows.append(row)
        if not rows:
            raise DataError(f"{path}: no data rows")
        return cls.from_array(np.array(rows))

    def to_csv(self, path):
        integer = self.is_integer
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CSV_COLUMNS)
            for row in self.to_array():
                age = f"{row[0]:.17g}"
                cells = [f"{int(v)}" if integer else f"{v:.17g}" for v in row[1:]]
                w.writerow([age, *cells])


def check_grid(config, data):
    """Raise :class:`DataError` naming the first age that is off the model grid."""
    try:
        config.hazard1.grid_index(data.ages)
    except DomainError as exc:
        raise DataError(f"model/data grid mismatch: {exc}") from exc


def _values(config, params):
    if params is None:
        return config.values()
    if isinstance(params, dict):
        return {**config.values(), **params}
    return config.unpack(params)


def model_probabilities(config, params, ages, strict=True):
    """Cell probabilities ``(s00, s01, s10, s11)`` at ``ages`` under the model.

    ``params`` is the packed natural-scale vector of free parameters, a dict
    of natural values, or ``None`` for the config's own values.
    """
    values = _values(config, params)
    spec, h1, h2 = config.build(values, strict=strict)
    idx = np.atleast_1d(h1.grid_index(ages))
    grid = SurvivalGrid(spec, h1.delta, int(idx.max(initial=0)))
    return grid.bivariate(h1.grid_rates(grid.n_steps), h2.grid_rates(grid.n_steps), idx)


def _kernel(counts, probs):
    # sum n log p over n > 0; ok=False when a needed probability vanishes
    pos = counts > 0
    p = probs[pos]
    if np.any(~(p > PROB_FLOOR)):
        return LOGLIK_SENTINEL, False
    return float(np.sum(counts[pos] * np.log(p))), True


def loglik_status(config, params, data, strict=True):
    """``(loglik, ok)``; ``ok`` is False when the sentinel was returned."""
    check_grid(config, data)
    s00, s01, s10, s11 = model_probabilities(config, params, data.ages, strict=strict)
    cells = np.column_stack([s00, s01, s10, s11])
    if np.any(~np.isfinite(cells)):
        return LOGLIK_SENTINEL, False
    cells = np.clip(cells, 0.0, 1.0)
    # cells may carry tiny negative round-off; marginals are sums of cells
    surv1 = cells[:, 0] + cells[:, 1]
    surv2 = cells[:, 0] + cells[:, 2]
    marg1 = np.column_stack([surv1, cells[:, 2] + cells[:, 3]])
    marg2 = np.column_stack([surv2, cells[:, 1] + cells[:, 3]])
    total = 0.0
    ok = True
    for counts, probs in ((data.counts, cells), (data.marginal1, marg1), (data.marginal2, marg2)):
        val, good = _kernel(counts, probs)
        if not good:
            logger.debug("zero probability with positive count; returning sentinel")
            return LOGLIK_SENTINEL, False
        total += val
    return total, ok


def loglik(config, params, data):
    """Multinomial log-likelihood kernel ``sum n_ijt log S_ij(t)``.

    Marginal-only counts add ``log`` of the marginal survivor (negative
    result) or its complement (positive result).  Returns
    :data:`LOGLIK_SENTINEL` when a probability needed by a positive count
    underflows; use :func:`loglik_status` to see that flag.
    """
    return loglik_status(config, params, data)[0]


def saturated_loglik(data):
    """Log-likelihood of the saturated model (empirical cell proportions per age)."""
    d = data.aggregated()
    total = 0.0
    for block in (d.counts, d.marginal1, d.marginal2):
        n = block.sum(axis=1, keepdims=True)
        with np.errstate(divide="ignore", invalid="ignore"):
            terms = np.where(block > 0, block * np.log(block / n), 0.0)
        total += float(terms.sum())
    return total


def _free_cells(data):
    d = data.aggregated()
    full = int(np.sum(d.counts.sum(axis=1) > 0)) * 3
    marg = int(np.sum(d.marginal1.sum(axis=1) > 0) + np.sum(d.marginal2.sum(axis=1) > 0))
    return full + marg


def deviance(config, params, data):
    """``(deviance, df)`` against the saturated per-age multinomial model.

    ``df`` is the number of free cells (3 per age with fully tested pairs,
    1 per nonempty marginal-only group) minus the number of free parameters.
    """
    ll = loglik(config, params, data)
    dev = 2.0 * (saturated_loglik(data) - ll)
    return max(dev, 0.0), _free_cells(data) - config.n_params


def aic(loglik_value, n_params):
    """Akaike information criterion ``-2 loglik + 2 n_params``."""
    return -2.0 * loglik_value + 2.0 * n_params
