"""Input coercion shared by the estimator and the CLI."""

import numpy as np

from .exceptions import DataError, DomainError
from .likelihood import CurrentStatusDataset


def check_dataset(X):
    """Coerce ``X`` to a :class:`CurrentStatusDataset`.

    Accepts a dataset, a path to a dataset CSV, or an array with columns
    ``age, n00, n01, n10, n11[, m0x, m1x, mx0, mx1]``.
    """
    if isinstance(X, CurrentStatusDataset):
        return X
    if isinstance(X, (str, bytes)) or hasattr(X, "__fspath__"):
        return CurrentStatusDataset.from_csv(X)
    try:
        arr = np.asarray(X, dtype=float)
    except (TypeError, ValueError) as exc:
        raise DataError(f"cannot interpret input as a count table: {exc}") from None
    return CurrentStatusDataset.from_array(np.atleast_2d(arr))


def check_ages(ages, delta):
    """1-d float array of nonnegative ages on the ``delta`` grid."""
    ages = np.atleast_1d(np.asarray(ages, dtype=float))
    if ages.ndim != 1:
        ages = ages.ravel()
    if np.any(~np.isfinite(ages)) or np.any(ages < 0):
        raise DomainError("ages must be finite and nonnegative")
    j = np.round(ages / delta)
    off = np.abs(j * delta - ages) > 1e-9 * np.maximum(1.0, ages)
    if np.any(off):
        raise DomainError(f"age {ages[np.argmax(off)]:g} is not a multiple of delta={delta:g}")
    return ages


def check_level(level):
    if level is None:
        return None
    level = float(level)
    if not 0.0 <= level < 1.0:
        raise DomainError(f"confidence level must lie in [0, 1), got {level}")
    return level
