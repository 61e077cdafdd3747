"""Scikit-learn style estimator around :func:`tvfrailty.fitting.fit`."""

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import check_ages, check_dataset, check_level
from .association import empirical_phi, fitted_phi
from .config import ModelConfig
from .fitting import FitOptions, fit
from .frailty import rfv_star
from .likelihood import loglik, model_probabilities

__all__ = ["SharedFrailtyModel"]


class SharedFrailtyModel(BaseEstimator):
    """Time-varying shared frailty model for paired current status data.

    Parameters
    ----------
    model : str
        Entry of :data:`tvfrailty.config.MODEL_MENU`; ignored when ``config``
        is given.
    cutpoints1, cutpoints2 : sequence of float
        Piecewise-constant hazard cutpoints for events 1 and 2.
    delta : float
        Grid step of the survivor approximation; ages must be multiples.
    init : dict, optional
        Initial parameter values, e.g. ``{"k": 0.5, "rho": 0.001}``.
    fixed : sequence of str
        Parameters held at their initial values.
    config : ModelConfig, optional
        Full model configuration, overriding the arguments above.
    allow_increasing_h : bool
        Allow ``rho < 0`` (increasing heterogeneity).
    tol, maxiter : float, int
        Optimizer settings, see :class:`FitOptions`.
    ci_level : float, optional
        Level of profile-likelihood intervals computed during ``fit``.

    Attributes
    ----------
    params_ : dict
        Natural-scale estimates of every parameter.
    fit_result_ : FitResult
    config_ : ModelConfig
        Configuration holding the estimates.
    n_params_ : int
    """

    def __init__(self, model="gamma_with_trend", cutpoints1=(), cutpoints2=(), delta=1.0,
                 init=None, fixed=(), config=None, allow_increasing_h=False, tol=1e-7,
                 maxiter=500, ci_level=None):
        self.model = model
        self.cutpoints1 = cutpoints1
        self.cutpoints2 = cutpoints2
        self.delta = delta
        self.init = init
        self.fixed = fixed
        self.config = config
        self.allow_increasing_h = allow_increasing_h
        self.tol = tol
        self.maxiter = maxiter
        self.ci_level = ci_level

    def _build_config(self):
        if self.config is not None:
            cfg = self.config
        else:
            cfg = ModelConfig.menu(self.model, tuple(self.cutpoints1), tuple(self.cutpoints2),
                                   delta=self.delta, allow_increasing_h=self.allow_increasing_h)
        if self.init:
            cfg = cfg.with_values(self.init)
        if self.fixed:
            cfg = cfg.fix(*self.fixed)
        return cfg

    def fit(self, X, y=None):
        """Fit to a count table (array, CSV path or :class:`CurrentStatusDataset`)."""
        data = check_dataset(X)
        options = FitOptions(tol=self.tol, maxiter=self.maxiter, ci_level=check_level(self.ci_level))
        result = fit(self._build_config(), data, options)
        self.fit_result_ = result
        self.config_ = result.config
        self.params_ = dict(result.estimates)
        self.n_params_ = result.n_params
        self.loglik_ = result.loglik_max
        self.aic_ = result.aic
        return self

    def predict_proba(self, ages):
        """Cell probabilities ``(S00, S01, S10, S11)`` at ``ages``; shape ``(n, 4)``."""
        check_is_fitted(self, "params_")
        ages = check_ages(ages, self.config_.delta)
        return np.column_stack(model_probabilities(self.config_, None, ages))

    def predict(self, ages):
        """Seroprevalence (probability of a past event) for each event; shape ``(n, 2)``."""
        p = self.predict_proba(ages)
        return np.column_stack([p[:, 2] + p[:, 3], p[:, 1] + p[:, 3]])

    def score(self, X, y=None):
        """Mean log-likelihood per observation."""
        check_is_fitted(self, "params_")
        data = check_dataset(X)
        return loglik(self.config_, None, data) / data.n_total

    def phi(self, ages):
        """Model-implied Clayton association ``phi(t)``."""
        check_is_fitted(self, "params_")
        return fitted_phi(self.config_, None, check_ages(ages, self.config_.delta)).phi

    def rfv_star(self, ages, event=1):
        """Relative frailty variance among those free of ``event`` at ``ages``."""
        check_is_fitted(self, "params_")
        spec, h1, h2 = self.config_.build()
        return rfv_star(spec, h1 if event == 1 else h2, check_ages(ages, self.config_.delta))

    @staticmethod
    def empirical_phi(X):
        return empirical_phi(check_dataset(X))
