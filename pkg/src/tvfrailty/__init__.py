"""Time-varying shared frailty models for bivariate current status data."""

from .association import PhiSeries, clayton_joint, empirical_phi, fitted_phi, phi_from_probs
from .config import MODEL_MENU, ModelConfig, ParamSpec
from .distributions import EggParams, GenGammaParams, egg_integral, gengamma_cdf, gengamma_pdf
from .estimator import SharedFrailtyModel
from .exceptions import ConvergenceError, ConvergenceWarning, DataError, DomainError, NumericError
from .fitting import FitOptions, FitResult, fit, profile_ci
from .frailty import (FrailtySpec, ModulationFn, conditional_frailty_moments, cv_squared, mu_t,
                      rfv_scaled, rfv_star, rfv_star_linear_approx, transform_params)
from .likelihood import CurrentStatusDataset, aic, deviance, loglik
from .simulation import SimDesign, StudyReport, run_study, simulate_dataset
from .survival import (BivariateSurvival, HazardSpec, bivariate_probs, survivor,
                       survivor_one_component, survivor_two_component)

__version__ = "0.1.0"

__all__ = [
    "BivariateSurvival", "ConvergenceError", "ConvergenceWarning", "CurrentStatusDataset",
    "DataError", "DomainError", "EggParams", "FitOptions", "FitResult", "FrailtySpec",
    "GenGammaParams", "HazardSpec", "MODEL_MENU", "ModelConfig", "ModulationFn", "NumericError",
    "ParamSpec", "PhiSeries", "SharedFrailtyModel", "SimDesign", "StudyReport", "aic",
    "bivariate_probs", "clayton_joint", "conditional_frailty_moments", "cv_squared", "deviance",
    "egg_integral", "empirical_phi", "fit", "fitted_phi", "gengamma_cdf", "gengamma_pdf",
    "loglik", "mu_t", "phi_from_probs", "profile_ci", "rfv_scaled", "rfv_star",
    "rfv_star_linear_approx", "run_study", "simulate_dataset", "survivor",
    "survivor_one_component", "survivor_two_component", "transform_params",
]
