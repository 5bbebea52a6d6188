"""Parallel partial autoregressive cokriging for multifidelity computer models
with many output coordinates."""
from ._backend import BACKEND
from .design import FidelityData, add_prediction_point, build_augmentation, validate_nested
from .errors import (DegreesOfFreedomError, DomainError, NumericalError, OptimizationError,
                     PPCokrigError, SingularMatrixError, ValidationError)
from .gls import chol_factor, fast_profile_terms, gls_fit
from .io import load_level, load_model, save_level, save_model
from .kernels import CorrelationParams, corr_matrix, matern, product_corr
from .mcem import FittedEmulator, McemConfig, q_hat, run_mcem, sample_missing
from .metrics import alci95, coverage95, crps_empirical, nsme, rmspe
from .predict import (PredictiveSummary, one_step_predict, predict, predict_many,
                      sequential_draw, summarize)
from .priors import JrPriorConfig, PolynomialBasis, jr_log_prior, level_log_integrated_posterior
from .synth import SynthConfig, gen_from_model, toy_high, toy_levels, toy_low

__version__ = "0.1.0"
