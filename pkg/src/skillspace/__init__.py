"""Latent skill analysis of model-by-task benchmark score matrices."""

from .data import (
    CorrelationMatrix,
    PerformanceMatrix,
    StandardizedMatrix,
    correlation_matrix,
    load_leaderboard,
    standardize,
)
from .errors import InputError, NumericalError, SkillSpaceError
from .kernels import BACKEND
from .paf import FactorModel, fit_paf, rotate_orthomax, select_factor_count
from .scores import SkillScores, regression_weights, score_models

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "CorrelationMatrix",
    "FactorModel",
    "InputError",
    "NumericalError",
    "PerformanceMatrix",
    "SkillScores",
    "SkillSpaceError",
    "StandardizedMatrix",
    "correlation_matrix",
    "fit_paf",
    "load_leaderboard",
    "regression_weights",
    "rotate_orthomax",
    "score_models",
    "select_factor_count",
    "standardize",
]
