"""
Sensitivity Package

Post-training sensor importance in three stages: raw scores from
inverse-Hessian solves, solver/gradient confidence, and graph imputation
of low-confidence scores.
"""

from .base_hvp import BaseHvp
from .finite_difference_hvp import FiniteDifferenceHvp
from .exact_quadratic_hvp import ExactQuadraticHvp
from .hvp import hvp, make_hvp
from .conjugate_gradient import cg_solve
from .importance import (adjoint_scores, check_optimality, importance_scores,
                         max_relative_disagreement)
from .confidence import (combine_confidence, confidence_scores, gradient_confidence,
                         mismatch_scores, solve_confidence)
from .imputation import impute, partition
from .sensitivity_report import SensitivityReport

__all__ = [
    'BaseHvp',
    'FiniteDifferenceHvp',
    'ExactQuadraticHvp',
    'hvp',
    'make_hvp',
    'cg_solve',
    'importance_scores',
    'adjoint_scores',
    'check_optimality',
    'max_relative_disagreement',
    'solve_confidence',
    'gradient_confidence',
    'mismatch_scores',
    'combine_confidence',
    'confidence_scores',
    'partition',
    'impute',
    'SensitivityReport',
]
