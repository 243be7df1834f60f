"""PCA-then-LDA dimensionality reduction."""

from .lda import LdaNumericalError, fisher_ratio, fit_lda
from .model import ReductionModel, fit_reduction, project
from .pca import ReductionError, fit_pca

__all__ = [
    "LdaNumericalError",
    "ReductionError",
    "ReductionModel",
    "fisher_ratio",
    "fit_lda",
    "fit_pca",
    "fit_reduction",
    "project",
]
