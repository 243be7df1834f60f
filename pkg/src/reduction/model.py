"""Composed PCA -> LDA projection."""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from src.reduction.lda import fit_lda
from src.reduction.pca import ReductionError, fit_pca
from src.utils import constants
from src.utils.logging import get_logger

logger = get_logger(__name__)


@dataclass(frozen=True, eq=False)
class ReductionModel:
    """Fitted reduction: x -> lda_basis' pca_basis' (x - pca_mean)."""

    input_dim: int
    pca_mean: np.ndarray
    pca_basis: np.ndarray
    lda_basis: np.ndarray
    class_count: int

    @property
    def pca_dim(self) -> int:
        return int(self.pca_basis.shape[1])

    @property
    def output_dim(self) -> int:
        return int(self.lda_basis.shape[1])


def pca_target(
    dim: int, n_total: int, n_classes: int, min_class: int, rank: int, floor: int
) -> int:
    """min(dim, n_total - c, max(smallest class size, floor), rank)."""
    return max(0, min(dim, n_total - n_classes, max(min_class, floor), rank))


def fit_reduction(
    X: np.ndarray,
    labels: np.ndarray,
    n_classes: Optional[int] = None,
    pca_floor: int = constants.PCA_FLOOR,
    epsilon_scale: float = constants.LDA_EPSILON_SCALE,
) -> ReductionModel:
    """
    Fit PCA then LDA on labelled features.

    Args:
        X: samples x dim feature matrix
        labels: class id per sample (grid labels 0..n_classes-1)
        n_classes: Expected number of classes; every one must be present
        pca_floor: Lower bound on the PCA target before the other caps

    Returns:
        ReductionModel with output dimension c - 1

    Raises:
        ReductionError: If an expected class is empty or the data is too small
    """
    X = np.asarray(X, dtype=np.float64)
    labels = np.asarray(labels)
    if X.ndim != 2 or X.shape[0] != labels.shape[0]:
        raise ReductionError(
            f"feature matrix {X.shape} does not match {labels.shape[0]} labels"
        )
    n, dim = X.shape
    classes, counts = np.unique(labels, return_counts=True)
    if n_classes is not None:
        empty = sorted(set(range(n_classes)) - {int(c) for c in classes})
        if empty:
            raise ReductionError(f"classes without samples: {empty}", {"empty": empty})
    c = len(classes)

    full = fit_pca(X, min(n - 1, dim))
    p = pca_target(dim, n, c, int(counts.min()), full.rank, pca_floor)
    if c > 1 and p < c - 1:
        raise ReductionError(
            f"PCA dimension {p} is below the {c - 1} LDA outputs",
            {"samples": n, "dim": dim, "rank": full.rank, "classes": c},
        )
    basis = full.basis[:, :p]
    Z = (X - full.mean) @ basis
    lda = fit_lda(Z, labels, epsilon_scale)

    logger.debug("reduction_fitted", samples=n, dim=dim, pca_dim=p, output_dim=c - 1)
    return ReductionModel(
        input_dim=dim,
        pca_mean=full.mean,
        pca_basis=basis,
        lda_basis=lda.basis,
        class_count=c,
    )


def project(model: ReductionModel, x: np.ndarray) -> np.ndarray:
    """
    Apply a fitted reduction to one vector or a samples x dim matrix.

    Raises:
        ReductionError: On a dimension mismatch
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != model.input_dim:
        raise ReductionError(
            f"expected {model.input_dim} features, got {x.shape[-1]}",
            {"expected": model.input_dim, "got": int(x.shape[-1])},
        )
    return ((x - model.pca_mean) @ model.pca_basis) @ model.lda_basis
