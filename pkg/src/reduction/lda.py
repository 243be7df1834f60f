"""Linear discriminant analysis."""

from dataclasses import dataclass
from typing import Tuple

import numpy as np
from scipy import linalg

from src.reduction.pca import ReductionError, fix_signs
from src.utils import constants
from src.utils.logging import get_logger

logger = get_logger(__name__)


class LdaNumericalError(ReductionError):
    """Within-class scatter stayed singular after regularisation."""

    code = "lda_numerical_error"


@dataclass(frozen=True, eq=False)
class LdaResult:
    basis: np.ndarray
    eigenvalues: np.ndarray
    classes: np.ndarray


def scatter_matrices(Z: np.ndarray, labels: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Within-class and between-class scatter."""
    mean = Z.mean(axis=0)
    p = Z.shape[1]
    sw = np.zeros((p, p))
    sb = np.zeros((p, p))
    for cls in np.unique(labels):
        members = Z[labels == cls]
        mu = members.mean(axis=0)
        centered = members - mu
        sw += centered.T @ centered
        diff = (mu - mean)[:, None]
        sb += members.shape[0] * (diff @ diff.T)
    return sw, sb


def fisher_ratio(Z: np.ndarray, labels: np.ndarray, basis: np.ndarray) -> float:
    """trace((W' Sw W)^-1 W' Sb W) for a projection W."""
    sw, sb = scatter_matrices(np.asarray(Z, dtype=np.float64), np.asarray(labels))
    w = np.asarray(basis, dtype=np.float64)
    return float(np.trace(linalg.solve(w.T @ sw @ w, w.T @ sb @ w, assume_a="sym")))


def fit_lda(
    Z: np.ndarray,
    labels: np.ndarray,
    epsilon_scale: float = constants.LDA_EPSILON_SCALE,
) -> LdaResult:
    """
    Discriminant directions of labelled data.

    Solves Sb v = lambda (Sw + eps I) v with eps = epsilon_scale * trace(Sw) / p
    and keeps the c - 1 leading vectors.

    Args:
        Z: samples x p (already PCA-reduced)
        labels: class id per sample

    Returns:
        LdaResult with a p x (c - 1) basis; a single class gives a p x 0 basis

    Raises:
        ReductionError: If a class has fewer than 2 samples or p < c - 1
        LdaNumericalError: If the generalised eigenproblem cannot be solved
    """
    Z = np.asarray(Z, dtype=np.float64)
    labels = np.asarray(labels)
    n, p = Z.shape
    classes, counts = np.unique(labels, return_counts=True)
    c = len(classes)
    if np.any(counts < 2):
        small = [int(cls) for cls, k in zip(classes, counts) if k < 2]
        raise ReductionError(f"classes with fewer than 2 samples: {small}", {"classes": small})
    if c == 1:
        logger.warning("lda_single_class", samples=n)
        return LdaResult(basis=np.zeros((p, 0)), eigenvalues=np.zeros(0), classes=classes)
    if p < c - 1:
        raise ReductionError(
            f"LDA needs at least c - 1 = {c - 1} input dimensions, got {p}",
            {"p": p, "classes": c},
        )
    if p > n - c:
        logger.warning("lda_scatter_may_be_singular", p=p, samples=n, classes=c)

    sw, sb = scatter_matrices(Z, labels)
    trace = float(np.trace(sw))
    eps = epsilon_scale * trace / p if trace > 0 else epsilon_scale
    try:
        values, vectors = linalg.eigh(sb, sw + eps * np.eye(p))
    except (linalg.LinAlgError, ValueError) as e:
        raise LdaNumericalError(
            f"generalised eigenproblem failed: {e}",
            {
                "p": p,
                "samples": n,
                "classes": c,
                "trace_sw": trace,
                "epsilon": eps,
                "cond_sw": float(np.linalg.cond(sw)),
            },
        ) from e

    order = np.argsort(values)[::-1][: c - 1]
    return LdaResult(
        basis=fix_signs(vectors[:, order]),
        eigenvalues=values[order],
        classes=classes,
    )
