"""Principal component analysis."""

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from src.utils.errors import GazeKitError


class ReductionError(GazeKitError):
    """Reduction asked for something the data cannot give."""

    code = "reduction_error"


@dataclass(frozen=True, eq=False)
class PcaResult:
    mean: np.ndarray
    basis: np.ndarray
    eigenvalues: np.ndarray
    rank: int


def fix_signs(basis: np.ndarray) -> np.ndarray:
    """Flip columns so each column's largest-magnitude entry is positive."""
    if basis.size == 0:
        return basis
    idx = np.argmax(np.abs(basis), axis=0)
    signs = np.sign(basis[idx, np.arange(basis.shape[1])])
    signs[signs == 0] = 1.0
    return basis * signs


def numerical_rank(singular_values: np.ndarray, shape: tuple) -> int:
    if singular_values.size == 0 or singular_values[0] == 0:
        return 0
    tol = singular_values[0] * max(shape) * np.finfo(np.float64).eps
    return int(np.sum(singular_values > tol))


def fit_pca(X: np.ndarray, target: int) -> PcaResult:
    """
    Top principal axes of a sample matrix.

    Args:
        X: samples x dim
        target: number of components, at most min(samples - 1, dim)

    Returns:
        PcaResult with the sample mean, a dim x target orthonormal basis,
        the non-increasing covariance eigenvalues and the numerical rank

    Raises:
        ReductionError: If there are fewer than 2 samples or target is too large
    """
    X = np.asarray(X, dtype=np.float64)
    n, dim = X.shape
    if n < 2:
        raise ReductionError(f"PCA needs at least 2 samples, got {n}")
    if not 0 <= target <= min(n - 1, dim):
        raise ReductionError(
            f"PCA target {target} exceeds min(samples - 1, dim) = {min(n - 1, dim)}",
            {"target": target, "samples": n, "dim": dim},
        )
    mean = X.mean(axis=0)
    _, s, vt = linalg.svd(X - mean, full_matrices=False)
    eigenvalues = s**2 / (n - 1)
    basis = fix_signs(vt[:target].T.copy())
    return PcaResult(
        mean=mean,
        basis=basis,
        eigenvalues=eigenvalues,
        rank=numerical_rank(s, X.shape),
    )
