"""k-nearest-neighbour regression."""

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.spatial.distance import cdist

from src.regress.config import RegressionError
from src.utils import constants


@dataclass(frozen=True, eq=False)
class KnnModel:
    X: np.ndarray
    y: np.ndarray
    k: int = constants.KNN_K

    @property
    def n_features(self) -> int:
        return int(self.X.shape[1])


def fit_knn(X: np.ndarray, y: np.ndarray, k: int = constants.KNN_K) -> KnnModel:
    """Store the training set (Euclidean metric)."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise RegressionError("kNN needs a non-empty samples x features matrix")
    if y.shape != (X.shape[0],):
        raise RegressionError(f"{X.shape[0]} samples but {y.shape} targets")
    return KnnModel(X=X, y=y, k=k)


def neighbours(m: KnnModel, Q: np.ndarray, k: int) -> np.ndarray:
    """Indices of the k nearest training points per query; ties go to the lower index."""
    if not 1 <= k <= m.X.shape[0]:
        raise RegressionError(f"k={k} outside [1, {m.X.shape[0]}]")
    D = cdist(Q, m.X)
    return np.argsort(D, axis=1, kind="stable")[:, :k]


def predict_knn_batch(m: KnnModel, Q: np.ndarray, k: Optional[int] = None) -> np.ndarray:
    Q = np.atleast_2d(np.asarray(Q, dtype=np.float64))
    if Q.shape[1] != m.n_features:
        raise RegressionError(f"expected {m.n_features} features, got {Q.shape[1]}")
    idx = neighbours(m, Q, k or m.k)
    return m.y[idx].mean(axis=1)


def predict_knn(m: KnnModel, x: np.ndarray, k: Optional[int] = None) -> float:
    """Mean target of the k nearest training points."""
    return float(predict_knn_batch(m, x, k)[0])
