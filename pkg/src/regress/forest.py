"""Random forest regression built from variance-reduction CART trees."""

from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from src.regress.config import ForestParams, RegressionError
from src.utils.logging import get_logger

logger = get_logger(__name__)

LEAF = -1


@dataclass(frozen=True, eq=False)
class Tree:
    """
    Flat-array regression tree. Node 0 is the root; leaves have ``feature == -1``.

    Samples with ``x[feature] <= threshold`` go to ``left``.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    @property
    def n_nodes(self) -> int:
        return int(self.feature.shape[0])

    def predict(self, X: np.ndarray) -> np.ndarray:
        node = np.zeros(X.shape[0], dtype=np.int64)
        while True:
            feat = self.feature[node]
            active = np.flatnonzero(feat != LEAF)
            if active.size == 0:
                return self.value[node]
            at = node[active]
            go_left = X[active, feat[active]] <= self.threshold[at]
            node[active] = np.where(go_left, self.left[at], self.right[at])


@dataclass(frozen=True, eq=False)
class RfModel:
    trees: List[Tree]
    n_features: int
    params: ForestParams


def _best_split(
    X: np.ndarray,
    y: np.ndarray,
    features: np.ndarray,
    min_leaf: int,
) -> Optional[Tuple[int, float]]:
    n = y.shape[0]
    total = y.sum()
    total_sq = np.dot(y, y)
    parent_sse = total_sq - total * total / n
    best_sse = parent_sse
    best: Optional[Tuple[int, float]] = None

    n_left = np.arange(min_leaf, n - min_leaf + 1)
    for f in features:
        order = np.argsort(X[:, f], kind="stable")
        xs = X[order, f]
        ys = y[order]
        csum = np.cumsum(ys)
        csq = np.cumsum(ys * ys)
        # split after position i - 1 leaves i samples on the left
        sl = csum[n_left - 1]
        ql = csq[n_left - 1]
        n_right = n - n_left
        sse = (ql - sl * sl / n_left) + ((total_sq - ql) - (total - sl) ** 2 / n_right)
        distinct = xs[n_left - 1] < xs[n_left]
        if not distinct.any():
            continue
        sse = np.where(distinct, sse, np.inf)
        i = int(np.argmin(sse))
        if sse[i] < best_sse - 1e-12 * max(1.0, abs(parent_sse)):
            lo, hi = xs[n_left[i] - 1], xs[n_left[i]]
            threshold = (lo + hi) / 2.0
            if not lo <= threshold < hi:
                threshold = lo
            best_sse = sse[i]
            best = (int(f), float(threshold))
    return best


def fit_tree(
    X: np.ndarray, y: np.ndarray, rng: np.random.Generator, mtry: int, min_leaf: int
) -> Tree:
    """Grow one tree; each node tries ``mtry`` randomly chosen features."""
    feature: List[int] = []
    threshold: List[float] = []
    left: List[int] = []
    right: List[int] = []
    value: List[float] = []

    def new_node(idx: np.ndarray) -> int:
        feature.append(LEAF)
        threshold.append(0.0)
        left.append(LEAF)
        right.append(LEAF)
        value.append(float(y[idx].mean()))
        return len(feature) - 1

    d = X.shape[1]
    stack = [(new_node(np.arange(len(y))), np.arange(len(y)))]
    while stack:
        node, idx = stack.pop()
        if idx.size < 2 * min_leaf or d == 0 or np.ptp(y[idx]) == 0:
            continue
        features = rng.choice(d, size=mtry, replace=False)
        split = _best_split(X[idx], y[idx], features, min_leaf)
        if split is None:
            continue
        f, t = split
        mask = X[idx, f] <= t
        left_idx, right_idx = idx[mask], idx[~mask]
        feature[node] = f
        threshold[node] = t
        left[node] = new_node(left_idx)
        right[node] = new_node(right_idx)
        stack.append((right[node], right_idx))
        stack.append((left[node], left_idx))

    return Tree(
        feature=np.asarray(feature, dtype=np.int64),
        threshold=np.asarray(threshold, dtype=np.float64),
        left=np.asarray(left, dtype=np.int64),
        right=np.asarray(right, dtype=np.int64),
        value=np.asarray(value, dtype=np.float64),
    )


def fit_rf(X: np.ndarray, y: np.ndarray, params: Optional[ForestParams] = None) -> RfModel:
    """
    Fit a regression forest.

    Every tree is grown on a bootstrap resample (with replacement) of
    ``bootstrap_fraction * n`` samples. Tree seeds are spawned from
    ``params.seed``, so the forest is reproducible bit for bit.

    Raises:
        RegressionError: On empty data or mismatched shapes
    """
    params = params or ForestParams()
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise RegressionError("random forest needs a non-empty samples x features matrix")
    if y.shape != (X.shape[0],):
        raise RegressionError(f"{X.shape[0]} samples but {y.shape} targets")
    n, d = X.shape
    mtry = params.resolve_mtry(d)
    if n < 2 * params.min_leaf:
        logger.warning("forest_training_set_small", samples=n, min_leaf=params.min_leaf)

    m = max(1, int(round(params.bootstrap_fraction * n)))
    children = np.random.SeedSequence(params.seed).spawn(params.n_trees)
    trees = []
    for child in children:
        rng = np.random.default_rng(child)
        sample = rng.integers(0, n, size=m)
        trees.append(fit_tree(X[sample], y[sample], rng, mtry, params.min_leaf))
    return RfModel(trees=trees, n_features=d, params=params)


def predict_rf_batch(m: RfModel, X: np.ndarray) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[1] != m.n_features:
        raise RegressionError(f"expected {m.n_features} features, got {X.shape[1]}")
    return np.mean([tree.predict(X) for tree in m.trees], axis=0)


def predict_rf(m: RfModel, x: np.ndarray) -> float:
    """Mean of the per-tree predictions."""
    return float(predict_rf_batch(m, x)[0])
