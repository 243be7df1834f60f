"""Per-axis gaze regressors and the model container."""

from .config import ForestParams, KnnParams, RegressionError, RegressorKind

__all__ = ["ForestParams", "KnnParams", "RegressionError", "RegressorKind"]
