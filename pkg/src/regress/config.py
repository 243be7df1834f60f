"""Regressor parameters and errors."""

import math
from enum import Enum
from typing import Optional

from pydantic import BaseModel, ConfigDict, Field

from src.utils import constants
from src.utils.errors import GazeKitError


class RegressionError(GazeKitError):
    """Bad training data, dimension mismatch, or missing inputs at prediction."""

    code = "regression_error"


class RegressorKind(str, Enum):
    """Per-axis regressor family."""

    KNN = "knn"
    RF = "rf"


class KnnParams(BaseModel):
    """k-nearest-neighbour settings."""

    k: int = Field(constants.KNN_K, ge=1, description="Neighbours averaged per prediction")

    model_config = ConfigDict(frozen=True)


class ForestParams(BaseModel):
    """Random forest settings."""

    n_trees: int = Field(constants.FOREST_TREES, ge=1, description="Trees in the forest")
    mtry: Optional[int] = Field(
        None, ge=1, description="Features tried per split (default ceil(d / 3))"
    )
    min_leaf: int = Field(constants.FOREST_MIN_LEAF, ge=1, description="Minimum samples per leaf")
    bootstrap_fraction: float = Field(
        1.0, gt=0, le=1.0, description="Bootstrap size as a fraction of the data, with replacement"
    )
    seed: int = Field(0, description="Seed for bootstraps and feature sampling")

    model_config = ConfigDict(
        frozen=True,
        json_schema_extra={
            "example": {"n_trees": 100, "mtry": None, "min_leaf": 5, "bootstrap_fraction": 1.0}
        },
    )

    def resolve_mtry(self, n_features: int) -> int:
        """Features tried per split for data of width ``n_features``."""
        if n_features < 1:
            return 0
        mtry = self.mtry if self.mtry is not None else math.ceil(n_features / 3)
        if mtry > n_features:
            raise RegressionError(
                f"mtry {mtry} exceeds the {n_features} available features",
                {"mtry": mtry, "features": n_features},
            )
        return mtry
