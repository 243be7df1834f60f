"""Data models for eye-appearance features."""

from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from src.utils import constants
from src.utils.errors import GazeKitError


class FeatureError(GazeKitError):
    """Unknown descriptor, inconsistent layout, or malformed feature dump."""

    code = "feature_error"


class Descriptor(str, Enum):
    """Appearance descriptors."""

    INTENSITY = "intensity"
    LOG = "log"
    LBP = "lbp"
    HOG = "hog"
    MHOG = "mhog"


def parse_descriptor(tag: object) -> Descriptor:
    """Descriptor from its tag, raising FeatureError for unknown tags."""
    try:
        return Descriptor(tag)
    except ValueError as e:
        valid = ", ".join(d.value for d in Descriptor)
        raise FeatureError(f"unknown descriptor {tag!r}; expected one of {valid}") from e


class HogSpec(BaseModel):
    """Orientation-histogram parameters for HoG and mHoG."""

    crop_shape: Tuple[int, int] = Field(
        (constants.EYE_CROP_HEIGHT, constants.EYE_CROP_WIDTH), description="(rows, cols)"
    )
    cell_grid: Tuple[int, int] = Field(
        constants.HOG_CELL_GRID, description="HoG cells (rows, cols)"
    )
    bins: int = Field(constants.HOG_BINS, ge=2, description="Orientation bins")
    signed: bool = Field(False, description="Use 0..360 degrees instead of 0..180")
    block_cells: int = Field(constants.HOG_BLOCK_CELLS, ge=1, description="Block side in cells")
    block_norm: str = Field("l2hys", description="Block normalisation (l2hys or l2)")
    clip: float = Field(constants.HOG_CLIP, gt=0, description="L2-Hys clipping value")
    levels: List[Tuple[int, int]] = Field(
        default_factory=lambda: [tuple(level) for level in constants.MHOG_LEVELS],
        description="mHoG cell grids, coarse to fine",
    )

    model_config = ConfigDict(frozen=True)

    @model_validator(mode="after")
    def _check_tiling(self) -> "HogSpec":
        rows, cols = self.crop_shape
        for grid in [self.cell_grid, *self.levels]:
            gr, gc = grid
            if gr < 1 or gc < 1 or rows % gr or cols % gc:
                raise ValueError(f"cell grid {grid} does not tile a {rows}x{cols} crop")
        if self.block_cells > min(self.cell_grid):
            raise ValueError("block larger than the cell grid")
        if self.block_norm not in ("l2hys", "l2"):
            raise ValueError(f"unknown block normalisation {self.block_norm!r}")
        return self

    @property
    def cell_size(self) -> Tuple[int, int]:
        return (self.crop_shape[0] // self.cell_grid[0], self.crop_shape[1] // self.cell_grid[1])

    @property
    def hog_length(self) -> int:
        """Per-eye HoG length."""
        br = self.cell_grid[0] - self.block_cells + 1
        bc = self.cell_grid[1] - self.block_cells + 1
        return br * bc * self.block_cells**2 * self.bins

    @property
    def mhog_length(self) -> int:
        """Per-eye mHoG length."""
        return sum(r * c for r, c in self.levels) * self.bins


class FeatureSpec(BaseModel):
    """Which descriptor to extract and with what parameters."""

    descriptor: Descriptor = Descriptor.MHOG
    hog: HogSpec = Field(default_factory=HogSpec)
    log_sigma: float = Field(constants.LOG_SIGMA, gt=0)
    log_side: int = Field(constants.LOG_SIDE, ge=1)
    lbp_cell_grid: Tuple[int, int] = Field(constants.LBP_CELL_GRID)

    model_config = ConfigDict(frozen=True)


@dataclass(frozen=True, eq=False)
class FeatureVector:
    """Flat descriptor values with per-eye block boundaries."""

    descriptor: Descriptor
    values: np.ndarray
    layout: Dict[str, Tuple[int, int]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=np.float64).ravel()
        if not np.all(np.isfinite(values)):
            raise FeatureError(f"{self.descriptor.value} feature has non-finite values")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return int(self.values.shape[0])

    def block(self, name: str) -> np.ndarray:
        start, stop = self.layout[name]
        return self.values[start:stop]


def per_eye(descriptor: Descriptor, left: np.ndarray, right: np.ndarray) -> FeatureVector:
    """Concatenate left then right and record the split."""
    n = left.size
    return FeatureVector(
        descriptor=descriptor,
        values=np.concatenate([left.ravel(), right.ravel()]),
        layout={"left": (0, n), "right": (n, n + right.size)},
    )
