"""Data models for eye localisation."""

from dataclasses import dataclass
from enum import Enum
from typing import Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from src.imaging.image import GrayImage
from src.utils import constants
from src.utils.errors import GazeKitError


class DetectionFailure(GazeKitError):
    """No usable left/right eye pair in a frame."""

    code = "detection_failure"


class CropError(GazeKitError):
    """Eye box does not fit inside the frame."""

    code = "crop_error"


class DetectorError(GazeKitError):
    """External eye detector failed or produced unreadable output."""

    code = "detector_error"


class Side(str, Enum):
    """Which of the subject's eyes a box belongs to."""

    LEFT = "left"
    RIGHT = "right"


class BoundingBox(BaseModel):
    """Eye box in frame pixel coordinates."""

    x: int = Field(..., ge=0, description="Left edge (px)")
    y: int = Field(..., ge=0, description="Top edge (px)")
    w: int = Field(..., gt=0, description="Width (px)")
    h: int = Field(..., gt=0, description="Height (px)")
    side: Side

    model_config = ConfigDict(
        frozen=True,
        json_schema_extra={"example": {"x": 112, "y": 60, "w": 48, "h": 48, "side": "left"}},
    )

    @property
    def cx(self) -> float:
        return self.x + self.w / 2.0

    @property
    def cy(self) -> float:
        return self.y + self.h / 2.0

    @property
    def area(self) -> int:
        return self.w * self.h

    def fits(self, width: int, height: int) -> bool:
        """Whether the box lies inside a width x height frame."""
        return self.x + self.w <= width and self.y + self.h <= height

    def sort_key(self) -> Tuple[int, int, int, int, str]:
        return (self.x, self.y, self.w, self.h, self.side.value)


@dataclass(frozen=True, eq=False)
class EyePair:
    """Canonical 30x100 crops of both eyes and the boxes they came from."""

    left: GrayImage
    right: GrayImage
    left_box: BoundingBox
    right_box: BoundingBox

    def __post_init__(self) -> None:
        expected = (constants.EYE_CROP_HEIGHT, constants.EYE_CROP_WIDTH)
        for name, crop in (("left", self.left), ("right", self.right)):
            if crop.shape != expected:
                raise CropError(f"{name} crop has shape {crop.shape}, expected {expected}")

    @property
    def mean_intensity(self) -> float:
        """Mean over both crops; the signal blink detection watches."""
        return float((self.left.pixels.mean() + self.right.pixels.mean()) / 2.0)

    def side_by_side(self) -> GrayImage:
        """Left and right crops next to each other (30 x 200)."""
        return GrayImage(np.hstack([self.left.pixels, self.right.pixels]))


@dataclass(frozen=True)
class EyeGeometryFeature:
    """
    Box geometry of an eye pair in frame pixels.

    Order: left centre (x, y), right centre (x, y), left size (w, h),
    right size (w, h), centre difference left minus right (dx, dy).
    """

    values: Tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.values) != constants.GEOMETRY_FEATURE_LENGTH:
            raise ValueError(
                f"eye geometry feature needs {constants.GEOMETRY_FEATURE_LENGTH} values, "
                f"got {len(self.values)}"
            )

    def as_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=np.float64)
