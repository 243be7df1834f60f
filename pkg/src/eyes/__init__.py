"""Eye localisation, canonical crops and blink detection."""

from .blinks import Blink, BlinkReport, detect_blinks
from .crop import crop_eye, make_eye_pair
from .localize import eye_geometry_feature, localize_eyes
from .models import (
    BoundingBox,
    CropError,
    DetectionFailure,
    DetectorError,
    EyeGeometryFeature,
    EyePair,
    Side,
)

__all__ = [
    "Blink",
    "BlinkReport",
    "BoundingBox",
    "CropError",
    "DetectionFailure",
    "DetectorError",
    "EyeGeometryFeature",
    "EyePair",
    "Side",
    "crop_eye",
    "detect_blinks",
    "eye_geometry_feature",
    "localize_eyes",
    "make_eye_pair",
]
