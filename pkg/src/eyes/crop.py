"""Canonical eye crops."""

from src.eyes.models import BoundingBox, CropError, EyePair
from src.imaging.image import GrayImage
from src.imaging.ops import resize_bilinear
from src.utils import constants

CROP_TOP = constants.PUPIL_ROW - constants.EYE_CROP_HALF_HEIGHT
CROP_BOTTOM = constants.PUPIL_ROW + constants.EYE_CROP_HALF_HEIGHT


def crop_eye(frame: GrayImage, box: BoundingBox) -> GrayImage:
    """
    Normalise an eye box to 100x100 and keep the 30 rows around the pupil line.

    Rows 52..81 of the resized patch are kept, centred on row 67.

    Raises:
        CropError: If the box leaves the frame
    """
    if not box.fits(frame.width, frame.height):
        raise CropError(
            f"box {box.x},{box.y} {box.w}x{box.h} exceeds {frame.width}x{frame.height} frame",
            {"box": box.model_dump(mode="json")},
        )
    patch = frame.region(box.x, box.y, box.w, box.h)
    norm = resize_bilinear(patch, constants.EYE_NORM_SIZE, constants.EYE_NORM_SIZE)
    return GrayImage(norm.pixels[CROP_TOP:CROP_BOTTOM, :])


def make_eye_pair(frame: GrayImage, left_box: BoundingBox, right_box: BoundingBox) -> EyePair:
    """Crop both eyes of a frame."""
    return EyePair(
        left=crop_eye(frame, left_box),
        right=crop_eye(frame, right_box),
        left_box=left_box,
        right_box=right_box,
    )
