"""Choose the eye pair among detector candidates."""

from typing import Iterable, List, Tuple

from src.eyes.models import BoundingBox, DetectionFailure, EyeGeometryFeature, Side
from src.utils import constants
from src.utils.logging import get_logger

logger = get_logger(__name__)


def filter_candidates(
    frame_dims: Tuple[int, int],
    candidates: Iterable[BoundingBox],
    min_box_fraction: float = constants.MIN_BOX_FRACTION,
) -> List[BoundingBox]:
    """Drop boxes that are too small or leave the frame."""
    width, height = frame_dims
    s_min = min_box_fraction * height
    return [
        box for box in candidates if min(box.w, box.h) >= s_min and box.fits(width, height)
    ]


def localize_eyes(
    frame_dims: Tuple[int, int],
    candidates: Iterable[BoundingBox],
    min_box_fraction: float = constants.MIN_BOX_FRACTION,
    symmetry_tolerance: float = constants.SYMMETRY_TOLERANCE,
) -> Tuple[BoundingBox, BoundingBox]:
    """
    Pick the left/right eye boxes from side-tagged detector candidates.

    Boxes whose shorter side is below ``min_box_fraction`` of the frame height are
    discarded. A pair is admissible when the centre heights differ by at most
    ``symmetry_tolerance`` times the taller box and the subject's right eye lies
    on the image left. The most level pair wins; ties go to the larger combined
    area, then to box coordinates, so the result ignores candidate order.

    Args:
        frame_dims: (width, height) of the frame in pixels
        candidates: Detector boxes tagged with a side

    Returns:
        (left_box, right_box)

    Raises:
        DetectionFailure: If no admissible pair survives
    """
    candidates = list(candidates)
    kept = filter_candidates(frame_dims, candidates, min_box_fraction)
    lefts = [b for b in kept if b.side == Side.LEFT]
    rights = [b for b in kept if b.side == Side.RIGHT]

    best = None
    best_key = None
    for left in lefts:
        for right in rights:
            dy = abs(left.cy - right.cy)
            if dy > symmetry_tolerance * max(left.h, right.h):
                continue
            if not right.cx < left.cx:
                continue
            key = (dy, -(left.area + right.area), left.sort_key(), right.sort_key())
            if best_key is None or key < best_key:
                best, best_key = (left, right), key

    if best is None:
        raise DetectionFailure(
            "no symmetric eye pair among candidates",
            {
                "candidates": len(candidates),
                "after_size_filter": len(kept),
                "left": len(lefts),
                "right": len(rights),
            },
        )
    return best


def eye_geometry_feature(left_box: BoundingBox, right_box: BoundingBox) -> EyeGeometryFeature:
    """Ten-value box geometry of an eye pair (centres, sizes, centre difference)."""
    return EyeGeometryFeature(
        (
            left_box.cx,
            left_box.cy,
            right_box.cx,
            right_box.cy,
            float(left_box.w),
            float(left_box.h),
            float(right_box.w),
            float(right_box.h),
            left_box.cx - right_box.cx,
            left_box.cy - right_box.cy,
        )
    )
