"""Multilevel HoG over per-bin integral histograms."""

from typing import List, Optional

import numpy as np

from src.eyes.models import EyePair
from src.features.hog import orientation_votes
from src.features.models import Descriptor, FeatureVector, HogSpec
from src.imaging.integral import Rect, histogram_sum, integral_histogram


def l1_normalize(hist: np.ndarray) -> np.ndarray:
    total = hist.sum()
    if total <= 0:
        return np.zeros_like(hist)
    return hist / total


def level_cells(spec: HogSpec, level: tuple) -> List[Rect]:
    """Cell rectangles of one pyramid level, row-major."""
    rows, cols = level
    ch, cw = spec.crop_shape[0] // rows, spec.crop_shape[1] // cols
    return [Rect(c * cw, r * ch, cw, ch) for r in range(rows) for c in range(cols)]


def mhog_descriptor(pixels: np.ndarray, spec: Optional[HogSpec] = None) -> np.ndarray:
    """
    Concatenated per-cell orientation histograms at every pyramid level.

    One integral table per orientation bin turns every cell histogram into a
    four-lookup box sum. Each cell is L1-normalised.
    """
    spec = spec or HogSpec()
    ih = integral_histogram(orientation_votes(pixels, spec.bins, spec.signed))
    parts = [
        l1_normalize(histogram_sum(ih, rect))
        for level in spec.levels
        for rect in level_cells(spec, level)
    ]
    return np.concatenate(parts)


def mhog_layout(spec: HogSpec) -> dict:
    """Offsets of every level block for both eyes."""
    layout = {}
    per_eye = spec.mhog_length
    for e, eye in enumerate(("left", "right")):
        start = e * per_eye
        layout[eye] = (start, start + per_eye)
        for rows, cols in spec.levels:
            n = rows * cols * spec.bins
            layout[f"{eye}:{rows}x{cols}"] = (start, start + n)
            start += n
    return layout


def feat_mhog(pair: EyePair, spec: Optional[HogSpec] = None) -> FeatureVector:
    spec = spec or HogSpec()
    values = np.concatenate(
        [mhog_descriptor(pair.left.pixels, spec), mhog_descriptor(pair.right.pixels, spec)]
    )
    return FeatureVector(descriptor=Descriptor.MHOG, values=values, layout=mhog_layout(spec))
