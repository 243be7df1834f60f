"""Contrast-normalised pixel intensities."""

import numpy as np

from src.eyes.models import EyePair
from src.features.models import Descriptor, FeatureVector, per_eye

MIN_STD = 1e-8


def standardize(pixels: np.ndarray) -> np.ndarray:
    """Zero mean, unit variance; flat patches map to zeros."""
    std = pixels.std()
    if std < MIN_STD:
        return np.zeros(pixels.size)
    return ((pixels - pixels.mean()) / std).ravel()


def feat_intensity(pair: EyePair) -> FeatureVector:
    return per_eye(
        Descriptor.INTENSITY, standardize(pair.left.pixels), standardize(pair.right.pixels)
    )
