"""Uniform local binary patterns."""

from typing import Tuple

import numpy as np

from src.eyes.models import EyePair
from src.features.models import Descriptor, FeatureVector, per_eye
from src.utils import constants

# (dy, dx) of the 8 neighbours, clockwise from top-left; bit k is neighbour k
NEIGHBOURS = ((-1, -1), (-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1), (0, -1))


def transitions(code: int) -> int:
    """Circular 0/1 transitions in an 8-bit pattern."""
    rotated = ((code >> 1) | ((code & 1) << 7)) & 0xFF
    return bin(code ^ rotated).count("1")


def uniform_lut() -> np.ndarray:
    """Code -> label: uniform codes get 0..57 in code order, the rest 58."""
    lut = np.full(256, constants.LBP_CODES - 1, dtype=np.int64)
    label = 0
    for code in range(256):
        if transitions(code) <= 2:
            lut[code] = label
            label += 1
    return lut


UNIFORM_LUT = uniform_lut()


def lbp_codes(pixels: np.ndarray) -> np.ndarray:
    """8-bit codes (neighbour > centre) for the interior pixels."""
    h, w = pixels.shape
    center = pixels[1 : h - 1, 1 : w - 1]
    codes = np.zeros(center.shape, dtype=np.int64)
    for bit, (dy, dx) in enumerate(NEIGHBOURS):
        neighbour = pixels[1 + dy : h - 1 + dy, 1 + dx : w - 1 + dx]
        codes |= (neighbour > center).astype(np.int64) << bit
    return codes


def lbp_histograms(
    pixels: np.ndarray, cell_grid: Tuple[int, int] = constants.LBP_CELL_GRID
) -> np.ndarray:
    """L1-normalised label histogram per cell, shape (cells, 59)."""
    h, w = pixels.shape
    rows, cols = cell_grid
    ch, cw = h // rows, w // cols
    labels = UNIFORM_LUT[lbp_codes(pixels)]
    ii, jj = np.mgrid[1 : h - 1, 1 : w - 1]
    cell = (ii // ch) * cols + (jj // cw)
    counts = np.bincount(
        (cell * constants.LBP_CODES + labels).ravel(),
        minlength=rows * cols * constants.LBP_CODES,
    ).reshape(rows * cols, constants.LBP_CODES).astype(np.float64)
    totals = counts.sum(axis=1, keepdims=True)
    return np.divide(counts, totals, out=np.zeros_like(counts), where=totals > 0)


def feat_lbp(
    pair: EyePair, cell_grid: Tuple[int, int] = constants.LBP_CELL_GRID
) -> FeatureVector:
    return per_eye(
        Descriptor.LBP,
        lbp_histograms(pair.left.pixels, cell_grid),
        lbp_histograms(pair.right.pixels, cell_grid),
    )
