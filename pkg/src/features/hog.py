"""Histograms of oriented gradients."""

from typing import Optional

import numpy as np
from scipy import ndimage

from src.eyes.models import EyePair
from src.features.models import Descriptor, FeatureVector, HogSpec, per_eye

NORM_EPS = 1e-10
DIFF = np.array([-1.0, 0.0, 1.0])


def gradients(pixels: np.ndarray) -> tuple:
    """Centred differences (I[x+1] - I[x-1]) with replicated edges; returns (gx, gy)."""
    gx = ndimage.correlate1d(pixels, DIFF, axis=1, mode="nearest")
    gy = ndimage.correlate1d(pixels, DIFF, axis=0, mode="nearest")
    return gx, gy


def orientation_votes(pixels: np.ndarray, bins: int = 9, signed: bool = False) -> np.ndarray:
    """
    Per-pixel magnitude votes, shape (bins, H, W).

    Each pixel splits its gradient magnitude between the two nearest bin centres
    by linear interpolation, wrapping around the orientation circle.
    """
    gx, gy = gradients(pixels)
    magnitude = np.hypot(gx, gy)
    period = 2.0 * np.pi if signed else np.pi
    theta = np.mod(np.arctan2(gy, gx), period)

    pos = theta / (period / bins) - 0.5
    lower = np.floor(pos)
    frac = pos - lower
    lower = lower.astype(np.int64) % bins
    upper = (lower + 1) % bins

    h, w = pixels.shape
    votes = np.zeros((bins, h, w))
    rows, cols = np.indices((h, w))
    np.add.at(votes, (lower, rows, cols), (1.0 - frac) * magnitude)
    np.add.at(votes, (upper, rows, cols), frac * magnitude)
    return votes


def cell_histograms(pixels: np.ndarray, spec: Optional[HogSpec] = None) -> np.ndarray:
    """Unnormalised histograms, shape (cell_rows, cell_cols, bins)."""
    spec = spec or HogSpec()
    votes = orientation_votes(pixels, spec.bins, spec.signed)
    rows, cols = spec.cell_grid
    ch, cw = spec.cell_size
    cells = votes.reshape(spec.bins, rows, ch, cols, cw).sum(axis=(2, 4))
    return np.moveaxis(cells, 0, -1)


def normalize_block(block: np.ndarray, spec: HogSpec) -> np.ndarray:
    """L2 or L2-Hys (clip, then renormalise); a zero block stays zero."""
    out = block / np.sqrt(np.sum(block**2) + NORM_EPS**2)
    if spec.block_norm == "l2hys":
        out = np.minimum(out, spec.clip)
        out = out / np.sqrt(np.sum(out**2) + NORM_EPS**2)
    return out


def hog_descriptor(pixels: np.ndarray, spec: Optional[HogSpec] = None) -> np.ndarray:
    """Block-normalised HoG of one crop: blocks row-major, cells row-major within a block."""
    spec = spec or HogSpec()
    cells = cell_histograms(pixels, spec)
    b = spec.block_cells
    rows, cols = spec.cell_grid
    blocks = []
    for r in range(rows - b + 1):
        for c in range(cols - b + 1):
            block = cells[r : r + b, c : c + b, :].ravel()
            blocks.append(normalize_block(block, spec))
    return np.concatenate(blocks)


def feat_hog(pair: EyePair, spec: Optional[HogSpec] = None) -> FeatureVector:
    spec = spec or HogSpec()
    return per_eye(
        Descriptor.HOG,
        hog_descriptor(pair.left.pixels, spec),
        hog_descriptor(pair.right.pixels, spec),
    )
