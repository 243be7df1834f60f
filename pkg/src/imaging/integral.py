"""Integral images and per-bin integral histograms."""

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from src.imaging.image import ImageDomainError
from src.imaging.ops import Raster, as_array


class Rect(NamedTuple):
    """Axis-aligned rectangle: top-left (x, y), width w, height h."""

    x: int
    y: int
    w: int
    h: int


@dataclass(frozen=True, eq=False)
class IntegralImage:
    """Summed-area table of shape (height + 1, width + 1) with a zero first row and column."""

    table: np.ndarray

    @property
    def height(self) -> int:
        return int(self.table.shape[-2] - 1)

    @property
    def width(self) -> int:
        return int(self.table.shape[-1] - 1)


@dataclass(frozen=True, eq=False)
class IntegralHistogram:
    """One summed-area table per bin, shape (bins, height + 1, width + 1)."""

    tables: np.ndarray

    @property
    def bins(self) -> int:
        return int(self.tables.shape[0])

    @property
    def height(self) -> int:
        return int(self.tables.shape[1] - 1)

    @property
    def width(self) -> int:
        return int(self.tables.shape[2] - 1)


def _summed_area(values: np.ndarray) -> np.ndarray:
    pad = [(0, 0)] * (values.ndim - 2) + [(1, 0), (1, 0)]
    return np.pad(values, pad).cumsum(axis=-2).cumsum(axis=-1)


def integral_image(img: Raster) -> IntegralImage:
    """Summed-area table of an image or any 2D real raster."""
    values = as_array(img)
    if values.ndim != 2:
        raise ImageDomainError(f"integral image needs a 2D raster, got shape {values.shape}")
    return IntegralImage(_summed_area(values))


def _check_rect(rect: Rect, height: int, width: int) -> None:
    x, y, w, h = rect
    if w < 0 or h < 0 or x < 0 or y < 0 or x + w > width or y + h > height:
        raise ImageDomainError(
            f"rectangle {tuple(rect)} outside {width}x{height} table",
            {"rect": list(rect), "width": width, "height": height},
        )


def box_sum(ii: IntegralImage, rect: Rect) -> float:
    """
    Sum of the source raster over ``rect`` in four lookups.

    Raises:
        ImageDomainError: If the rectangle leaves the image
    """
    rect = Rect(*rect)
    _check_rect(rect, ii.height, ii.width)
    x, y, w, h = rect
    t = ii.table
    return float(t[y + h, x + w] - t[y, x + w] - t[y + h, x] + t[y, x])


def integral_histogram(bin_weights: np.ndarray) -> IntegralHistogram:
    """
    Build per-bin integral tables from a (bins, height, width) vote array.

    Each plane holds the weight every pixel contributes to that bin.
    """
    weights = np.asarray(bin_weights, dtype=np.float64)
    if weights.ndim != 3:
        raise ImageDomainError(
            f"integral histogram needs a (bins, height, width) array, got {weights.shape}"
        )
    return IntegralHistogram(_summed_area(weights))


def histogram_sum(ih: IntegralHistogram, rect: Rect) -> np.ndarray:
    """Histogram (one value per bin) over ``rect``."""
    rect = Rect(*rect)
    _check_rect(rect, ih.height, ih.width)
    x, y, w, h = rect
    t = ih.tables
    return t[:, y + h, x + w] - t[:, y, x + w] - t[:, y + h, x] + t[:, y, x]
