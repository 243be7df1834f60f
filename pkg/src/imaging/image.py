"""Grayscale raster container and PNG I/O."""

from dataclasses import dataclass
from pathlib import Path
from typing import Union

import cv2
import numpy as np

from src.utils.errors import GazeKitError

LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114])


class ImageDomainError(GazeKitError):
    """Invalid pixel data, kernel, rectangle or resize target."""

    code = "image_domain_error"


@dataclass(frozen=True, eq=False)
class GrayImage:
    """
    Normalised grayscale raster.

    Pixels are a read-only float64 array of shape (height, width) with every
    value finite and inside [0, 1].
    """

    pixels: np.ndarray

    def __post_init__(self) -> None:
        arr = np.array(self.pixels, dtype=np.float64, copy=True)
        if arr.ndim != 2 or arr.shape[0] == 0 or arr.shape[1] == 0:
            raise ImageDomainError(f"expected a non-empty 2D raster, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ImageDomainError("pixels must be finite")
        if arr.min() < 0.0 or arr.max() > 1.0:
            raise ImageDomainError(
                f"pixels must lie in [0, 1], got [{arr.min():.4g}, {arr.max():.4g}]"
            )
        arr.setflags(write=False)
        object.__setattr__(self, "pixels", arr)

    @classmethod
    def clipped(cls, values: np.ndarray) -> "GrayImage":
        """Build from values that may stray slightly outside [0, 1]."""
        return cls(np.clip(np.nan_to_num(values, nan=0.0), 0.0, 1.0))

    @classmethod
    def constant(cls, height: int, width: int, value: float = 0.0) -> "GrayImage":
        return cls(np.full((height, width), value, dtype=np.float64))

    @property
    def height(self) -> int:
        return int(self.pixels.shape[0])

    @property
    def width(self) -> int:
        return int(self.pixels.shape[1])

    @property
    def shape(self) -> tuple:
        return self.pixels.shape

    def region(self, x: int, y: int, w: int, h: int) -> "GrayImage":
        """Sub-image at (x, y) of size w x h."""
        if x < 0 or y < 0 or w <= 0 or h <= 0 or x + w > self.width or y + h > self.height:
            raise ImageDomainError(
                f"region ({x}, {y}, {w}, {h}) outside {self.width}x{self.height} image"
            )
        return GrayImage(self.pixels[y : y + h, x : x + w])

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, GrayImage):
            return NotImplemented
        return self.shape == other.shape and bool(np.array_equal(self.pixels, other.pixels))

    def __hash__(self) -> int:
        return hash((self.shape, self.pixels.tobytes()))


def to_gray(rgb: np.ndarray) -> GrayImage:
    """
    Convert an 8-bit RGB raster to normalised luma.

    Args:
        rgb: uint8 array of shape (H, W, 3) in R, G, B channel order

    Returns:
        GrayImage with (0.299 R + 0.587 G + 0.114 B) / 255
    """
    arr = np.asarray(rgb)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ImageDomainError(f"expected an (H, W, 3) raster, got shape {arr.shape}")
    luma = arr.astype(np.float64) @ LUMA_WEIGHTS / 255.0
    return GrayImage.clipped(luma)


def mean_intensity(img: GrayImage) -> float:
    """Arithmetic mean of the pixels."""
    return float(img.pixels.mean())


def read_png(path: Union[str, Path]) -> GrayImage:
    """
    Read an 8-bit grayscale or RGB(A) PNG as a GrayImage.

    Raises:
        ImageDomainError: If the file is missing or not a supported PNG
    """
    raw = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    if raw is None:
        raise ImageDomainError(f"cannot read image {path}", {"path": str(path)})
    if raw.dtype != np.uint8:
        raise ImageDomainError(f"{path}: only 8-bit PNGs are supported, got {raw.dtype}")
    if raw.ndim == 2:
        return GrayImage(raw.astype(np.float64) / 255.0)
    if raw.shape[2] == 4:
        raw = raw[:, :, :3]
    # OpenCV loads colour as B, G, R
    return to_gray(raw[:, :, ::-1])


def write_png(img: GrayImage, path: Union[str, Path]) -> None:
    """Write a GrayImage as an 8-bit grayscale PNG."""
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    data = np.round(img.pixels * 255.0).astype(np.uint8)
    if not cv2.imwrite(str(target), data):
        raise ImageDomainError(f"cannot write image {target}", {"path": str(target)})
