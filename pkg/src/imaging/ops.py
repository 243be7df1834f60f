"""Resize, convolution and kernel construction."""

from dataclasses import dataclass
from typing import Union

import cv2
import numpy as np
from scipy import ndimage

from src.imaging.image import GrayImage, ImageDomainError

Raster = Union[GrayImage, np.ndarray]


def as_array(img: Raster) -> np.ndarray:
    """Pixel array of a GrayImage, or the array itself as float64."""
    if isinstance(img, GrayImage):
        return img.pixels
    return np.asarray(img, dtype=np.float64)


@dataclass(frozen=True, eq=False)
class Kernel:
    """Square convolution kernel with an odd side."""

    taps: np.ndarray

    def __post_init__(self) -> None:
        taps = np.array(self.taps, dtype=np.float64, copy=True)
        if taps.ndim != 2 or taps.shape[0] != taps.shape[1]:
            raise ImageDomainError(f"kernel must be square, got shape {taps.shape}")
        if taps.shape[0] % 2 == 0:
            raise ImageDomainError(f"kernel side must be odd, got {taps.shape[0]}")
        if not np.all(np.isfinite(taps)):
            raise ImageDomainError("kernel taps must be finite")
        taps.setflags(write=False)
        object.__setattr__(self, "taps", taps)

    @property
    def side(self) -> int:
        return int(self.taps.shape[0])

    @property
    def center(self) -> float:
        c = self.side // 2
        return float(self.taps[c, c])


def resize_bilinear(img: GrayImage, new_w: int, new_h: int) -> GrayImage:
    """
    Bilinear resize with edge clamping.

    Args:
        img: Source image
        new_w: Target width (>= 1)
        new_h: Target height (>= 1)

    Returns:
        Resized image of exactly new_h x new_w

    Raises:
        ImageDomainError: If a target dimension is below 1
    """
    if new_w < 1 or new_h < 1:
        raise ImageDomainError(f"resize target must be at least 1x1, got {new_w}x{new_h}")
    if (new_h, new_w) == img.shape:
        return img
    out = cv2.resize(img.pixels, (int(new_w), int(new_h)), interpolation=cv2.INTER_LINEAR)
    return GrayImage.clipped(out.reshape(new_h, new_w))


def convolve(img: Raster, kernel: Kernel) -> np.ndarray:
    """
    2D convolution with replicated edges.

    Returns an unclamped float64 raster of the input's shape.
    """
    return ndimage.convolve(as_array(img), kernel.taps, mode="nearest")


def log_kernel(sigma: float, side: int, zero_sum: bool = True) -> Kernel:
    """
    Discretised Laplacian of Gaussian.

    Args:
        sigma: Gaussian scale in pixels (> 0)
        side: Odd kernel side
        zero_sum: Subtract the tap mean so the kernel sums to zero

    Raises:
        ImageDomainError: If sigma is not positive or side is even
    """
    if not sigma > 0:
        raise ImageDomainError(f"LoG sigma must be positive, got {sigma}")
    if side < 1 or side % 2 == 0:
        raise ImageDomainError(f"LoG side must be a positive odd number, got {side}")

    half = side // 2
    yy, xx = np.mgrid[-half : half + 1, -half : half + 1].astype(np.float64)
    q = (xx**2 + yy**2) / (2.0 * sigma**2)
    taps = -1.0 / (np.pi * sigma**4) * (1.0 - q) * np.exp(-q)
    if zero_sum:
        taps = taps - taps.mean()
    return Kernel(taps)


def box_kernel(side: int) -> Kernel:
    """Mean filter."""
    if side < 1 or side % 2 == 0:
        raise ImageDomainError(f"box side must be a positive odd number, got {side}")
    return Kernel(np.full((side, side), 1.0 / (side * side)))


def identity_kernel(side: int = 3) -> Kernel:
    """Kernel with a single unit centre tap."""
    if side < 1 or side % 2 == 0:
        raise ImageDomainError(f"kernel side must be a positive odd number, got {side}")
    taps = np.zeros((side, side))
    taps[side // 2, side // 2] = 1.0
    return Kernel(taps)
