"""Pixel-level primitives: grayscale rasters, resize, convolution, integral tables."""

from .image import GrayImage, ImageDomainError, mean_intensity, read_png, to_gray, write_png
from .integral import (
    IntegralHistogram,
    IntegralImage,
    Rect,
    box_sum,
    histogram_sum,
    integral_histogram,
    integral_image,
)
from .ops import Kernel, box_kernel, convolve, identity_kernel, log_kernel, resize_bilinear

__all__ = [
    "GrayImage",
    "ImageDomainError",
    "IntegralHistogram",
    "IntegralImage",
    "Kernel",
    "Rect",
    "box_kernel",
    "box_sum",
    "convolve",
    "histogram_sum",
    "identity_kernel",
    "integral_histogram",
    "integral_image",
    "log_kernel",
    "mean_intensity",
    "read_png",
    "resize_bilinear",
    "to_gray",
    "write_png",
]
