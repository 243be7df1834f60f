"""Laplacian-of-Gaussian responses."""

from functools import lru_cache

from src.eyes.models import EyePair
from src.features.models import Descriptor, FeatureVector, per_eye
from src.imaging.ops import Kernel, convolve, log_kernel
from src.utils import constants


@lru_cache(maxsize=8)
def _kernel(sigma: float, side: int) -> Kernel:
    return log_kernel(sigma, side)


def feat_log(
    pair: EyePair, sigma: float = constants.LOG_SIGMA, side: int = constants.LOG_SIDE
) -> FeatureVector:
    """Each eye convolved with a zero-sum LoG kernel, flattened row-major."""
    kernel = _kernel(sigma, side)
    return per_eye(Descriptor.LOG, convolve(pair.left, kernel), convolve(pair.right, kernel))
