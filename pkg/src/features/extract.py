"""Descriptor dispatch."""

from typing import Callable, Dict, Union

import numpy as np

from src.eyes.models import EyeGeometryFeature, EyePair
from src.features.hog import feat_hog
from src.features.intensity import feat_intensity
from src.features.laplacian import feat_log
from src.features.lbp import feat_lbp
from src.features.mhog import feat_mhog
from src.features.models import Descriptor, FeatureSpec, FeatureVector, parse_descriptor
from src.reduction.model import ReductionModel, project
from src.utils import constants

SpecLike = Union[FeatureSpec, Descriptor, str]

_EXTRACTORS: Dict[Descriptor, Callable[[EyePair, FeatureSpec], FeatureVector]] = {
    Descriptor.INTENSITY: lambda pair, spec: feat_intensity(pair),
    Descriptor.LOG: lambda pair, spec: feat_log(pair, spec.log_sigma, spec.log_side),
    Descriptor.LBP: lambda pair, spec: feat_lbp(pair, spec.lbp_cell_grid),
    Descriptor.HOG: lambda pair, spec: feat_hog(pair, spec.hog),
    Descriptor.MHOG: lambda pair, spec: feat_mhog(pair, spec.hog),
}


def as_spec(spec: SpecLike) -> FeatureSpec:
    """Accept a FeatureSpec, a Descriptor, or a descriptor tag."""
    if isinstance(spec, FeatureSpec):
        return spec
    return FeatureSpec(descriptor=parse_descriptor(spec))


def extract(pair: EyePair, spec: SpecLike) -> FeatureVector:
    """
    Extract the configured descriptor from an eye pair.

    Raises:
        FeatureError: If the descriptor tag is unknown
    """
    spec = as_spec(spec)
    return _EXTRACTORS[spec.descriptor](pair, spec)


def feature_length(spec: SpecLike) -> int:
    """Length of the descriptor for both eyes."""
    spec = as_spec(spec)
    rows, cols = spec.hog.crop_shape
    if spec.descriptor in (Descriptor.INTENSITY, Descriptor.LOG):
        return 2 * rows * cols
    if spec.descriptor == Descriptor.LBP:
        return 2 * spec.lbp_cell_grid[0] * spec.lbp_cell_grid[1] * constants.LBP_CODES
    if spec.descriptor == Descriptor.HOG:
        return 2 * spec.hog.hog_length
    return 2 * spec.hog.mhog_length


def augment(reduced: np.ndarray, geometry: EyeGeometryFeature) -> np.ndarray:
    """Append the 10 box-geometry values to an already reduced vector."""
    return np.concatenate([np.asarray(reduced, dtype=np.float64), geometry.as_array()])


def extract_augmented(
    pair: EyePair,
    geometry: EyeGeometryFeature,
    spec: SpecLike,
    reduction: ReductionModel,
) -> FeatureVector:
    """
    Reduced descriptor followed by the eye-geometry values.

    The geometry is appended after PCA/LDA, so the result has
    ``reduction.output_dim + 10`` values.
    """
    feature = extract(pair, spec)
    reduced = project(reduction, feature.values)
    values = augment(reduced, geometry)
    r = reduced.shape[0]
    return FeatureVector(
        descriptor=feature.descriptor,
        values=values,
        layout={"reduced": (0, r), "geometry": (r, r + constants.GEOMETRY_FEATURE_LENGTH)},
    )
