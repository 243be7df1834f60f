"""Eye-appearance descriptors and per-corpus feature tables."""

from .models import Descriptor, FeatureError, FeatureSpec, FeatureVector, HogSpec, parse_descriptor

__all__ = [
    "Descriptor",
    "FeatureError",
    "FeatureSpec",
    "FeatureVector",
    "HogSpec",
    "parse_descriptor",
]
