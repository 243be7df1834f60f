"""Error metrics and evaluation protocols."""

from .metrics import ErrorReport, angular_band, angular_error, center_baseline_error, euclid_error

__all__ = [
    "ErrorReport",
    "angular_band",
    "angular_error",
    "center_baseline_error",
    "euclid_error",
]
