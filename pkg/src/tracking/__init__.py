"""Frame-sequential gaze tracking and temporal filtering."""

from .bilateral import bilateral_filter
from .models import GazeTrack, TrackingError, TrackPoint

__all__ = ["GazeTrack", "TrackPoint", "TrackingError", "bilateral_filter"]
