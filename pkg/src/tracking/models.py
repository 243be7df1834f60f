"""Gaze track types."""

from typing import List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from src.dataset.models import GazePoint
from src.utils.errors import GazeKitError


class TrackingError(GazeKitError):
    """Invalid filter parameters or tracking input."""

    code = "tracking_error"


class TrackPoint(BaseModel):
    """
    One frame of a track.

    Blink and localisation-failure frames carry no estimate; ``filtered`` is
    present exactly when ``raw`` is.
    """

    frame_index: int = Field(..., ge=0)
    raw: Optional[GazePoint] = None
    filtered: Optional[GazePoint] = None
    blink: bool = False
    failure: Optional[str] = Field(None, description="Localisation failure code")
    truth: Optional[GazePoint] = None

    model_config = ConfigDict(frozen=True)

    @model_validator(mode="after")
    def _check_estimates(self) -> "TrackPoint":
        if (self.raw is None) != (self.filtered is None):
            raise ValueError("filtered estimate must be present exactly when raw is")
        if self.blink and self.raw is not None:
            raise ValueError("blink frames carry no estimate")
        return self

    @property
    def has_estimate(self) -> bool:
        return self.raw is not None


class GazeTrack(BaseModel):
    """Per-frame gaze estimates of one session, in frame order."""

    points: List[TrackPoint] = Field(default_factory=list)
    warning: Optional[str] = None

    model_config = ConfigDict(frozen=True)

    @model_validator(mode="after")
    def _check_order(self) -> "GazeTrack":
        indices = [p.frame_index for p in self.points]
        if any(b <= a for a, b in zip(indices, indices[1:])):
            raise ValueError("frame indices must be strictly increasing")
        return self

    def __len__(self) -> int:
        return len(self.points)

    @property
    def estimates(self) -> List[TrackPoint]:
        return [p for p in self.points if p.has_estimate]

    @property
    def blink_frames(self) -> List[int]:
        return [p.frame_index for p in self.points if p.blink]

    def raw_array(self) -> np.ndarray:
        """Raw estimates, n x 2."""
        return np.array([p.raw.as_tuple() for p in self.estimates]).reshape(-1, 2)

    def filtered_array(self) -> np.ndarray:
        """Filtered estimates, n x 2."""
        return np.array([p.filtered.as_tuple() for p in self.estimates]).reshape(-1, 2)

    def mean_error(self, filtered: bool = True) -> Optional[float]:
        """Mean distance to the true gaze point over frames that have both (cm)."""
        errors = []
        for p in self.estimates:
            if p.truth is None:
                continue
            est = p.filtered if filtered else p.raw
            errors.append(float(np.hypot(est.x_cm - p.truth.x_cm, est.y_cm - p.truth.y_cm)))
        return float(np.mean(errors)) if errors else None
