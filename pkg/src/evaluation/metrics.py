"""Gaze error metrics and error reports."""

import math
from typing import Dict, List, Optional, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from src.dataset.geometry import grid_points
from src.dataset.models import GazePoint, ScreenGeometry
from src.utils import constants
from src.utils.errors import GazeKitError


class MetricError(GazeKitError):
    """Metric evaluated outside its domain."""

    code = "metric_error"


class SubjectError(BaseModel):
    """Per-subject breakdown of a report."""

    subject_id: str
    sample_count: int = Field(..., ge=0)
    mean_error_cm: float = Field(..., ge=0)


class AngularBand(BaseModel):
    """Angular error at each assumed viewing distance."""

    distances_cm: List[float]
    degrees: List[float]

    @property
    def low(self) -> float:
        return min(self.degrees)

    @property
    def high(self) -> float:
        return max(self.degrees)


class ErrorReport(BaseModel):
    """Per-image error statistics of an evaluation."""

    mean_error_cm: float = Field(..., ge=0, description="Mean Euclidean error over images")
    std_error_cm: float = Field(..., ge=0)
    mae_x_cm: float = Field(..., ge=0)
    mae_y_cm: float = Field(..., ge=0)
    sample_count: int = Field(..., ge=0)
    per_subject: List[SubjectError] = Field(default_factory=list)
    angular: Optional[AngularBand] = None
    config_fingerprint: str = ""
    seed: int = 0

    model_config = ConfigDict(
        json_schema_extra={
            "example": {
                "mean_error_cm": 3.17,
                "std_error_cm": 2.10,
                "mae_x_cm": 2.1,
                "mae_y_cm": 1.8,
                "sample_count": 1225,
            }
        }
    )

    def subject(self, subject_id: str) -> SubjectError:
        for entry in self.per_subject:
            if entry.subject_id == subject_id:
                return entry
        raise KeyError(subject_id)


def euclid_error(pred: GazePoint, truth: GazePoint) -> float:
    """Euclidean distance between two screen points (cm)."""
    return math.hypot(pred.x_cm - truth.x_cm, pred.y_cm - truth.y_cm)


def angular_error(e_cm: float, d_cm: float) -> float:
    """
    Visual angle (degrees) subtended by an on-screen error at a viewing distance.

    Raises:
        MetricError: If the distance is not positive
    """
    if d_cm <= 0:
        raise MetricError(f"viewing distance must be positive, got {d_cm}", {"d_cm": d_cm})
    return math.degrees(math.atan(e_cm / d_cm))


def angular_band(
    e_cm: float, distances: Sequence[float] = constants.VIEWING_DISTANCES_CM
) -> AngularBand:
    """Angular error over a range of plausible viewing distances."""
    return AngularBand(
        distances_cm=[float(d) for d in distances],
        degrees=[angular_error(e_cm, d) for d in distances],
    )


def center_baseline_error(geom: Optional[ScreenGeometry] = None) -> float:
    """Mean error of always predicting the screen centre, over the dot grid."""
    geom = geom or ScreenGeometry()
    center = geom.center
    return float(np.mean([euclid_error(center, p) for _, p in grid_points(geom)]))


def error_report(
    pred: np.ndarray,
    truth: np.ndarray,
    subjects: Sequence[str],
    distances: Optional[Sequence[float]] = constants.VIEWING_DISTANCES_CM,
    config_fingerprint: str = "",
    seed: int = 0,
) -> ErrorReport:
    """
    Aggregate per-image errors.

    Args:
        pred: n x 2 predicted positions (cm)
        truth: n x 2 true positions (cm)
        subjects: Subject id of each image
        distances: Viewing distances for the angular band (None to skip)

    Returns:
        ErrorReport averaged over images, with per-subject means in first-appearance order
    """
    pred = np.asarray(pred, dtype=np.float64).reshape(-1, 2)
    truth = np.asarray(truth, dtype=np.float64).reshape(-1, 2)
    if pred.shape != truth.shape:
        raise MetricError(f"{pred.shape[0]} predictions for {truth.shape[0]} truths")
    subjects = np.asarray(list(subjects), dtype=object)
    if subjects.shape[0] != pred.shape[0]:
        raise MetricError(f"{subjects.shape[0]} subject ids for {pred.shape[0]} images")

    diff = pred - truth
    errors = np.hypot(diff[:, 0], diff[:, 1])
    n = int(errors.shape[0])
    per_subject = []
    for subject_id in dict.fromkeys(subjects.tolist()):
        mask = subjects == subject_id
        per_subject.append(
            SubjectError(
                subject_id=subject_id,
                sample_count=int(mask.sum()),
                mean_error_cm=float(errors[mask].mean()),
            )
        )
    mean = float(errors.mean()) if n else 0.0
    return ErrorReport(
        mean_error_cm=mean,
        std_error_cm=float(errors.std()) if n else 0.0,
        mae_x_cm=float(np.abs(diff[:, 0]).mean()) if n else 0.0,
        mae_y_cm=float(np.abs(diff[:, 1]).mean()) if n else 0.0,
        sample_count=n,
        per_subject=per_subject,
        angular=angular_band(mean, distances) if distances else None,
        config_fingerprint=config_fingerprint,
        seed=seed,
    )


def subject_means(report: ErrorReport) -> Dict[str, float]:
    """Per-subject mean errors keyed by subject id."""
    return {s.subject_id: s.mean_error_cm for s in report.per_subject}
