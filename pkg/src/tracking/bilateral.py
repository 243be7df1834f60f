"""Temporal bilateral filter for gaze tracks."""

import numpy as np

from src.dataset.models import GazePoint
from src.tracking.models import GazeTrack, TrackingError
from src.utils import constants


def bilateral_smooth(
    frames: np.ndarray, values: np.ndarray, sigma_t: float, sigma_r: float
) -> np.ndarray:
    """
    Edge-preserving smoothing of a sampled series.

    Every output is a normalised combination of the samples within 3 sigma_t
    frames, weighted by temporal distance and by the Euclidean distance
    between samples. ``values`` is either one value per frame or one row of
    coordinates per frame; rows share a single weight per frame pair, so
    each output lies in the convex hull of its window.
    """
    if sigma_t <= 0 or sigma_r <= 0:
        raise TrackingError(
            "filter sigmas must be positive", {"sigma_t": sigma_t, "sigma_r": sigma_r}
        )
    t = np.asarray(frames, dtype=np.float64)
    v = np.asarray(values, dtype=np.float64)
    flat = v.ndim == 1
    if flat:
        v = v[:, None]
    dt = t[:, None] - t[None, :]
    dv = v[None, :, :] - v[:, None, :]
    dist2 = (dv**2).sum(axis=2)
    w = np.exp(-(dt**2) / (2.0 * sigma_t**2)) * np.exp(-dist2 / (2.0 * sigma_r**2))
    w[np.abs(dt) > 3.0 * sigma_t] = 0.0
    # offset form keeps constant runs exactly constant
    out = v + np.einsum("ij,ijk->ik", w, dv) / w.sum(axis=1)[:, None]
    return out[:, 0] if flat else out


def bilateral_filter(
    track: GazeTrack,
    sigma_t: float = constants.FILTER_SIGMA_T,
    sigma_r: float = constants.FILTER_SIGMA_R_CM,
) -> GazeTrack:
    """
    Smooth the raw estimates of a track.

    Range weights use the distance between on-screen points and are shared
    by both axes. Temporal distances are frame-index differences, so frames
    without an estimate (blinks, failures) simply contribute nothing.

    Args:
        track: Track with raw estimates
        sigma_t: Temporal scale (frames)
        sigma_r: Range scale (cm)

    Returns:
        Track with the same frames and new filtered estimates
    """
    estimates = track.estimates
    if not estimates:
        return track
    frames = np.array([p.frame_index for p in estimates], dtype=np.float64)
    raw = track.raw_array()
    filtered = bilateral_smooth(frames, raw, sigma_t, sigma_r)

    smoothed = {
        p.frame_index: GazePoint(x_cm=float(x), y_cm=float(y))
        for p, (x, y) in zip(estimates, filtered)
    }
    points = [
        p.model_copy(update={"filtered": smoothed[p.frame_index]}) if p.has_estimate else p
        for p in track.points
    ]
    return GazeTrack(points=points, warning=track.warning)
