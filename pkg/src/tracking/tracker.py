"""Frame-by-frame gaze tracking of a recorded session."""

from typing import List, Optional, Sequence

import numpy as np

from src.dataset.frames import SequenceFrame
from src.dataset.geometry import grid_to_screen
from src.dataset.models import Corpus, GazePoint, ManifestError
from src.eyes.blinks import detect_blinks
from src.eyes.crop import make_eye_pair
from src.eyes.localize import eye_geometry_feature, localize_eyes
from src.eyes.models import CropError, DetectionFailure, DetectorError, EyePair
from src.features.extract import extract
from src.regress.model import GazeModel, predict_gaze_batch
from src.tracking.models import GazeTrack, TrackPoint
from src.utils.config import EyesConfig
from src.utils.logging import get_logger

logger = get_logger(__name__)


def _localize(frame: SequenceFrame, eyes: EyesConfig) -> EyePair:
    left, right = localize_eyes(
        (frame.frame.width, frame.frame.height),
        frame.candidates,
        eyes.min_box_fraction,
        eyes.symmetry_tolerance,
    )
    return make_eye_pair(frame.frame, left, right)


def track(
    frames: Sequence[SequenceFrame],
    model: GazeModel,
    eyes: Optional[EyesConfig] = None,
    clamp: bool = False,
) -> GazeTrack:
    """
    Estimate the gaze in every frame of a temporally ordered session.

    Frames are localised and cropped; blinks are found on the mean intensity
    of the localised crops. Blink and failure frames are marked and carry no
    estimate. The filtered estimate starts out equal to the raw one.

    Returns:
        GazeTrack; when no frame can be localised, every point is a failure and
        the track carries a warning
    """
    eyes = eyes or EyesConfig()
    pairs: List[Optional[EyePair]] = []
    failures: List[Optional[str]] = []
    for frame in frames:
        try:
            pairs.append(_localize(frame, eyes))
            failures.append(None)
        except (DetectionFailure, CropError, DetectorError) as e:
            pairs.append(None)
            failures.append(e.code)

    ok = [i for i, pair in enumerate(pairs) if pair is not None]
    blinks = detect_blinks(
        [pairs[i].mean_intensity for i in ok],
        window=eyes.blink_window,
        skip=eyes.blink_skip,
        sigma_factor=eyes.blink_sigma_factor,
        min_rise=eyes.blink_min_rise,
    )
    blink_frames = {ok[j] for j in blinks.skipped}
    usable = [i for i in ok if i not in blink_frames]

    estimates = {}
    if usable:
        features = np.vstack(
            [extract(pairs[i], model.feature).values for i in usable]
        ).astype(np.float32).astype(np.float64)
        geometry = np.vstack(
            [eye_geometry_feature(pairs[i].left_box, pairs[i].right_box).as_array() for i in usable]
        )
        # eye-centre motion is logged for inspection, not used to correct estimates
        logger.debug(
            "eye_centre_series",
            left_x=geometry[:, 0].round(1).tolist(),
            left_y=geometry[:, 1].round(1).tolist(),
        )
        pred = predict_gaze_batch(model, features, geometry, clamp=clamp)
        estimates = {i: GazePoint(x_cm=float(x), y_cm=float(y)) for i, (x, y) in zip(usable, pred)}

    points = []
    for i, frame in enumerate(frames):
        estimate = estimates.get(i)
        points.append(
            TrackPoint(
                frame_index=i,
                raw=estimate,
                filtered=estimate,
                blink=i in blink_frames,
                failure=failures[i],
                truth=frame.truth,
            )
        )

    warning = None
    if not ok and frames:
        warning = f"eyes could not be localised in any of the {len(frames)} frames"
        logger.warning("track_empty", frames=len(frames))
    elif blinks.warning:
        warning = blinks.warning
    logger.info(
        "track_complete",
        frames=len(frames),
        estimates=len(estimates),
        blink_frames=len(blink_frames),
        failures=len(frames) - len(ok),
    )
    return GazeTrack(points=points, warning=warning)


def session_frames(corpus: Corpus, subject_id: str, session_id: str) -> List[SequenceFrame]:
    """Frames of one corpus session in timestamp order, with their true gaze points."""
    records = sorted(
        (r for r in corpus.records if (r.subject_id, r.session_id) == (subject_id, session_id)),
        key=lambda r: (r.timestamp_s, r.frame_ref),
    )
    if not records:
        raise ManifestError(f"no records for session {subject_id}/{session_id}")
    source = corpus.source
    if source is None:
        raise ManifestError("corpus has no frame source attached")
    out = []
    for record in records:
        image = source.load(record)
        out.append(
            SequenceFrame(
                frame=image,
                candidates=source.candidates(record, image),
                truth=grid_to_screen(record.grid, corpus.geometry),
            )
        )
    return out


def track_corpus_session(
    corpus: Corpus,
    subject_id: str,
    session_id: str,
    model: GazeModel,
    eyes: Optional[EyesConfig] = None,
    clamp: bool = False,
) -> GazeTrack:
    """Track one session of a corpus."""
    return track(session_frames(corpus, subject_id, session_id), model, eyes, clamp)
