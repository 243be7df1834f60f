"""
Deterministic synthetic gaze corpus.

Each subject gets nuisance parameters (brightness, eye aspect, iris bias, skin
texture); each session gets a posture, a face placement and a shuffled dot
order. Eye appearance is rendered in box-normalised coordinates (100 x 100 per
box, pupil line at row 67), so the canonical crop sees the iris at

    u = 50 + gain_x * (x_cm - cx) + bias_u
    v = 67 + gain_y * (y_cm - cy) + bias_v

where (cx, cy) is the screen centre. The map is affine in the gaze point and
is stored with the corpus for oracle checks.
"""

from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, Field
from scipy import ndimage

from src.dataset.frames import SequenceFrame
from src.dataset.geometry import grid_from_label, grid_to_screen
from src.dataset.models import (
    Corpus,
    GazePoint,
    Posture,
    Provenance,
    Race,
    SampleRecord,
    ScreenGeometry,
)
from src.eyes.models import BoundingBox, Side
from src.imaging.image import GrayImage
from src.utils import constants
from src.utils.logging import get_logger
from src.utils.seeding import make_rng

logger = get_logger(__name__)

FRAME_HEIGHT = 240
FRAME_WIDTH = 320
EYE_GAP = 20

POSTURES = [Posture.SITTING, Posture.STANDING, Posture.SLOUCHING, Posture.LYING]
RACES = [Race.CAUCASIAN, Race.ASIAN, Race.OTHER]
POSTURE_BOX = {
    Posture.STANDING: (68, -6),
    Posture.SITTING: (76, 0),
    Posture.SLOUCHING: (72, 6),
    Posture.LYING: (80, 12),
}
RACE_BRIGHTNESS = {Race.CAUCASIAN: 1.08, Race.ASIAN: 1.0, Race.OTHER: 0.9}

# Eye model, box-normalised units
SCLERA_A = 40.0
SCLERA_B = 11.0
IRIS_RADIUS = 8.0
PUPIL_RADIUS = 3.5
EDGE_SOFTNESS = 1.5
SKIN = 0.72
SCLERA = 0.80
IRIS = 0.18
PUPIL = 0.05
LID = 0.88
TEXTURE_AMPLITUDE = 0.04
FRAME_NOISE = 0.015
FIXATION_JITTER = 0.4
BIAS_SD = 0.6


class SyntheticParams(BaseModel):
    """Generator arguments; stored with the corpus."""

    n_subjects: int = Field(..., ge=2)
    sessions_per_subject: int = Field(1, ge=1)
    frames_per_point: int = Field(3, ge=1)
    seed: int = 0
    glare: float = Field(0.0, ge=0, description="Pixel noise on subjects with glasses")
    gain_x: float = Field(1.75, description="Iris shift per cm of horizontal gaze (norm px)")
    gain_y: float = Field(0.95, description="Iris shift per cm of vertical gaze (norm px)")


@dataclass(frozen=True)
class SubjectParams:
    subject_id: str
    race: Race
    glasses: bool
    brightness: float
    aspect: float
    bias_u: float
    bias_v: float
    texture: np.ndarray


@dataclass(frozen=True)
class SessionParams:
    subject_id: str
    session_id: str
    posture: Posture
    order: Tuple[int, ...]
    left_box: BoundingBox
    right_box: BoundingBox
    decoys: Tuple[BoundingBox, ...]

    @property
    def candidates(self) -> List[BoundingBox]:
        return [self.left_box, self.right_box, *self.decoys]


def iris_offset(
    point: GazePoint,
    geom: ScreenGeometry,
    gain_x: float = 1.75,
    gain_y: float = 0.95,
    bias: Tuple[float, float] = (0.0, 0.0),
) -> Tuple[float, float]:
    """Iris displacement from the crop centre (norm px) for a gaze point."""
    center = geom.center
    return (
        gain_x * (point.x_cm - center.x_cm) + bias[0],
        gain_y * (point.y_cm - center.y_cm) + bias[1],
    )


def _soft(signed_distance: np.ndarray) -> np.ndarray:
    return np.clip(0.5 - signed_distance / EDGE_SOFTNESS, 0.0, 1.0)


def _eye_patch(
    u: np.ndarray,
    v: np.ndarray,
    iris_uv: Tuple[float, float],
    subject: SubjectParams,
    closure: float,
) -> np.ndarray:
    b = subject.brightness
    semi_b = SCLERA_B * subject.aspect
    du, dv = u - 50.0, v - float(constants.PUPIL_ROW)
    ellipse = (np.sqrt((du / SCLERA_A) ** 2 + (dv / semi_b) ** 2) - 1.0) * semi_b
    sclera = _soft(ellipse)
    r = np.hypot(u - iris_uv[0], v - iris_uv[1])
    iris = _soft(r - IRIS_RADIUS)
    pupil = _soft(r - PUPIL_RADIUS)

    val = SKIN * b * (1.0 - sclera) + SCLERA * b * sclera
    val = val * (1.0 - iris) + IRIS * b * iris
    val = val * (1.0 - pupil) + PUPIL * pupil
    if closure > 0:
        lid = closure * sclera
        val = val * (1.0 - lid) + LID * b * lid
    ti = np.clip(v.astype(int), 0, 99)
    tj = np.clip(u.astype(int), 0, 99)
    return val + subject.texture[ti, tj]


class SyntheticFrameSource:
    """Renders synthetic frames on demand; nothing is kept in memory."""

    def __init__(
        self,
        params: SyntheticParams,
        geometry: ScreenGeometry,
        subjects: Dict[str, SubjectParams],
        sessions: Dict[Tuple[str, str], SessionParams],
    ):
        self.params = params
        self.geometry = geometry
        self.subjects = subjects
        self.sessions = sessions

    def render(
        self,
        subject_id: str,
        session_id: str,
        point: GazePoint,
        noise_key: str,
        closure: float = 0.0,
    ) -> GrayImage:
        """One frame of a subject looking at ``point``."""
        subject = self.subjects[subject_id]
        session = self.sessions[(subject_id, session_id)]
        rng = make_rng(self.params.seed, "frame", subject_id, session_id, noise_key)
        b = subject.brightness

        yy, xx = np.mgrid[0:FRAME_HEIGHT, 0:FRAME_WIDTH].astype(np.float64)
        eye_cy = session.left_box.cy
        face = (((xx - FRAME_WIDTH / 2) / 125.0) ** 2 + ((yy - eye_cy - 30) / 140.0) ** 2) <= 1.0
        img = np.where(face, SKIN * b, 0.25)

        mouth = session.decoys[-1]
        img[mouth.y + 9 : mouth.y + 15, mouth.x + 5 : mouth.x + mouth.w - 5] = 0.3 * b

        du, dv = iris_offset(
            point,
            self.geometry,
            self.params.gain_x,
            self.params.gain_y,
            (subject.bias_u, subject.bias_v),
        )
        jitter = rng.normal(0.0, FIXATION_JITTER, size=2)
        iris_uv = (50.0 + du + jitter[0], constants.PUPIL_ROW + dv + jitter[1])

        for box in (session.left_box, session.right_box):
            ys = np.arange(box.y, box.y + box.h, dtype=np.float64)
            xs = np.arange(box.x, box.x + box.w, dtype=np.float64)
            v = ((ys + 0.5 - box.y) / box.h * 100.0)[:, None] * np.ones((1, box.w))
            u = np.ones((box.h, 1)) * ((xs + 0.5 - box.x) / box.w * 100.0)[None, :]
            patch = _eye_patch(u, v, iris_uv, subject, closure)
            if subject.glasses and self.params.glare > 0:
                patch = patch + rng.normal(0.0, self.params.glare, size=patch.shape)
                for _ in range(2):
                    cy, cx = rng.uniform(0, box.h), rng.uniform(0, box.w)
                    spot = np.hypot(ys[:, None] - box.y - cy, xs[None, :] - box.x - cx) < 3.0
                    patch = np.where(spot, patch + 0.5, patch)
            img[box.y : box.y + box.h, box.x : box.x + box.w] = patch

        img = img + rng.normal(0.0, FRAME_NOISE, size=img.shape)
        return GrayImage.clipped(img)

    def load(self, record: SampleRecord) -> GrayImage:
        point = grid_to_screen(record.grid, self.geometry)
        return self.render(record.subject_id, record.session_id, point, record.frame_ref)

    def candidates(self, record: SampleRecord, frame: GrayImage) -> List[BoundingBox]:
        return self.sessions[(record.subject_id, record.session_id)].candidates

    def identity(self) -> dict:
        return {"synthetic": self.params.model_dump(mode="json")}


def _subject_params(params: SyntheticParams, index: int) -> SubjectParams:
    subject_id = f"s{index + 1:02d}"
    rng = make_rng(params.seed, "subject", subject_id)
    race = RACES[index % len(RACES)]
    field = ndimage.gaussian_filter(rng.normal(size=(100, 100)), sigma=3.0)
    field = field / (field.std() + 1e-12) * TEXTURE_AMPLITUDE
    return SubjectParams(
        subject_id=subject_id,
        race=race,
        glasses=index % 2 == 1,
        brightness=float(RACE_BRIGHTNESS[race] * rng.uniform(0.95, 1.05)),
        aspect=float(rng.uniform(0.9, 1.1)),
        bias_u=float(rng.normal(0.0, BIAS_SD)),
        bias_v=float(rng.normal(0.0, BIAS_SD)),
        texture=field,
    )


def _session_params(
    params: SyntheticParams, subject: SubjectParams, index: int, n_points: int
) -> SessionParams:
    session_id = f"{subject.subject_id}-{index + 1:02d}"
    rng = make_rng(params.seed, "session", session_id)
    posture = POSTURES[index % len(POSTURES)]
    size, shift = POSTURE_BOX[posture]
    size += int(rng.integers(-3, 4))
    y = 70 + shift + int(rng.integers(-4, 5))
    x_shift = int(rng.integers(-6, 7))
    right = BoundingBox(
        x=FRAME_WIDTH // 2 - EYE_GAP // 2 - size + x_shift, y=y, w=size, h=size, side=Side.RIGHT
    )
    left = BoundingBox(
        x=FRAME_WIDTH // 2 + EYE_GAP // 2 + x_shift, y=y, w=size, h=size, side=Side.LEFT
    )
    nostril = BoundingBox(
        x=FRAME_WIDTH // 2 - 3 + x_shift, y=y + size + 10, w=6, h=6, side=Side.RIGHT
    )
    mouth = BoundingBox(
        x=FRAME_WIDTH // 2 - 30 + x_shift, y=y + int(1.5 * size), w=60, h=24, side=Side.LEFT
    )
    order = tuple(int(i) for i in rng.permutation(n_points))
    return SessionParams(
        subject_id=subject.subject_id,
        session_id=session_id,
        posture=posture,
        order=order,
        left_box=left,
        right_box=right,
        decoys=(nostril, mouth),
    )


def synth_generate(
    n_subjects: int,
    sessions_per_subject: int = 1,
    seed: int = 0,
    geom: Optional[ScreenGeometry] = None,
    frames_per_point: int = 3,
    glare: float = 0.0,
) -> Corpus:
    """
    Generate a deterministic synthetic corpus.

    Every session shows each grid dot once, in a shuffled order, one dot every
    3 s; ``frames_per_point`` frames per dot are timestamped inside the settling
    window after the dot appears.

    Args:
        n_subjects: Number of subjects (>= 2)
        sessions_per_subject: Sessions per subject; postures cycle through all four
        seed: Master seed
        geom: Screen geometry (defaults to the standard tablet)
        frames_per_point: Frames recorded per dot
        glare: Extra pixel noise on subjects wearing glasses

    Returns:
        Corpus with a frame source that renders pixels on demand
    """
    geom = geom or ScreenGeometry()
    params = SyntheticParams(
        n_subjects=n_subjects,
        sessions_per_subject=sessions_per_subject,
        frames_per_point=frames_per_point,
        seed=seed,
        glare=glare,
    )

    subjects: Dict[str, SubjectParams] = {}
    sessions: Dict[Tuple[str, str], SessionParams] = {}
    records: List[SampleRecord] = []
    k = frames_per_point
    start_offset = constants.CHUNK_START_OFFSET_S
    span = constants.CHUNK_END_OFFSET_S - constants.CHUNK_START_OFFSET_S

    for s in range(n_subjects):
        subject = _subject_params(params, s)
        subjects[subject.subject_id] = subject
        for t in range(sessions_per_subject):
            session = _session_params(params, subject, t, geom.n_points)
            sessions[(subject.subject_id, session.session_id)] = session
            for slot, label in enumerate(session.order):
                onset = slot * constants.DOT_INTERVAL_S
                for i in range(k):
                    records.append(
                        SampleRecord(
                            subject_id=subject.subject_id,
                            session_id=session.session_id,
                            posture=session.posture,
                            glasses=subject.glasses,
                            race=subject.race,
                            frame_ref=(
                                f"frames/{subject.subject_id}/{session.session_id}/"
                                f"{slot:02d}_{label:02d}_{i:02d}.png"
                            ),
                            grid=grid_from_label(label, geom),
                            timestamp_s=round(onset + start_offset + (i + 0.5) * span / k, 6),
                        )
                    )

    generator = {
        **params.model_dump(),
        "iris_map": {
            "u": {"gain_x": params.gain_x, "center_x_cm": geom.center.x_cm, "origin": 50.0},
            "v": {
                "gain_y": params.gain_y,
                "center_y_cm": geom.center.y_cm,
                "origin": float(constants.PUPIL_ROW),
            },
            "bias": {sid: [sp.bias_u, sp.bias_v] for sid, sp in subjects.items()},
        },
    }
    source = SyntheticFrameSource(params, geom, subjects, sessions)
    corpus = Corpus(
        geometry=geom,
        records=records,
        provenance=Provenance.SYNTHETIC,
        source=source,
        generator=generator,
    )
    logger.info(
        "synthetic_corpus_generated",
        subjects=n_subjects,
        sessions=sessions_per_subject,
        records=len(records),
        seed=seed,
    )
    return corpus


def render_sequence(
    corpus: Corpus,
    subject_id: str,
    session_id: str,
    labels: Sequence[int],
    blink_starts: Sequence[int] = (),
    key: str = "sequence",
) -> List[SequenceFrame]:
    """
    Render a temporally ordered run of frames for tracking.

    Args:
        corpus: A synthetic corpus (its frame source does the rendering)
        subject_id: Subject to render
        session_id: Session supplying face placement and detector boxes
        labels: Grid label watched in each frame
        blink_starts: Frames where a 5-frame blink begins (half, full x3, half)
        key: Distinguishes the noise of different sequences

    Returns:
        Frames with their detector candidates and true gaze points
    """
    source = corpus.source
    if not isinstance(source, SyntheticFrameSource):
        raise TypeError("render_sequence needs a synthetic corpus")

    closure = np.zeros(len(labels))
    for start in blink_starts:
        for offset, c in enumerate((0.5, 1.0, 1.0, 1.0, 0.5)):
            if 0 <= start + offset < len(labels):
                closure[start + offset] = max(closure[start + offset], c)

    candidates = source.sessions[(subject_id, session_id)].candidates
    frames = []
    for i, label in enumerate(labels):
        point = grid_to_screen(grid_from_label(int(label), corpus.geometry), corpus.geometry)
        frame = source.render(subject_id, session_id, point, f"{key}:{i}", float(closure[i]))
        frames.append(SequenceFrame(frame=frame, candidates=list(candidates), truth=point))
    return frames

