"""Pixel and candidate-box access for corpus records."""

from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Protocol

from src.dataset.models import Corpus, GazePoint, ManifestError, SampleRecord
from src.eyes.crop import make_eye_pair
from src.eyes.detectors import EyeDetector, annotations_fingerprint
from src.eyes.localize import localize_eyes
from src.eyes.models import BoundingBox, CropError, DetectionFailure, DetectorError, EyePair
from src.imaging.image import GrayImage, ImageDomainError, read_png
from src.utils import constants


class FrameSource(Protocol):
    """Supplies the frame and detector candidates of a record."""

    def load(self, record: SampleRecord) -> GrayImage:
        ...

    def candidates(self, record: SampleRecord, frame: GrayImage) -> List[BoundingBox]:
        ...

    def identity(self) -> dict:
        """What decides the pixels and boxes served, beyond the manifest."""
        ...


class DiskFrameSource:
    """PNG frames under a root directory, boxes from a sidecar or a detector."""

    def __init__(
        self,
        root: Path,
        annotations: Optional[Dict[str, List[BoundingBox]]] = None,
        detector: Optional[EyeDetector] = None,
    ):
        self.root = Path(root)
        self.annotations = annotations or {}
        self.detector = detector

    def path(self, record: SampleRecord) -> Path:
        return self.root / record.frame_ref

    def load(self, record: SampleRecord) -> GrayImage:
        try:
            return read_png(self.path(record))
        except ImageDomainError as e:
            raise ManifestError(str(e), {"frame": record.frame_ref}) from e

    def candidates(self, record: SampleRecord, frame: GrayImage) -> List[BoundingBox]:
        if self.detector is not None:
            return self.detector.detect(frame, str(self.path(record)))
        return list(self.annotations.get(record.frame_ref, []))

    def identity(self) -> dict:
        if self.detector is not None:
            return {"detector": self.detector.describe()}
        return {"annotations": annotations_fingerprint(self.annotations)}


def _source(corpus: Corpus) -> FrameSource:
    if corpus.source is None:
        raise ManifestError("corpus has no frame source attached")
    return corpus.source


def source_identity(corpus: Corpus) -> Optional[dict]:
    """Identity of the attached frame source, for keys of derived-data caches."""
    if corpus.source is None:
        return None
    identity = getattr(corpus.source, "identity", None)
    return identity() if identity is not None else {"source": type(corpus.source).__name__}


def load_frame(corpus: Corpus, record: SampleRecord) -> GrayImage:
    """Pixels of a record's frame."""
    return _source(corpus).load(record)


@dataclass(frozen=True)
class Observation:
    """A record's frame after localisation; ``pair`` is None when it failed."""

    record: SampleRecord
    frame: GrayImage
    pair: Optional[EyePair]
    failure: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.pair is not None


def observe(
    corpus: Corpus,
    record: SampleRecord,
    min_box_fraction: float = constants.MIN_BOX_FRACTION,
    symmetry_tolerance: float = constants.SYMMETRY_TOLERANCE,
) -> Observation:
    """Load, localise and crop one record. Detector problems become a failed observation."""
    source = _source(corpus)
    frame = source.load(record)
    try:
        candidates = source.candidates(record, frame)
        left, right = localize_eyes(
            (frame.width, frame.height), candidates, min_box_fraction, symmetry_tolerance
        )
        pair = make_eye_pair(frame, left, right)
    except (DetectionFailure, CropError, DetectorError) as e:
        return Observation(record=record, frame=frame, pair=None, failure=e.code)
    return Observation(record=record, frame=frame, pair=pair)


@dataclass(frozen=True)
class SequenceFrame:
    """A frame of a continuous recording with its detector candidates."""

    frame: GrayImage
    candidates: List[BoundingBox]
    truth: Optional[GazePoint] = None
