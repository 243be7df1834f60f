"""Sources of eye-box candidates: annotation sidecars, detector subprocesses, OpenCV cascades."""

import shlex
import subprocess
from pathlib import Path
from typing import Dict, List, Optional, Protocol, Sequence, Union

import cv2
import numpy as np
import pandas as pd
from pydantic import ValidationError

from src.eyes.models import BoundingBox, DetectorError, Side
from src.imaging.image import GrayImage
from src.utils.logging import get_logger
from src.utils.seeding import fingerprint

logger = get_logger(__name__)

ANNOTATION_COLUMNS = ["frame_path", "side", "x", "y", "w", "h"]


class EyeDetector(Protocol):
    """Anything that proposes side-tagged eye boxes for a frame."""

    def detect(self, frame: GrayImage, frame_path: Optional[str] = None) -> List[BoundingBox]:
        ...

    def describe(self) -> str:
        """Stable text naming the detector and its settings."""
        ...


def parse_box(side: str, x: object, y: object, w: object, h: object) -> BoundingBox:
    """Build a box from the five text fields shared by sidecars and detectors."""
    return BoundingBox(
        side=Side(str(side).strip().lower()),
        x=int(x),
        y=int(y),
        w=int(w),
        h=int(h),
    )


def load_annotations(path: Union[str, Path]) -> Dict[str, List[BoundingBox]]:
    """
    Load an annotation sidecar CSV (``frame_path,side,x,y,w,h``).

    Returns:
        Mapping of frame path to candidate boxes, file order kept

    Raises:
        DetectorError: If the file is missing or a row is malformed
    """
    csv_path = Path(path)
    if not csv_path.exists():
        raise DetectorError(f"annotation file not found: {csv_path}", {"path": str(csv_path)})

    df = pd.read_csv(csv_path, dtype=str, keep_default_na=False)
    missing = [c for c in ANNOTATION_COLUMNS if c not in df.columns]
    if missing:
        raise DetectorError(f"{csv_path}: missing columns {missing}", {"missing": missing})

    boxes: Dict[str, List[BoundingBox]] = {}
    for i, row in enumerate(df.itertuples(index=False), start=2):
        try:
            box = parse_box(row.side, row.x, row.y, row.w, row.h)
        except (ValueError, ValidationError) as e:
            raise DetectorError(
                f"{csv_path}:{i}: malformed annotation row", {"line": i, "error": str(e)}
            ) from e
        boxes.setdefault(row.frame_path, []).append(box)

    logger.info("annotations_loaded", path=str(csv_path), frames=len(boxes))
    return boxes


def annotations_fingerprint(annotations: Dict[str, List[BoundingBox]]) -> str:
    """Content hash of candidate boxes per frame path."""
    return fingerprint(
        {
            path: [box.model_dump(mode="json") for box in boxes]
            for path, boxes in annotations.items()
        }
    )


class AnnotationDetector:
    """Serves boxes from a loaded sidecar."""

    def __init__(self, annotations: Dict[str, List[BoundingBox]]):
        self.annotations = annotations

    def detect(self, frame: GrayImage, frame_path: Optional[str] = None) -> List[BoundingBox]:
        if frame_path is None:
            raise DetectorError("annotation lookup needs the frame path")
        return list(self.annotations.get(frame_path, []))

    def describe(self) -> str:
        return f"annotations:{annotations_fingerprint(self.annotations)[:16]}"


class SubprocessDetector:
    """
    Runs an external detector once per frame.

    The command receives the frame path as its last argument and prints one
    ``side,x,y,w,h`` line per detection on stdout.
    """

    def __init__(self, command: Union[str, Sequence[str]], timeout: float = 30.0):
        self.command = shlex.split(command) if isinstance(command, str) else list(command)
        self.timeout = timeout

    def describe(self) -> str:
        return f"cmd:{shlex.join(self.command)}"

    def detect(self, frame: GrayImage, frame_path: Optional[str] = None) -> List[BoundingBox]:
        if frame_path is None:
            raise DetectorError("subprocess detector needs the frame path")
        try:
            result = subprocess.run(
                self.command + [frame_path],
                capture_output=True,
                text=True,
                timeout=self.timeout,
                check=False,
            )
        except (OSError, subprocess.TimeoutExpired) as e:
            raise DetectorError(f"detector failed to run: {e}", {"frame": frame_path}) from e

        if result.returncode != 0:
            raise DetectorError(
                f"detector exited with {result.returncode}",
                {"frame": frame_path, "stderr": result.stderr.strip()[-500:]},
            )
        return self.parse_output(result.stdout, frame_path)

    @staticmethod
    def parse_output(stdout: str, frame_path: str = "") -> List[BoundingBox]:
        boxes = []
        for lineno, line in enumerate(stdout.splitlines(), start=1):
            line = line.strip()
            if not line:
                continue
            fields = [f.strip() for f in line.split(",")]
            if len(fields) != 5:
                raise DetectorError(
                    f"detector line {lineno}: expected 5 fields, got {len(fields)}",
                    {"frame": frame_path, "line": line},
                )
            try:
                boxes.append(parse_box(*fields))
            except (ValueError, ValidationError) as e:
                raise DetectorError(
                    f"detector line {lineno}: {e}", {"frame": frame_path, "line": line}
                ) from e
        return boxes


class HaarCascadeDetector:
    """OpenCV's pretrained per-eye Haar cascades."""

    CASCADES = {
        Side.LEFT: "haarcascade_lefteye_2splits.xml",
        Side.RIGHT: "haarcascade_righteye_2splits.xml",
    }

    def __init__(self, scale_factor: float = 1.1, min_neighbors: int = 5):
        self.scale_factor = scale_factor
        self.min_neighbors = min_neighbors
        self.classifiers = {}
        for side, name in self.CASCADES.items():
            classifier = cv2.CascadeClassifier(str(Path(cv2.data.haarcascades) / name))
            if classifier.empty():
                raise DetectorError(f"cannot load cascade {name}")
            self.classifiers[side] = classifier

    def describe(self) -> str:
        return f"haar:scale={self.scale_factor}:neighbors={self.min_neighbors}"

    def detect(self, frame: GrayImage, frame_path: Optional[str] = None) -> List[BoundingBox]:
        data = np.round(frame.pixels * 255.0).astype(np.uint8)
        boxes = []
        for side, classifier in self.classifiers.items():
            found = classifier.detectMultiScale(
                data, scaleFactor=self.scale_factor, minNeighbors=self.min_neighbors
            )
            for x, y, w, h in np.asarray(found).reshape(-1, 4):
                boxes.append(BoundingBox(x=int(x), y=int(y), w=int(w), h=int(h), side=side))
        return boxes


def make_detector(spec: Optional[str]) -> Optional[EyeDetector]:
    """
    Detector from a CLI spec: ``haar`` or ``cmd:<command line>``.

    Returns None when no spec is given (annotations are used instead).
    """
    if not spec:
        return None
    if spec == "haar":
        return HaarCascadeDetector()
    if spec.startswith("cmd:"):
        return SubprocessDetector(spec[4:])
    raise DetectorError(f"unknown detector spec {spec!r}; use 'haar' or 'cmd:<command>'")
