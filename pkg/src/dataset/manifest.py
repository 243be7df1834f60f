"""Manifest CSV ingest and corpus export."""

import json
from pathlib import Path
from typing import Dict, List, Optional, Union

import pandas as pd
from pydantic import ValidationError

from src.dataset.frames import DiskFrameSource, load_frame
from src.dataset.models import (
    Corpus,
    GeometryError,
    GridIndex,
    ManifestError,
    Provenance,
    SampleRecord,
    ScreenGeometry,
)
from src.eyes.detectors import EyeDetector, load_annotations, make_detector
from src.eyes.models import BoundingBox
from src.imaging.image import write_png
from src.utils.logging import get_logger
from src.utils.seeding import canonical_json
from src.utils.settings import get_settings

logger = get_logger(__name__)

MANIFEST_COLUMNS = [
    "subject_id",
    "session_id",
    "posture",
    "glasses",
    "race",
    "frame_path",
    "grid_row",
    "grid_col",
    "timestamp_s",
]
MANIFEST_NAME = "manifest.csv"
ANNOTATIONS_NAME = "annotations.csv"
SYNTHETIC_NAME = "synthetic.json"
RICE_CORPUS = "ricetabletgaze"

_GLASSES = {"0": False, "1": True}


def _parse_row(row: Dict[str, str], geom: ScreenGeometry) -> SampleRecord:
    glasses = row["glasses"].strip()
    if glasses not in _GLASSES:
        raise ValueError(f"glasses must be 0 or 1, got {glasses!r}")
    grid = GridIndex(row=int(row["grid_row"]), col=int(row["grid_col"]))
    if grid.row >= geom.grid_rows or grid.col >= geom.grid_cols:
        label = grid.row * geom.grid_cols + grid.col
        raise ValueError(
            f"grid ({grid.row}, {grid.col}) is label {label}, outside [0, {geom.n_points - 1}]"
        )
    return SampleRecord(
        subject_id=row["subject_id"].strip(),
        session_id=row["session_id"].strip(),
        posture=row["posture"].strip().lower(),
        glasses=_GLASSES[glasses],
        race=row["race"].strip().lower(),
        frame_ref=row["frame_path"].strip(),
        grid=grid,
        timestamp_s=float(row["timestamp_s"]),
    )


def load_manifest(
    path: Union[str, Path],
    geom: Optional[ScreenGeometry] = None,
    annotations: Optional[Dict[str, List[BoundingBox]]] = None,
    detector: Optional[EyeDetector] = None,
    check_frames: bool = True,
) -> Corpus:
    """
    Load and validate a manifest CSV.

    Frame paths resolve against the manifest's directory. An ``annotations.csv``
    next to the manifest is used for eye boxes unless ``annotations`` or a
    ``detector`` is given; a ``synthetic.json`` marks a written synthetic corpus.

    Args:
        path: Manifest CSV path
        geom: Screen geometry (defaults to the standard tablet)
        annotations: Candidate boxes per frame path
        detector: Live detector used instead of annotations
        check_frames: Verify every referenced frame exists

    Returns:
        Validated Corpus

    Raises:
        ManifestError: Missing file, schema violations (with line numbers), or
            missing frames (with their paths)
    """
    manifest_path = Path(path)
    if not manifest_path.exists():
        raise ManifestError(f"manifest not found: {manifest_path}", {"path": str(manifest_path)})

    geom = geom or ScreenGeometry()
    root = manifest_path.parent
    df = pd.read_csv(manifest_path, dtype=str, keep_default_na=False, encoding="utf-8")
    missing_cols = [c for c in MANIFEST_COLUMNS if c not in df.columns]
    if missing_cols:
        raise ManifestError(
            f"{manifest_path}: missing columns {missing_cols}", {"missing": missing_cols}
        )

    records: List[SampleRecord] = []
    errors: List[str] = []
    for i, row in enumerate(df.to_dict(orient="records"), start=2):
        try:
            records.append(_parse_row(row, geom))
        except (ValueError, ValidationError) as e:
            errors.append(f"line {i}: {e}".replace("\n", " "))
    if errors:
        raise ManifestError(
            f"{manifest_path}: {len(errors)} malformed row(s); first: {errors[0]}",
            {"errors": errors},
        )

    if check_frames:
        absent = [r.frame_ref for r in records if not (root / r.frame_ref).exists()]
        if absent:
            raise ManifestError(
                f"{len(absent)} frame(s) missing, e.g. {root / absent[0]}",
                {"missing_frames": [str(root / p) for p in absent]},
            )

    if annotations is None and detector is None and (root / ANNOTATIONS_NAME).exists():
        annotations = load_annotations(root / ANNOTATIONS_NAME)

    generator = None
    provenance = Provenance.REAL
    if (root / SYNTHETIC_NAME).exists():
        generator = json.loads((root / SYNTHETIC_NAME).read_text(encoding="utf-8"))
        provenance = Provenance.SYNTHETIC

    try:
        corpus = Corpus(
            geometry=geom,
            records=records,
            provenance=provenance,
            root=root,
            source=DiskFrameSource(root, annotations, detector),
            generator=generator,
        )
    except (ValidationError, GeometryError) as e:
        raise ManifestError(f"{manifest_path}: invalid corpus: {e}") from e

    logger.info(
        "manifest_loaded",
        path=str(manifest_path),
        records=len(records),
        subjects=len(corpus.subjects),
        provenance=provenance.value,
    )
    return corpus


def load_rice_tabletgaze(
    root: Union[str, Path], detector: Optional[EyeDetector] = None
) -> Corpus:
    """
    Load a local export of the public tablet gaze dataset.

    The export is expected as ``manifest.csv`` (frames extracted from the videos,
    one row per frame) plus ``annotations.csv`` with detector boxes under ``root``.
    """
    root = Path(root)
    if not (root / MANIFEST_NAME).exists():
        raise ManifestError(
            f"no {MANIFEST_NAME} under {root}; export the dataset frames first",
            {"root": str(root)},
        )
    return load_manifest(root / MANIFEST_NAME, detector=detector)


def write_corpus(corpus: Corpus, out_dir: Union[str, Path]) -> Path:
    """
    Write frames (PNG), ``manifest.csv`` and ``annotations.csv`` under ``out_dir``.

    Synthetic corpora also get ``synthetic.json`` with the generator parameters
    and the iris map.

    Returns:
        Path of the written manifest
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    source = corpus.source

    annotation_rows = []
    for record in corpus.records:
        frame = load_frame(corpus, record)
        write_png(frame, out / record.frame_ref)
        for box in source.candidates(record, frame):
            annotation_rows.append(
                {
                    "frame_path": record.frame_ref,
                    "side": box.side.value,
                    "x": box.x,
                    "y": box.y,
                    "w": box.w,
                    "h": box.h,
                }
            )

    manifest_path = out / MANIFEST_NAME
    pd.DataFrame(corpus.manifest_rows(), columns=MANIFEST_COLUMNS).to_csv(
        manifest_path, index=False
    )
    pd.DataFrame(annotation_rows, columns=["frame_path", "side", "x", "y", "w", "h"]).to_csv(
        out / ANNOTATIONS_NAME, index=False
    )
    if corpus.generator is not None:
        (out / SYNTHETIC_NAME).write_text(
            json.dumps(json.loads(canonical_json(corpus.generator)), indent=2, sort_keys=True),
            encoding="utf-8",
        )

    logger.info("corpus_written", path=str(out), records=len(corpus.records))
    return manifest_path


def open_corpus(
    ref: Union[str, Path],
    annotations: Optional[Union[str, Path]] = None,
    detector: Optional[str] = None,
    geom: Optional[ScreenGeometry] = None,
) -> Corpus:
    """
    Load a corpus by name or path.

    ``ricetabletgaze`` resolves to ``GAZEKIT_RICE_ROOT``; a directory resolves
    to the manifest inside it.

    Args:
        ref: Corpus directory, manifest CSV, or ``ricetabletgaze``
        annotations: Sidecar CSV overriding the corpus' own annotations
        detector: Live detector spec (see ``make_detector``)
        geom: Screen geometry
    """
    eye_detector = make_detector(detector)
    if str(ref) == RICE_CORPUS:
        root = get_settings().rice_root
        if root is None:
            raise ManifestError(
                "set GAZEKIT_RICE_ROOT to a local export of the public dataset",
                {"corpus": RICE_CORPUS},
            )
        return load_rice_tabletgaze(root, detector=eye_detector)
    path = Path(ref)
    if path.is_dir():
        path = path / MANIFEST_NAME
    if not path.exists():
        raise ManifestError(f"no corpus manifest at {path}", {"corpus": str(ref)})
    boxes = load_annotations(annotations) if annotations else None
    return load_manifest(path, geom=geom, annotations=boxes, detector=eye_detector)
