"""Feature tables: one descriptor extracted for every usable frame of a corpus."""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, Field

from src.dataset.frames import observe, source_identity
from src.dataset.geometry import grid_points, label_id
from src.dataset.models import Corpus, SampleRecord, ScreenGeometry
from src.eyes.blinks import detect_blinks
from src.eyes.localize import eye_geometry_feature
from src.features.dump import read_dump, write_dump
from src.features.extract import SpecLike, as_spec, extract
from src.features.models import FeatureError, FeatureSpec
from src.utils.config import EyesConfig
from src.utils.logging import get_logger
from src.utils.seeding import fingerprint

logger = get_logger(__name__)


class SubjectExclusions(BaseModel):
    """Frame accounting for one subject."""

    subject_id: str
    frames: int = 0
    detector_failures: int = 0
    blink_frames: int = 0
    usable: int = 0
    excluded: bool = Field(False, description="No usable frame; subject left out of the table")


class ExclusionReport(BaseModel):
    """Why frames (and possibly whole subjects) are missing from a table."""

    subjects: List[SubjectExclusions] = Field(default_factory=list)

    @property
    def excluded_subjects(self) -> List[str]:
        return [s.subject_id for s in self.subjects if s.excluded]

    @property
    def detector_failures(self) -> int:
        return sum(s.detector_failures for s in self.subjects)

    @property
    def blink_frames(self) -> int:
        return sum(s.blink_frames for s in self.subjects)


@dataclass(frozen=True, eq=False)
class FeatureTable:
    """
    Row-aligned features and labels for the usable frames of a corpus.

    Rows follow the corpus session order, and within a session the temporal
    order of the frames.
    """

    spec: FeatureSpec
    geometry: ScreenGeometry
    corpus_fingerprint: str
    features: np.ndarray
    eye_geometry: np.ndarray
    labels: np.ndarray
    subjects: np.ndarray
    sessions: np.ndarray
    frame_refs: List[str]
    layout: Dict[str, Tuple[int, int]] = field(default_factory=dict)
    exclusions: ExclusionReport = field(default_factory=ExclusionReport)

    def __len__(self) -> int:
        return int(self.features.shape[0])

    @property
    def dim(self) -> int:
        return int(self.features.shape[1])

    @property
    def targets(self) -> np.ndarray:
        """Screen positions (cm) of the row labels, n x 2."""
        lut = np.array([p.as_tuple() for _, p in grid_points(self.geometry)])
        return lut[self.labels]

    @property
    def fingerprint(self) -> str:
        return fingerprint(
            {"corpus": self.corpus_fingerprint, "spec": self.spec.model_dump(mode="json")}
        )

    def subject_ids(self) -> List[str]:
        """Subjects present in the table, in row order."""
        return list(dict.fromkeys(self.subjects.tolist()))

    def rows(
        self,
        subjects: Optional[Iterable[str]] = None,
        exclude_subjects: Iterable[str] = (),
        sessions: Optional[Iterable[Tuple[str, str]]] = None,
        exclude_sessions: Iterable[Tuple[str, str]] = (),
    ) -> np.ndarray:
        """Row indices matching subject and (subject, session) filters."""
        mask = np.ones(len(self), dtype=bool)
        if subjects is not None:
            mask &= np.isin(self.subjects, list(subjects))
        mask &= ~np.isin(self.subjects, list(exclude_subjects))
        pairs = [f"{s}\x1f{t}" for s, t in zip(self.subjects, self.sessions)]
        keys = np.asarray(pairs, dtype=object)
        if sessions is not None:
            mask &= np.isin(keys, [f"{s}\x1f{t}" for s, t in sessions])
        excluded = [f"{s}\x1f{t}" for s, t in exclude_sessions]
        if excluded:
            mask &= ~np.isin(keys, excluded)
        return np.flatnonzero(mask)


@dataclass
class _SessionRows:
    subject_id: str
    records: List[SampleRecord]
    features: List[np.ndarray]
    geometry: List[np.ndarray]
    layout: Dict[str, Tuple[int, int]]
    frames: int
    detector_failures: int
    blink_frames: int


def _session_rows(
    corpus: Corpus, records: List[SampleRecord], spec: FeatureSpec, eyes: EyesConfig
) -> _SessionRows:
    observations = [
        observe(corpus, r, eyes.min_box_fraction, eyes.symmetry_tolerance) for r in records
    ]
    ok = [o for o in observations if o.ok]
    blinks = detect_blinks(
        [o.pair.mean_intensity for o in ok],
        window=eyes.blink_window,
        skip=eyes.blink_skip,
        sigma_factor=eyes.blink_sigma_factor,
        min_rise=eyes.blink_min_rise,
    )
    kept = [o for i, o in enumerate(ok) if i not in blinks.skipped]

    out = _SessionRows(
        subject_id=records[0].subject_id,
        records=[],
        features=[],
        geometry=[],
        layout={},
        frames=len(records),
        detector_failures=len(observations) - len(ok),
        blink_frames=len(ok) - len(kept),
    )
    for o in kept:
        vector = extract(o.pair, spec)
        out.layout = vector.layout
        out.records.append(o.record)
        out.features.append(vector.values)
        out.geometry.append(eye_geometry_feature(o.pair.left_box, o.pair.right_box).as_array())
    return out


def _group_sessions(corpus: Corpus) -> List[List[SampleRecord]]:
    grouped: Dict[Tuple[str, str], List[SampleRecord]] = {}
    for record in corpus.records:
        grouped.setdefault((record.subject_id, record.session_id), []).append(record)
    return [
        sorted(grouped[key], key=lambda r: (r.timestamp_s, r.frame_ref))
        for key in corpus.sessions()
    ]


def table_key(corpus: Corpus, spec: FeatureSpec, eyes: EyesConfig) -> str:
    """
    Cache key of a table built from this corpus and these settings.

    Covers the frame source too: annotation boxes or detector settings.
    """
    return fingerprint(
        {
            "corpus": corpus.fingerprint(),
            "frames": source_identity(corpus),
            "spec": spec.model_dump(mode="json"),
            "eyes": eyes.model_dump(mode="json"),
        }
    )


def build_feature_table(
    corpus: Corpus,
    spec: Optional[SpecLike] = None,
    eyes: Optional[EyesConfig] = None,
    jobs: int = 1,
    cache_dir: Optional[Union[str, Path]] = None,
) -> FeatureTable:
    """
    Localise, crop, drop blinks and extract one descriptor for a whole corpus.

    Blink detection runs per session on the eye-pair mean intensity of the
    localised frames in timestamp order. A subject whose frames all fail
    localisation (or are all blinks) is left out and listed in the exclusion report.

    Args:
        corpus: Labelled corpus with a frame source attached
        spec: Descriptor tag or full FeatureSpec (default mHoG)
        eyes: Localisation and blink settings
        jobs: Sessions processed concurrently
        cache_dir: Directory of cached ``.gzf`` tables keyed by content fingerprint

    Returns:
        FeatureTable with float32-rounded values

    Raises:
        FeatureError: If no frame of the corpus is usable
    """
    spec = as_spec(spec if spec is not None else FeatureSpec())
    eyes = eyes or EyesConfig()

    cache_path = None
    if cache_dir is not None:
        cache_path = Path(cache_dir) / f"{table_key(corpus, spec, eyes)[:32]}.gzf"
        if cache_path.exists():
            try:
                table = read_table(cache_path, corpus.geometry)
                logger.info("feature_table_cache_hit", path=str(cache_path), rows=len(table))
                return table
            except FeatureError as e:
                logger.warning("feature_table_cache_unreadable", path=str(cache_path), error=str(e))

    groups = _group_sessions(corpus)
    with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool:
        results = list(pool.map(lambda g: _session_rows(corpus, g, spec, eyes), groups))

    per_subject: Dict[str, SubjectExclusions] = {}
    for res in results:
        acc = per_subject.setdefault(res.subject_id, SubjectExclusions(subject_id=res.subject_id))
        acc.frames += res.frames
        acc.detector_failures += res.detector_failures
        acc.blink_frames += res.blink_frames
        acc.usable += len(res.records)
    for acc in per_subject.values():
        if acc.usable == 0:
            acc.excluded = True
            logger.warning(
                "subject_excluded",
                subject=acc.subject_id,
                frames=acc.frames,
                detector_failures=acc.detector_failures,
                blink_frames=acc.blink_frames,
            )
    report = ExclusionReport(subjects=list(per_subject.values()))

    records = [r for res in results for r in res.records]
    if not records:
        raise FeatureError(
            "no usable frame in the corpus",
            {"detector_failures": report.detector_failures, "blink_frames": report.blink_frames},
        )
    layout = next(res.layout for res in results if res.records)
    features = np.vstack([f for res in results for f in res.features])
    table = FeatureTable(
        spec=spec,
        geometry=corpus.geometry,
        corpus_fingerprint=corpus.fingerprint(),
        features=features.astype(np.float32).astype(np.float64),
        eye_geometry=np.vstack([g for res in results for g in res.geometry]),
        labels=np.array([label_id(r.grid, corpus.geometry) for r in records], dtype=np.int64),
        subjects=np.array([r.subject_id for r in records], dtype=object),
        sessions=np.array([r.session_id for r in records], dtype=object),
        frame_refs=[r.frame_ref for r in records],
        layout=dict(layout),
        exclusions=report,
    )
    logger.info(
        "feature_table_built",
        descriptor=spec.descriptor.value,
        rows=len(table),
        dim=table.dim,
        detector_failures=report.detector_failures,
        blink_frames=report.blink_frames,
        excluded_subjects=report.excluded_subjects,
    )
    if cache_path is not None:
        write_table(table, cache_path)
    return table


def write_table(table: FeatureTable, path: Union[str, Path]) -> Path:
    """Write a table as a feature dump with its row metadata in the header."""
    header = {
        "descriptor": table.spec.descriptor.value,
        "spec": table.spec.model_dump(mode="json"),
        "layout": {k: list(v) for k, v in table.layout.items()},
        "fingerprint": table.corpus_fingerprint,
        "keys": table.frame_refs,
        "labels": table.labels.tolist(),
        "subjects": table.subjects.tolist(),
        "sessions": table.sessions.tolist(),
        "eye_geometry": table.eye_geometry.tolist(),
        "exclusions": table.exclusions.model_dump(mode="json"),
    }
    return write_dump(path, header, table.features)


def read_table(path: Union[str, Path], geometry: Optional[ScreenGeometry] = None) -> FeatureTable:
    """
    Read a table written by :func:`write_table`.

    Raises:
        FeatureError: On a malformed dump or missing row metadata
    """
    header, values = read_dump(path)
    try:
        return FeatureTable(
            spec=FeatureSpec(**header["spec"]),
            geometry=geometry or ScreenGeometry(),
            corpus_fingerprint=header["fingerprint"],
            features=values.astype(np.float64),
            eye_geometry=np.asarray(header["eye_geometry"], dtype=np.float64).reshape(-1, 10),
            labels=np.asarray(header["labels"], dtype=np.int64),
            subjects=np.asarray(header["subjects"], dtype=object),
            sessions=np.asarray(header["sessions"], dtype=object),
            frame_refs=list(header["keys"]),
            layout={k: tuple(v) for k, v in header["layout"].items()},
            exclusions=ExclusionReport(**header["exclusions"]),
        )
    except (KeyError, TypeError, ValueError) as e:
        raise FeatureError(f"{path} is missing table metadata: {e}") from e
