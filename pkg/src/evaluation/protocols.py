"""Cross-validation protocols: LOSO, leave-one-session-out, sweeps and size studies."""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field
from scipy.stats import spearmanr

from src.dataset.models import Corpus
from src.evaluation.metrics import ErrorReport, error_report
from src.features.extract import SpecLike, as_spec
from src.features.models import Descriptor
from src.features.table import FeatureTable, build_feature_table
from src.regress.config import RegressorKind
from src.regress.model import TrainSpec, fit_gaze, predict_gaze_batch
from src.utils import constants
from src.utils.config import EyesConfig
from src.utils.errors import GazeKitError
from src.utils.logging import get_logger
from src.utils.seeding import derive_seed, fingerprint, make_rng

logger = get_logger(__name__)

Source = Union[Corpus, FeatureTable]


class ProtocolError(GazeKitError):
    """An evaluation protocol cannot run on the given data."""

    code = "protocol_error"


class FoldResult(BaseModel):
    """One train/test split of a cross-validation."""

    fold: str
    train_subjects: List[str]
    test_subjects: List[str]
    test_sessions: List[str] = Field(default_factory=list)
    train_samples: int
    test_samples: int
    mean_error_cm: float
    train_fingerprint: str
    test_fingerprint: str


@dataclass(frozen=True, eq=False)
class Fold:
    fold: str
    train: np.ndarray
    test: np.ndarray


@dataclass(frozen=True, eq=False)
class CrossValidationResult:
    """
    Per-image predictions of a cross-validation and their aggregate report.

    ``rows`` are feature-table row indices in fold order; ``predictions`` and
    ``errors`` are aligned with them.
    """

    report: ErrorReport
    folds: List[FoldResult]
    rows: np.ndarray
    predictions: np.ndarray
    errors: np.ndarray
    subjects: np.ndarray
    skipped: List[str] = field(default_factory=list)

    def folds_frame(self) -> pd.DataFrame:
        """One row per fold."""
        return pd.DataFrame([f.model_dump() for f in self.folds])

    def predictions_frame(self, table: FeatureTable) -> pd.DataFrame:
        """One row per test image."""
        truth = table.targets[self.rows]
        return pd.DataFrame(
            {
                "subject_id": self.subjects,
                "session_id": table.sessions[self.rows],
                "frame_ref": [table.frame_refs[i] for i in self.rows],
                "true_x_cm": truth[:, 0],
                "true_y_cm": truth[:, 1],
                "pred_x_cm": self.predictions[:, 0],
                "pred_y_cm": self.predictions[:, 1],
                "error_cm": self.errors,
            }
        )


def ensure_table(
    source: Source,
    feature: SpecLike,
    eyes: Optional[EyesConfig] = None,
    jobs: int = 1,
    cache_dir: Optional[str] = None,
) -> FeatureTable:
    """Use a prepared table as is, or build one from a corpus."""
    if isinstance(source, FeatureTable):
        return source
    return build_feature_table(source, feature, eyes, jobs=jobs, cache_dir=cache_dir)


def _row_fingerprint(table: FeatureTable, rows: np.ndarray) -> str:
    return fingerprint(sorted(table.frame_refs[i] for i in rows))


def run_fold(table: FeatureTable, fold: Fold, spec: TrainSpec) -> Tuple[FoldResult, np.ndarray]:
    """Train on a fold's training rows and predict its test rows."""
    if fold.train.size == 0 or fold.test.size == 0:
        raise ProtocolError(f"fold {fold.fold} has an empty train or test set")
    fold_spec = spec.model_copy(update={"seed": derive_seed(spec.seed, "fold", fold.fold)})
    model = fit_gaze(table, fold.train, fold_spec)
    pred = predict_gaze_batch(
        model, table.features[fold.test], table.eye_geometry[fold.test], clamp=spec.clamp
    )
    diff = pred - table.targets[fold.test]
    errors = np.hypot(diff[:, 0], diff[:, 1])
    result = FoldResult(
        fold=fold.fold,
        train_subjects=list(dict.fromkeys(table.subjects[fold.train].tolist())),
        test_subjects=list(dict.fromkeys(table.subjects[fold.test].tolist())),
        test_sessions=list(dict.fromkeys(table.sessions[fold.test].tolist())),
        train_samples=int(fold.train.size),
        test_samples=int(fold.test.size),
        mean_error_cm=float(errors.mean()),
        train_fingerprint=_row_fingerprint(table, fold.train),
        test_fingerprint=_row_fingerprint(table, fold.test),
    )
    logger.info(
        "fold_complete",
        fold=fold.fold,
        train_samples=result.train_samples,
        test_samples=result.test_samples,
        mean_error_cm=round(result.mean_error_cm, 4),
    )
    return result, pred


def run_folds(
    table: FeatureTable,
    folds: Sequence[Fold],
    spec: TrainSpec,
    jobs: int = 1,
    skipped: Iterable[str] = (),
    distances: Sequence[float] = constants.VIEWING_DISTANCES_CM,
) -> CrossValidationResult:
    """
    Train and test every fold, then aggregate per-image errors.

    Folds run concurrently on up to ``jobs`` threads; results are assembled in
    fold order so the output does not depend on scheduling.
    """
    with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool:
        outcomes = list(pool.map(lambda f: run_fold(table, f, spec), folds))
    return aggregate_folds(table, folds, outcomes, spec, skipped, distances)


def aggregate_folds(
    table: FeatureTable,
    folds: Sequence[Fold],
    outcomes: Sequence[Tuple[FoldResult, np.ndarray]],
    spec: TrainSpec,
    skipped: Iterable[str] = (),
    distances: Sequence[float] = constants.VIEWING_DISTANCES_CM,
) -> CrossValidationResult:
    """Per-image errors of finished folds, aggregated over images."""
    rows = np.concatenate([f.test for f in folds])
    predictions = np.vstack([pred for _, pred in outcomes])
    truth = table.targets[rows]
    subjects = table.subjects[rows]
    report = error_report(
        predictions,
        truth,
        subjects,
        distances=distances,
        config_fingerprint=fingerprint({"table": table.fingerprint, "spec": spec.fingerprint()}),
        seed=spec.seed,
    )
    diff = predictions - truth
    return CrossValidationResult(
        report=report,
        folds=[result for result, _ in outcomes],
        rows=rows,
        predictions=predictions,
        errors=np.hypot(diff[:, 0], diff[:, 1]),
        subjects=subjects,
        skipped=list(skipped),
    )


def loso_folds(table: FeatureTable, subjects: Optional[Sequence[str]] = None) -> List[Fold]:
    """One fold per subject: train on the others, test on that subject."""
    group = list(subjects) if subjects is not None else table.subject_ids()
    return [
        Fold(
            fold=s,
            train=table.rows(subjects=[o for o in group if o != s]),
            test=table.rows(subjects=[s]),
        )
        for s in group
    ]


def loso_folds_within(table: FeatureTable, rows: np.ndarray) -> List[Fold]:
    """LOSO folds restricted to a subset of table rows."""
    rows = np.asarray(rows, dtype=np.int64)
    subjects = table.subjects[rows]
    return [
        Fold(fold=s, train=rows[subjects != s], test=rows[subjects == s])
        for s in dict.fromkeys(subjects.tolist())
    ]


def loso_cv(
    source: Source,
    spec: Optional[TrainSpec] = None,
    subjects: Optional[Sequence[str]] = None,
    eyes: Optional[EyesConfig] = None,
    jobs: int = 1,
    cache_dir: Optional[str] = None,
) -> CrossValidationResult:
    """
    Person-independent leave-one-subject-out cross-validation.

    Args:
        source: Corpus, or a feature table already built for ``spec.feature``
        spec: Descriptor, regressor and seed
        subjects: Restrict the evaluation to these subjects

    Raises:
        ProtocolError: With fewer than two subjects
    """
    spec = spec or TrainSpec()
    table = ensure_table(source, spec.feature, eyes, jobs, cache_dir)
    present = table.subject_ids()
    group = [s for s in present if subjects is None or s in set(subjects)]
    if len(group) < 2:
        raise ProtocolError(
            f"leave-one-subject-out needs at least 2 subjects, got {len(group)}",
            {"subjects": group},
        )
    logger.info(
        "loso_started",
        subjects=len(group),
        descriptor=table.spec.descriptor.value,
        regressor=spec.regressor.value,
    )
    return run_folds(table, loso_folds(table, group), spec, jobs)


def loso_session_cv(
    source: Source,
    spec: Optional[TrainSpec] = None,
    eyes: Optional[EyesConfig] = None,
    jobs: int = 1,
    cache_dir: Optional[str] = None,
) -> CrossValidationResult:
    """
    Person-dependent leave-one-session-out cross-validation.

    Each subject is evaluated on its own data, holding out one session per fold.
    Subjects with a single session are skipped with a warning.

    Raises:
        ProtocolError: If no subject has two sessions
    """
    spec = spec or TrainSpec()
    table = ensure_table(source, spec.feature, eyes, jobs, cache_dir)
    folds, skipped = loso_session_folds(table)
    return run_folds(table, folds, spec, jobs, skipped=skipped)


def loso_session_folds(table: FeatureTable) -> Tuple[List[Fold], List[str]]:
    """
    One fold per (subject, session), training on that subject's other sessions.

    Returns:
        Folds and the subjects skipped for having a single session

    Raises:
        ProtocolError: If no subject has two sessions
    """
    folds: List[Fold] = []
    skipped: List[str] = []
    for subject in table.subject_ids():
        rows = table.rows(subjects=[subject])
        sessions = list(dict.fromkeys(table.sessions[rows].tolist()))
        if len(sessions) < 2:
            logger.warning("subject_skipped_single_session", subject=subject)
            skipped.append(subject)
            continue
        for session in sessions:
            folds.append(
                Fold(
                    fold=f"{subject}/{session}",
                    train=table.rows(
                        sessions=[(subject, s) for s in sessions if s != session]
                    ),
                    test=table.rows(sessions=[(subject, session)]),
                )
            )
    if not folds:
        raise ProtocolError("no subject has two or more sessions", {"skipped": skipped})
    return folds, skipped


@dataclass(frozen=True, eq=False)
class SweepResult:
    """Mean errors of every descriptor x regressor cell."""

    table: pd.DataFrame
    results: Dict[Tuple[str, str], CrossValidationResult]


def sweep(
    corpus: Corpus,
    descriptors: Sequence[SpecLike] = tuple(Descriptor),
    regressors: Sequence[RegressorKind] = (RegressorKind.KNN, RegressorKind.RF),
    spec: Optional[TrainSpec] = None,
    eyes: Optional[EyesConfig] = None,
    jobs: int = 1,
    cache_dir: Optional[str] = None,
) -> SweepResult:
    """
    LOSO mean error for every descriptor and regressor.

    Returns:
        SweepResult whose table has regressors as rows and descriptors as columns
    """
    spec = spec or TrainSpec()
    cells: Dict[Tuple[str, str], CrossValidationResult] = {}
    columns = []
    for descriptor in descriptors:
        feature = as_spec(descriptor)
        columns.append(feature.descriptor.value)
        table = build_feature_table(corpus, feature, eyes, jobs=jobs, cache_dir=cache_dir)
        for kind in regressors:
            kind = RegressorKind(kind)
            cell_spec = spec.model_copy(update={"feature": feature, "regressor": kind})
            cells[(kind.value, feature.descriptor.value)] = loso_cv(table, cell_spec, jobs=jobs)

    index = [RegressorKind(k).value for k in regressors]
    frame = pd.DataFrame(
        [[cells[(r, d)].report.mean_error_cm for d in columns] for r in index],
        index=pd.Index(index, name="regressor"),
        columns=pd.Index(columns, name="descriptor"),
    )
    return SweepResult(table=frame, results=cells)


class SizePoint(BaseModel):
    """Mean error at one training-group size."""

    k: int
    mean_error_cm: float
    repeat_errors_cm: List[float]
    groups: List[List[str]]


class SizeStudyResult(BaseModel):
    """Error as a function of the number of subjects."""

    points: List[SizePoint]
    spearman_rho: Optional[float] = None
    seed: int = 0

    def frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "k": [p.k for p in self.points],
                "mean_error_cm": [p.mean_error_cm for p in self.points],
            }
        )


def size_study(
    source: Source,
    sizes: Sequence[int],
    repeats: int = constants.PROTOCOL_REPEATS,
    spec: Optional[TrainSpec] = None,
    eyes: Optional[EyesConfig] = None,
    jobs: int = 1,
    cache_dir: Optional[str] = None,
) -> SizeStudyResult:
    """
    LOSO error for groups of K randomly chosen subjects, averaged over repeats.

    Group draws are seeded from ``spec.seed``, K and the repeat index. When K
    equals the subject count the study runs plain LOSO once.

    Raises:
        ProtocolError: If a size is below 2 or above the subject count
    """
    spec = spec or TrainSpec()
    if repeats < 1:
        raise ProtocolError(f"repeats must be at least 1, got {repeats}")
    table = ensure_table(source, spec.feature, eyes, jobs, cache_dir)
    subjects = table.subject_ids()
    for k in sizes:
        if k < 2:
            raise ProtocolError(f"group size must be at least 2, got {k}", {"k": k})
        if k > len(subjects):
            raise ProtocolError(
                f"group size {k} exceeds the {len(subjects)} available subjects", {"k": k}
            )

    points = []
    for k in sorted(set(sizes)):
        draws = 1 if k == len(subjects) else repeats
        errors, groups = [], []
        for r in range(draws):
            if k == len(subjects):
                group = list(subjects)
            else:
                picked = set(make_rng(spec.seed, "size", k, r).choice(subjects, k, replace=False))
                group = [s for s in subjects if s in picked]
            errors.append(loso_cv(table, spec, subjects=group, jobs=jobs).report.mean_error_cm)
            groups.append(group)
        point = SizePoint(
            k=k, mean_error_cm=float(np.mean(errors)), repeat_errors_cm=errors, groups=groups
        )
        logger.info("size_point", k=k, mean_error_cm=round(point.mean_error_cm, 4), repeats=draws)
        points.append(point)

    rho = None
    if len(points) >= 2:
        rho = float(spearmanr([p.k for p in points], [p.mean_error_cm for p in points])[0])
    return SizeStudyResult(points=points, spearman_rho=rho, seed=spec.seed)
