"""Group-partition experiments for glasses, race and posture.

E1 trains and tests inside each group with equalised group sizes; E2 runs
LOSO on all groups together and splits the error by group; E3 combines an
equal share of subjects from every group, keeping the E1 training size, and
splits the error by group.
"""

from enum import Enum
from typing import Dict, List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from src.dataset.models import Corpus, Posture
from src.evaluation.protocols import (
    CrossValidationResult,
    ProtocolError,
    Source,
    ensure_table,
    loso_folds_within,
    run_folds,
)
from src.features.table import FeatureTable
from src.regress.model import TrainSpec
from src.utils import constants
from src.utils.config import EyesConfig
from src.utils.logging import get_logger
from src.utils.seeding import make_rng

logger = get_logger(__name__)

# A subject enters the posture study when its smallest posture share is at
# least this fraction of its largest one.
POSTURE_BALANCE = 0.8


class Factor(str, Enum):
    GLASSES = "glasses"
    RACE = "race"
    POSTURE = "posture"


class Experiment(str, Enum):
    E1 = "E1"
    E2 = "E2"
    E3 = "E3"


class ExperimentSpec(BaseModel):
    """Which factor to study and how often to redraw random subsets."""

    factor: Factor
    experiment: Optional[Experiment] = Field(None, description="Run only this experiment")
    repeats: int = Field(constants.PROTOCOL_REPEATS, ge=1)
    seed: int = 0

    model_config = ConfigDict(frozen=True)

    def runs(self, experiment: Experiment) -> bool:
        return self.experiment is None or self.experiment == experiment


class GroupResult(BaseModel):
    """Errors of one group across the experiments."""

    name: str
    subjects: List[str]
    samples: int
    e1_mean_error_cm: Optional[float] = None
    e1_subjects_used: Optional[int] = None
    e1_repeat_errors_cm: List[float] = Field(default_factory=list)
    e2_mean_error_cm: Optional[float] = None
    e2_samples: int = 0
    e3_mean_error_cm: Optional[float] = None
    e3_repeat_errors_cm: List[float] = Field(default_factory=list)


class PartitionResult(BaseModel):
    """Per-group errors of a partition study."""

    factor: Factor
    groups: List[GroupResult]
    equalized_size: int
    skipped: List[str] = Field(default_factory=list)
    repeats: int
    seed: int

    def group(self, name: str) -> GroupResult:
        for g in self.groups:
            if g.name == name:
                return g
        raise KeyError(name)


def subject_groups(corpus: Corpus, table: FeatureTable, factor: Factor) -> Dict[str, List[str]]:
    """Subjects of the table grouped by glasses or race."""
    groups: Dict[str, List[str]] = {}
    for subject in table.subject_ids():
        meta = corpus.subject_meta(subject)
        if factor == Factor.GLASSES:
            name = "glasses" if meta.glasses else "no_glasses"
        else:
            name = meta.race.value
        groups.setdefault(name, []).append(subject)
    return dict(sorted(groups.items()))


def session_postures(corpus: Corpus) -> Dict[tuple, str]:
    """(subject, session) -> posture."""
    return {(r.subject_id, r.session_id): r.posture.value for r in corpus.records}


def balanced_posture_subjects(table: FeatureTable, postures: Dict[tuple, str]) -> List[str]:
    """Subjects with usable data in every posture and roughly equal amounts of it."""
    keep = []
    for subject in table.subject_ids():
        rows = table.rows(subjects=[subject])
        counts = {p.value: 0 for p in Posture}
        for session in table.sessions[rows]:
            counts[postures[(subject, session)]] += 1
        if min(counts.values()) > 0 and min(counts.values()) >= POSTURE_BALANCE * max(
            counts.values()
        ):
            keep.append(subject)
    return keep


class _Groups:
    """Row membership of every group."""

    def __init__(self, table: FeatureTable, names: List[str], members: Dict[str, np.ndarray]):
        self.table = table
        self.names = names
        self.members = members

    def subjects(self, name: str) -> List[str]:
        return list(dict.fromkeys(self.table.subjects[self.members[name]].tolist()))

    def rows(self, name: str, subjects: List[str]) -> np.ndarray:
        rows = self.members[name]
        return rows[np.isin(self.table.subjects[rows], subjects)]


def _build_groups(corpus: Corpus, table: FeatureTable, factor: Factor) -> _Groups:
    if factor == Factor.POSTURE:
        postures = session_postures(corpus)
        subjects = balanced_posture_subjects(table, postures)
        row_posture = np.array(
            [postures[(s, t)] for s, t in zip(table.subjects, table.sessions)], dtype=object
        )
        eligible = np.isin(table.subjects, subjects)
        names = [p.value for p in Posture]
        members = {p: np.flatnonzero(eligible & (row_posture == p)) for p in names}
        return _Groups(table, names, members)
    by_subject = subject_groups(corpus, table, factor)
    members = {name: table.rows(subjects=subs) for name, subs in by_subject.items()}
    return _Groups(table, list(by_subject), members)


def _mean_by_group(cv: CrossValidationResult, groups: _Groups) -> Dict[str, np.ndarray]:
    out = {}
    for name in groups.names:
        mask = np.isin(cv.rows, groups.members[name])
        out[name] = cv.errors[mask]
    return out


def partition_experiments(
    corpus: Corpus,
    experiment: ExperimentSpec,
    spec: Optional[TrainSpec] = None,
    source: Optional[Source] = None,
    eyes: Optional[EyesConfig] = None,
    jobs: int = 1,
    cache_dir: Optional[str] = None,
) -> PartitionResult:
    """
    Run the E1/E2/E3 partition design for one factor.

    Glasses and race split subjects into groups; posture splits every subject's
    sessions into four groups, using only subjects with balanced posture data.
    Groups with fewer than two subjects are skipped with a report. Random subsets
    are drawn from the experiment seed, the experiment and the repeat index.

    Args:
        corpus: Corpus supplying subject and session metadata
        experiment: Factor, experiment selection, repeats and seed
        spec: Descriptor and regressor used in every fold
        source: Prepared feature table of ``corpus`` (built when omitted)

    Raises:
        ProtocolError: When fewer than two groups can be evaluated
    """
    spec = spec or TrainSpec()
    data = source if source is not None else corpus
    table = ensure_table(data, spec.feature, eyes, jobs, cache_dir)
    groups = _build_groups(corpus, table, experiment.factor)

    skipped = []
    for name in list(groups.names):
        if len(groups.subjects(name)) < 2:
            logger.warning("partition_group_skipped", factor=experiment.factor.value, group=name)
            skipped.append(name)
    active = [n for n in groups.names if n not in skipped]
    if len(active) < 2:
        raise ProtocolError(
            f"partition by {experiment.factor.value} needs two groups with 2+ subjects",
            {"groups": {n: groups.subjects(n) for n in groups.names}},
        )
    n_equal = min(len(groups.subjects(n)) for n in active)

    results = {
        n: GroupResult(
            name=n, subjects=groups.subjects(n), samples=int(groups.members[n].size)
        )
        for n in groups.names
    }

    if experiment.runs(Experiment.E1):
        for name in active:
            subjects = groups.subjects(name)
            draws = 1 if len(subjects) == n_equal else experiment.repeats
            errors = []
            for r in range(draws):
                chosen = subjects
                if len(subjects) > n_equal:
                    rng = make_rng(experiment.seed, "partition", "E1", name, r)
                    picked = set(rng.choice(subjects, n_equal, replace=False))
                    chosen = [s for s in subjects if s in picked]
                rows = groups.rows(name, chosen)
                cv = run_folds(table, loso_folds_within(table, rows), spec, jobs)
                errors.append(cv.report.mean_error_cm)
            results[name].e1_repeat_errors_cm = errors
            results[name].e1_mean_error_cm = float(np.mean(errors))
            results[name].e1_subjects_used = n_equal

    if experiment.runs(Experiment.E2):
        all_rows = np.sort(np.concatenate([groups.members[n] for n in groups.names]))
        cv = run_folds(table, loso_folds_within(table, all_rows), spec, jobs)
        for name, errs in _mean_by_group(cv, groups).items():
            results[name].e2_samples = int(errs.size)
            results[name].e2_mean_error_cm = float(errs.mean()) if errs.size else None

    if experiment.runs(Experiment.E3):
        share = max(1, n_equal // len(active))
        collected: Dict[str, List[float]] = {n: [] for n in active}
        for r in range(experiment.repeats):
            rng = make_rng(experiment.seed, "partition", "E3", r)
            parts = []
            if experiment.factor == Factor.POSTURE:
                # groups share subjects: give each posture a disjoint slice of them
                order = list(rng.permutation(groups.subjects(active[0])))
                for i, name in enumerate(active):
                    parts.append(groups.rows(name, order[i * share : (i + 1) * share]))
            else:
                for name in active:
                    picked = list(rng.choice(groups.subjects(name), share, replace=False))
                    parts.append(groups.rows(name, picked))
            rows = np.sort(np.concatenate(parts))
            if len(set(table.subjects[rows].tolist())) < 2:
                skipped.append("E3")
                logger.warning("partition_e3_skipped", reason="fewer than 2 subjects combined")
                break
            cv = run_folds(table, loso_folds_within(table, rows), spec, jobs)
            for name, errs in _mean_by_group(cv, groups).items():
                if name in collected and errs.size:
                    collected[name].append(float(errs.mean()))
        for name, errors in collected.items():
            if errors:
                results[name].e3_repeat_errors_cm = errors
                results[name].e3_mean_error_cm = float(np.mean(errors))

    logger.info(
        "partition_complete",
        factor=experiment.factor.value,
        groups=active,
        equalized_size=n_equal,
        skipped=skipped,
    )
    return PartitionResult(
        factor=experiment.factor,
        groups=[results[n] for n in groups.names],
        equalized_size=n_equal,
        skipped=skipped,
        repeats=experiment.repeats,
        seed=experiment.seed,
    )
