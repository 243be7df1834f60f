"""Gaze evaluation flow."""

from pathlib import Path
from typing import Optional

from prefect import flow, get_run_logger, unmapped

from src.evaluation.protocols import ProtocolError, loso_folds, loso_session_folds
from src.evaluation.reports import write_cv_report
from src.features.models import Descriptor
from src.regress.config import RegressorKind
from src.regress.model import TrainSpec
from src.tasks.pipeline_tasks import aggregate_report_task, build_feature_table_task, run_fold_task
from src.utils.config import load_config


@flow(name="gaze-evaluation")
def gaze_evaluation_flow(
    corpus: str,
    descriptor: str = Descriptor.MHOG.value,
    regressor: str = RegressorKind.RF.value,
    protocol: str = "loso",
    seed: int = 0,
    out: Optional[str] = None,
    config_path: Optional[str] = None,
    jobs: int = 1,
) -> dict:
    """
    Cross-validate a descriptor and regressor, one Prefect task per fold.

    Args:
        corpus: Corpus directory, manifest CSV or ``ricetabletgaze``
        descriptor: intensity, log, lbp, hog or mhog
        regressor: knn or rf
        protocol: ``loso`` (person-independent) or ``session`` (person-dependent)
        seed: Master seed
        out: Directory for the fold CSV and JSON summary
        config_path: Pipeline YAML configuration
        jobs: Feature extraction worker cap

    Returns:
        dict: The error report
    """
    logger = get_run_logger()
    config = load_config(config_path)
    spec = TrainSpec(
        feature=config.features.model_copy(update={"descriptor": Descriptor(descriptor)}),
        regressor=RegressorKind(regressor),
        forest=config.forest,
        knn=config.knn,
        seed=seed,
        pca_floor=config.reduction.pca_floor,
        lda_epsilon_scale=config.reduction.lda_epsilon_scale,
    )
    logger.info(f"Evaluating {descriptor}+{regressor} on {corpus} ({protocol}, seed {seed})")

    table = build_feature_table_task(corpus, spec.feature, config, jobs)
    skipped: list = []
    if protocol == "loso":
        folds = loso_folds(table)
        if len(folds) < 2:
            raise ProtocolError("leave-one-subject-out needs at least 2 subjects")
    elif protocol == "session":
        folds, skipped = loso_session_folds(table)
    else:
        raise ProtocolError(f"unknown protocol {protocol!r}; use 'loso' or 'session'")

    futures = run_fold_task.map(table=unmapped(table), fold=folds, spec=unmapped(spec))
    outcomes = [f.result() for f in futures]
    result = aggregate_report_task(table, folds, outcomes, spec, skipped)

    if out:
        paths = write_cv_report(result, table, Path(out), protocol, {"seed": seed})
        logger.info(f"Wrote {len(paths)} report files to {out}")

    logger.info(f"Mean error: {result.report.mean_error_cm:.3f} cm")
    return result.report.model_dump(mode="json")
