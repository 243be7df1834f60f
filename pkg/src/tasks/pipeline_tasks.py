"""Prefect tasks for the gaze evaluation pipeline."""

from typing import List, Optional, Sequence, Tuple

import numpy as np
from prefect import get_run_logger, task
from prefect.cache_policies import NONE

from src.dataset.manifest import open_corpus
from src.evaluation.protocols import (
    CrossValidationResult,
    Fold,
    FoldResult,
    aggregate_folds,
    run_fold,
)
from src.features.models import FeatureSpec
from src.features.table import FeatureTable, build_feature_table
from src.regress.model import TrainSpec
from src.utils.config import GazeKitConfig


@task(name="build-feature-table", cache_policy=NONE)
def build_feature_table_task(
    corpus: str,
    feature: FeatureSpec,
    config: GazeKitConfig,
    jobs: int = 1,
    cache_dir: Optional[str] = None,
) -> FeatureTable:
    """
    Load a corpus and extract its feature table.

    Args:
        corpus: Corpus directory, manifest CSV or ``ricetabletgaze``
        feature: Descriptor settings
        config: Pipeline configuration (geometry and eye thresholds)
        jobs: Extraction worker cap
        cache_dir: Feature cache directory

    Returns:
        FeatureTable: Rows of usable frames with exclusions recorded
    """
    logger = get_run_logger()
    logger.info(f"Extracting {feature.descriptor.value} features from {corpus}")

    data = open_corpus(corpus, geom=config.geometry)
    table = build_feature_table(data, feature, config.eyes, jobs=jobs, cache_dir=cache_dir)

    logger.info(
        f"Feature table ready: {len(table)} rows x {table.dim} values, "
        f"{len(table.exclusions.excluded_subjects)} subject(s) excluded"
    )
    return table


@task(name="run-fold", cache_policy=NONE)
def run_fold_task(
    table: FeatureTable, fold: Fold, spec: TrainSpec
) -> Tuple[FoldResult, np.ndarray]:
    """
    Train on one fold and predict its held-out rows.

    Returns:
        tuple: Fold summary and n x 2 predictions for the test rows
    """
    logger = get_run_logger()
    result, predictions = run_fold(table, fold, spec)
    logger.info(
        f"Fold {fold.fold}: ME {result.mean_error_cm:.3f} cm on {result.test_samples} images"
    )
    return result, predictions


@task(name="aggregate-report", cache_policy=NONE)
def aggregate_report_task(
    table: FeatureTable,
    folds: Sequence[Fold],
    outcomes: List[Tuple[FoldResult, np.ndarray]],
    spec: TrainSpec,
    skipped: Sequence[str] = (),
) -> CrossValidationResult:
    """
    Combine finished folds into one report.

    Returns:
        CrossValidationResult: Per-image errors averaged over images
    """
    logger = get_run_logger()
    result = aggregate_folds(table, folds, outcomes, spec, skipped=skipped)
    logger.info(
        f"Aggregated {len(folds)} folds: ME {result.report.mean_error_cm:.3f} cm "
        f"over {result.report.sample_count} images"
    )
    return result
