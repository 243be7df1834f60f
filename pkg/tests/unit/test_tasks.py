"""Unit tests for the Prefect pipeline tasks."""

import logging

import numpy as np
import pytest

from src.dataset.manifest import write_corpus
from src.evaluation.protocols import loso_cv, loso_folds
from src.features.models import FeatureSpec
from src.regress.model import TrainSpec
from src.tasks.pipeline_tasks import (
    aggregate_report_task,
    build_feature_table_task,
    run_fold_task,
)
from src.utils.config import GazeKitConfig


@pytest.fixture(autouse=True)
def run_logger(mocker):
    """Tasks are called outside a flow run, so the run logger is replaced."""
    return mocker.patch(
        "src.tasks.pipeline_tasks.get_run_logger",
        return_value=logging.getLogger("gazekit.tests.tasks"),
    )


@pytest.fixture(scope="module")
def written_corpus(tmp_path_factory, tiny_corpus):
    """The tiny corpus on disk."""
    out = tmp_path_factory.mktemp("tasks") / "corpus"
    write_corpus(tiny_corpus, out)
    return out


class TestPipelineTasks:
    """Test the fold-level tasks of the evaluation flow."""

    def test_build_feature_table(self, written_corpus, run_logger):
        """The table task loads the corpus from disk and extracts features."""
        table = build_feature_table_task.fn(
            str(written_corpus), FeatureSpec(descriptor="hog"), GazeKitConfig()
        )
        assert table.subject_ids() == ["s01", "s02"]
        assert table.spec.descriptor.value == "hog"
        run_logger.assert_called()

    def test_folds_match_loso_cv(self, small_table):
        """Running folds one task at a time gives the plain LOSO result."""
        spec = TrainSpec(regressor="knn")
        folds = loso_folds(small_table)
        outcomes = [run_fold_task.fn(small_table, fold, spec) for fold in folds]
        assert [result.fold for result, _ in outcomes] == ["s01", "s02", "s03", "s04"]
        result = aggregate_report_task.fn(small_table, folds, outcomes, spec)
        direct = loso_cv(small_table, spec)
        assert result.report.mean_error_cm == pytest.approx(direct.report.mean_error_cm)
        assert np.array_equal(result.rows, direct.rows)
