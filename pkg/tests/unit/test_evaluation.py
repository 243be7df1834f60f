"""Unit tests for error metrics, cross-validation protocols, partitions and reports."""

import dataclasses
import json
import math

import numpy as np
import pandas as pd
import pytest

from src.dataset.geometry import grid_points
from src.dataset.models import GazePoint, ScreenGeometry
from src.dataset.synthetic import synth_generate
from src.evaluation.metrics import (
    MetricError,
    angular_band,
    angular_error,
    center_baseline_error,
    error_report,
    euclid_error,
    subject_means,
)
from src.evaluation.partition import (
    Experiment,
    ExperimentSpec,
    Factor,
    partition_experiments,
)
from src.evaluation.protocols import (
    ProtocolError,
    loso_cv,
    loso_folds,
    loso_session_cv,
    loso_session_folds,
    size_study,
    sweep,
)
from src.evaluation.reports import (
    partition_frame,
    reference_check,
    write_cv_report,
    write_partition,
    write_size_study,
    write_sweep,
)
from src.regress.model import TrainSpec


@pytest.fixture
def knn_spec():
    """kNN keeps protocol tests quick."""
    return TrainSpec(regressor="knn")


@pytest.fixture(scope="module")
def loso_knn(small_table):
    """LOSO kNN result on the small table."""
    return loso_cv(small_table, TrainSpec(regressor="knn"))


class TestMetrics:
    """Test error measures."""

    def test_euclid(self):
        """Euclidean error in cm."""
        assert euclid_error(GazePoint(x_cm=3, y_cm=4), GazePoint(x_cm=0, y_cm=0)) == 5.0

    def test_angular_error(self):
        """Angular error at typical tablet distances."""
        assert angular_error(3.17, 30.0) == pytest.approx(6.03, abs=0.01)
        assert angular_error(3.17, 50.0) == pytest.approx(3.63, abs=0.01)
        assert angular_error(0.0, 40.0) == 0.0
        with pytest.raises(MetricError):
            angular_error(1.0, 0.0)

    def test_angular_band(self):
        """The band runs from the far to the near distance."""
        band = angular_band(3.17)
        assert band.distances_cm == [30.0, 40.0, 50.0]
        assert band.high == pytest.approx(angular_error(3.17, 30.0))
        assert band.low == pytest.approx(angular_error(3.17, 50.0))

    def test_center_baseline(self):
        """The centre baseline is the mean dot distance from the screen centre."""
        geom = ScreenGeometry()
        points = [p for _, p in grid_points(geom)]
        expected = np.mean([math.hypot(p.x_cm - 11.31, p.y_cm - 7.07) for p in points])
        assert center_baseline_error(geom) == pytest.approx(expected)

    def test_error_report(self):
        """Reports hold mean, spread and per-axis errors over images."""
        pred = np.array([[0.0, 0.0], [3.0, 4.0]])
        report = error_report(pred, np.zeros((2, 2)), ["a", "b"])
        assert report.mean_error_cm == pytest.approx(2.5)
        assert report.std_error_cm == pytest.approx(2.5)
        assert report.mae_x_cm == pytest.approx(1.5)
        assert report.mae_y_cm == pytest.approx(2.0)
        assert report.sample_count == 2
        assert subject_means(report) == {"a": 0.0, "b": 5.0}
        assert report.angular.distances_cm == [30.0, 40.0, 50.0]
        assert error_report(pred, np.zeros((2, 2)), ["a", "b"], distances=None).angular is None

    def test_mae_bounds(self):
        """Per-axis errors bound the Euclidean error."""
        rng = np.random.default_rng(0)
        report = error_report(rng.normal(size=(50, 2)), rng.normal(size=(50, 2)), ["s"] * 50)
        assert max(report.mae_x_cm, report.mae_y_cm) <= report.mean_error_cm
        assert report.mean_error_cm <= report.mae_x_cm + report.mae_y_cm

    def test_shape_mismatch(self):
        """Predictions, truths and subjects must align."""
        with pytest.raises(MetricError):
            error_report(np.zeros((2, 2)), np.zeros((3, 2)), ["a", "a"])
        with pytest.raises(MetricError):
            error_report(np.zeros((2, 2)), np.zeros((2, 2)), ["a"])


class TestLoso:
    """Test leave-one-subject-out cross-validation."""

    def test_folds_partition_rows(self, small_table):
        """Test sets are disjoint, cover every row and never meet their training set."""
        folds = loso_folds(small_table)
        assert [f.fold for f in folds] == ["s01", "s02", "s03", "s04"]
        tested = np.concatenate([f.test for f in folds])
        assert sorted(tested.tolist()) == list(range(len(small_table)))
        for fold in folds:
            assert not set(fold.train) & set(fold.test)
            assert set(small_table.subjects[fold.test]) == {fold.fold}

    def test_result(self, small_table, loso_knn):
        """Every image is predicted once and errors match the predictions."""
        assert loso_knn.report.sample_count == len(small_table)
        truth = small_table.targets[loso_knn.rows]
        assert np.allclose(np.hypot(*(loso_knn.predictions - truth).T), loso_knn.errors)
        assert loso_knn.report.mean_error_cm == pytest.approx(loso_knn.errors.mean())
        assert [f.test_subjects for f in loso_knn.folds] == [["s01"], ["s02"], ["s03"], ["s04"]]
        assert loso_knn.folds[0].train_subjects == ["s02", "s03", "s04"]

    def test_frames(self, small_table, loso_knn):
        """Fold and prediction frames have one row per fold and per image."""
        assert len(loso_knn.folds_frame()) == 4
        frame = loso_knn.predictions_frame(small_table)
        assert len(frame) == len(small_table)
        assert list(frame.columns)[-1] == "error_cm"

    def test_jobs_do_not_change_result(self, small_table, loso_knn):
        """Running folds in parallel gives the same numbers."""
        parallel = loso_cv(small_table, TrainSpec(regressor="knn"), jobs=2)
        assert np.array_equal(parallel.predictions, loso_knn.predictions)
        assert parallel.report == loso_knn.report

    def test_forest_reproducible(self, small_table):
        """Forest LOSO with a fixed seed is reproducible."""
        spec = TrainSpec(forest={"n_trees": 5}, seed=11)
        subjects = ["s01", "s02", "s03"]
        a = loso_cv(small_table, spec, subjects=subjects)
        b = loso_cv(small_table, spec, subjects=subjects)
        assert np.array_equal(a.predictions, b.predictions)
        assert a.report.seed == 11

    def test_subject_filter(self, small_table, knn_spec):
        """Restricting subjects restricts the folds."""
        result = loso_cv(small_table, knn_spec, subjects=["s01", "s03"])
        assert [f.fold for f in result.folds] == ["s01", "s03"]
        assert set(result.subjects) == {"s01", "s03"}

    def test_single_subject(self, small_table, knn_spec):
        """LOSO needs two subjects."""
        with pytest.raises(ProtocolError):
            loso_cv(small_table, knn_spec, subjects=["s01"])


class TestSessionCv:
    """Test person-dependent leave-one-session-out cross-validation."""

    def test_folds(self, small_table):
        """Each subject contributes one fold per session."""
        folds, skipped = loso_session_folds(small_table)
        assert len(folds) == 8
        assert skipped == []
        assert folds[0].fold == "s01/s01-01"
        assert set(small_table.sessions[folds[0].train]) == {"s01-02"}

    def test_runs(self, small_table, knn_spec):
        """Session CV predicts every image once."""
        result = loso_session_cv(small_table, knn_spec)
        assert result.report.sample_count == len(small_table)

    def test_single_session_everywhere(self, small_table, knn_spec):
        """Without any second session there is nothing to evaluate."""
        rows = small_table.rows(sessions=[(s, f"{s}-01") for s in small_table.subject_ids()])
        narrowed = dataclasses.replace(
            small_table,
            features=small_table.features[rows],
            eye_geometry=small_table.eye_geometry[rows],
            labels=small_table.labels[rows],
            subjects=small_table.subjects[rows],
            sessions=small_table.sessions[rows],
            frame_refs=[small_table.frame_refs[i] for i in rows],
        )
        with pytest.raises(ProtocolError) as exc:
            loso_session_cv(narrowed, knn_spec)
        assert exc.value.details["skipped"] == ["s01", "s02", "s03", "s04"]


class TestSweepAndSize:
    """Test descriptor sweeps and training-size studies."""

    @pytest.fixture(scope="class")
    def corpus(self):
        """Three subjects, one frame per dot."""
        return synth_generate(3, seed=6, frames_per_point=1)

    def test_sweep_table(self, corpus, tmp_path):
        """The sweep table has regressors as rows and descriptors as columns."""
        result = sweep(corpus, ["hog", "mhog"], ["knn"], TrainSpec())
        assert list(result.table.index) == ["knn"]
        assert list(result.table.columns) == ["hog", "mhog"]
        assert result.table.loc["knn", "mhog"] == pytest.approx(
            result.results[("knn", "mhog")].report.mean_error_cm
        )
        paths = write_sweep(result, tmp_path / "a")
        again = write_sweep(result, tmp_path / "b")
        assert [p.name for p in paths] == ["sweep.csv", "sweep_summary.json", "sweep.svg"]
        assert paths[2].read_bytes() == again[2].read_bytes()

    def test_size_study(self, small_table, tmp_path):
        """Every size gets a point; the full size runs once."""
        spec = TrainSpec(regressor="knn", seed=4)
        result = size_study(small_table, [4, 2], repeats=2, spec=spec)
        assert [p.k for p in result.points] == [2, 4]
        assert len(result.points[0].repeat_errors_cm) == 2
        assert len(result.points[1].repeat_errors_cm) == 1
        assert result.points[1].groups == [["s01", "s02", "s03", "s04"]]
        assert all(len(g) == 2 for g in result.points[0].groups)
        assert result.spearman_rho is not None
        repeat = size_study(small_table, [2], repeats=2, spec=spec)
        assert repeat.points[0].groups == result.points[0].groups
        paths = write_size_study(result, tmp_path)
        assert json.loads(paths[1].read_text())["seed"] == 4

    def test_size_bounds(self, small_table, knn_spec):
        """Sizes must lie between 2 and the subject count."""
        with pytest.raises(ProtocolError):
            size_study(small_table, [1], spec=knn_spec)
        with pytest.raises(ProtocolError):
            size_study(small_table, [5], spec=knn_spec)


class TestPartition:
    """Test the glasses, race and posture partition experiments."""

    @pytest.fixture(scope="class")
    def glasses(self, small_corpus, small_table):
        """All three experiments split by glasses."""
        spec = ExperimentSpec(factor=Factor.GLASSES, repeats=1, seed=2)
        return partition_experiments(
            small_corpus, spec, TrainSpec(regressor="knn"), source=small_table
        )

    def test_groups(self, glasses):
        """Odd-numbered synthetic subjects wear glasses."""
        assert [g.name for g in glasses.groups] == ["glasses", "no_glasses"]
        assert glasses.group("glasses").subjects == ["s02", "s04"]
        assert glasses.equalized_size == 2

    def test_e1(self, glasses):
        """E1 trains and tests within each group."""
        for group in glasses.groups:
            assert group.e1_subjects_used == 2
            assert group.e1_mean_error_cm > 0

    def test_e2_matches_loso(self, glasses, loso_knn):
        """E2 splits the plain LOSO error by group."""
        groups = glasses.groups
        total = sum(g.e2_mean_error_cm * g.e2_samples for g in groups)
        count = sum(g.e2_samples for g in groups)
        assert total / count == pytest.approx(loso_knn.report.mean_error_cm)

    def test_e3(self, glasses):
        """E3 mixes one subject from each group."""
        for group in glasses.groups:
            assert len(group.e3_repeat_errors_cm) == 1

    def test_single_experiment(self, small_corpus, small_table):
        """Selecting E2 leaves the other experiments empty."""
        spec = ExperimentSpec(factor=Factor.GLASSES, experiment=Experiment.E2, repeats=1)
        result = partition_experiments(
            small_corpus, spec, TrainSpec(regressor="knn"), source=small_table
        )
        assert all(g.e1_mean_error_cm is None for g in result.groups)
        assert all(g.e3_mean_error_cm is None for g in result.groups)
        assert all(g.e2_mean_error_cm is not None for g in result.groups)

    def test_race_needs_two_groups(self, small_corpus, small_table):
        """Race groups with a single subject are skipped, leaving too few groups."""
        with pytest.raises(ProtocolError):
            partition_experiments(
                small_corpus,
                ExperimentSpec(factor=Factor.RACE),
                TrainSpec(regressor="knn"),
                source=small_table,
            )

    def test_posture_needs_balanced_subjects(self, small_corpus, small_table):
        """Subjects missing postures are left out of the posture study."""
        with pytest.raises(ProtocolError):
            partition_experiments(
                small_corpus,
                ExperimentSpec(factor=Factor.POSTURE),
                TrainSpec(regressor="knn"),
                source=small_table,
            )

    def test_report(self, glasses, tmp_path):
        """Partition reports have one row per group."""
        frame = partition_frame(glasses)
        assert list(frame.columns) == ["group", "subjects", "E1", "E2", "E3"]
        paths = write_partition(glasses, tmp_path)
        assert paths[0].name == "partition_glasses.csv"
        assert json.loads(paths[1].read_text())["factor"] == "glasses"


class TestReports:
    """Test report files and the published-number check."""

    def test_cv_report(self, small_table, loso_knn, tmp_path):
        """A cross-validation writes folds, predictions and a summary."""
        paths = write_cv_report(loso_knn, small_table, tmp_path, "loso", {"descriptor": "mhog"})
        assert [p.name for p in paths] == [
            "loso_folds.csv",
            "loso_predictions.csv",
            "loso_summary.json",
        ]
        folds = pd.read_csv(paths[0])
        assert len(folds) == 4
        assert folds["config_fingerprint"].nunique() == 1
        summary = json.loads(paths[2].read_text())
        assert summary["folds"] == 4
        assert summary["descriptor"] == "mhog"
        assert summary["mean_error_cm"] == pytest.approx(loso_knn.report.mean_error_cm)
        assert summary["center_baseline_cm"] == pytest.approx(center_baseline_error())

    def test_reference_check(self):
        """The check needs the published error within tolerance and the RF ordering."""
        table = pd.DataFrame(
            [[3.0, 3.5, 4.0, 5.0, 6.0]],
            index=["rf"],
            columns=["mhog", "hog", "lbp", "log", "intensity"],
        )
        check = reference_check(3.4, table)
        assert check.within_tolerance
        assert check.ordering_preserved
        assert check.passed
        assert not reference_check(3.8, table).passed
        table.loc["rf", "hog"] = 4.5
        assert reference_check(3.2, table).ordering_preserved is False
        assert reference_check(3.2).ordering_preserved is None
