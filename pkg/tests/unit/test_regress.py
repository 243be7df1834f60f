"""Unit tests for kNN and forest regressors, gaze models and the model container."""

import struct

import numpy as np
import pytest
from pydantic import ValidationError

from src.dataset.models import GazePoint, ScreenGeometry
from src.eyes.localize import eye_geometry_feature
from src.regress.config import ForestParams, KnnParams, RegressionError, RegressorKind
from src.regress.forest import LEAF, fit_rf, predict_rf, predict_rf_batch
from src.regress.knn import fit_knn, predict_knn, predict_knn_batch
from src.regress.model import (
    TrainSpec,
    clamp_to_screen,
    fit_gaze,
    predict_gaze,
    predict_gaze_batch,
    train_gaze,
)
from src.regress.serialization import (
    ModelChecksumError,
    ModelFormatError,
    ModelVersionError,
    load_model,
    model_bytes,
    model_from_bytes,
    save_model,
)


class TestKnn:
    """Test k-nearest-neighbour regression."""

    def test_matches_brute_force(self):
        """Predictions are the mean of the k closest targets."""
        rng = np.random.default_rng(0)
        X, y = rng.normal(size=(50, 4)), rng.normal(size=50)
        model = fit_knn(X, y, k=3)
        queries = rng.normal(size=(10, 4))
        for q, pred in zip(queries, predict_knn_batch(model, queries)):
            nearest = np.argsort(np.linalg.norm(X - q, axis=1))[:3]
            assert pred == pytest.approx(y[nearest].mean())

    def test_ties_go_to_lower_index(self):
        """Equidistant points are taken in training order."""
        X = np.array([[1.0], [-1.0], [1.0]])
        model = fit_knn(X, np.array([10.0, 20.0, 30.0]), k=1)
        assert predict_knn(model, np.array([0.0])) == 10.0

    def test_k_range(self):
        """k must lie between 1 and the training size."""
        model = fit_knn(np.zeros((2, 1)), np.zeros(2), k=3)
        with pytest.raises(RegressionError):
            predict_knn_batch(model, np.zeros((1, 1)))

    def test_shape_checks(self):
        """Mismatched targets and query widths are refused."""
        with pytest.raises(RegressionError):
            fit_knn(np.zeros((3, 2)), np.zeros(2))
        model = fit_knn(np.zeros((3, 2)), np.zeros(3))
        with pytest.raises(RegressionError):
            predict_knn_batch(model, np.zeros((1, 3)))

    def test_params_validated(self):
        """k = 0 is not a valid setting."""
        with pytest.raises(ValidationError):
            KnnParams(k=0)


class TestForest:
    """Test the regression forest."""

    @pytest.fixture(scope="class")
    def data(self):
        """y = x0 on the unit cube."""
        rng = np.random.default_rng(1)
        X = rng.uniform(size=(200, 5))
        X_test = rng.uniform(size=(100, 5))
        return X, X[:, 0], X_test, X_test[:, 0]

    def test_learns_linear_target(self, data):
        """The forest halves the error of predicting the mean."""
        X, y, X_test, y_test = data
        model = fit_rf(X, y, ForestParams(n_trees=30))
        mae = np.abs(predict_rf_batch(model, X_test) - y_test).mean()
        baseline = np.abs(y.mean() - y_test).mean()
        assert mae < 0.5 * baseline

    def test_seed_reproducible(self, data):
        """The same seed grows the same forest."""
        X, y, X_test, _ = data
        a = fit_rf(X, y, ForestParams(n_trees=5, seed=7))
        b = fit_rf(X, y, ForestParams(n_trees=5, seed=7))
        c = fit_rf(X, y, ForestParams(n_trees=5, seed=8))
        assert np.array_equal(predict_rf_batch(a, X_test), predict_rf_batch(b, X_test))
        assert not np.array_equal(predict_rf_batch(a, X_test), predict_rf_batch(c, X_test))

    def test_leaves_respect_min_leaf(self, data):
        """A tree never splits a node below twice the minimum leaf size."""
        X, y, _, _ = data
        model = fit_rf(X, y, ForestParams(n_trees=1, min_leaf=40))
        tree = model.trees[0]
        assert tree.n_nodes <= 2 * (200 // 40) - 1
        assert (tree.feature == LEAF).sum() == (tree.n_nodes + 1) // 2

    def test_constant_target(self):
        """A constant target gives a single-leaf tree."""
        X = np.random.default_rng(2).uniform(size=(20, 3))
        model = fit_rf(X, np.full(20, 4.0), ForestParams(n_trees=2))
        assert all(t.n_nodes == 1 for t in model.trees)
        assert predict_rf(model, X[0]) == 4.0

    def test_mtry(self):
        """mtry defaults to a third of the features and cannot exceed them."""
        assert ForestParams().resolve_mtry(34) == 12
        with pytest.raises(RegressionError):
            ForestParams(mtry=5).resolve_mtry(4)

    def test_shape_checks(self):
        """Empty data and wrong query widths are refused."""
        with pytest.raises(RegressionError):
            fit_rf(np.zeros((0, 3)), np.zeros(0))
        model = fit_rf(np.random.default_rng(3).uniform(size=(20, 3)), np.arange(20.0))
        with pytest.raises(RegressionError):
            predict_rf_batch(model, np.zeros((1, 2)))


class TestGazeModel:
    """Test two-axis gaze models on a synthetic feature table."""

    def test_fit_shapes(self, small_model, small_table):
        """A model carries a 34-dimensional reduction and its provenance."""
        assert small_model.regressor_input_dim == 34
        assert small_model.kind == RegressorKind.RF
        assert small_model.descriptor == "mhog"
        assert small_model.training.samples == len(small_table)
        assert small_model.training.corpus_fingerprint == small_table.corpus_fingerprint
        preds = predict_gaze_batch(small_model, small_table.features[:5])
        assert preds.shape == (5, 2)

    def test_training_error_small(self, small_model, small_table):
        """On its own training data the forest is far better than the screen centre."""
        preds = predict_gaze_batch(small_model, small_table.features)
        err = np.linalg.norm(preds - small_table.targets, axis=1).mean()
        center = np.linalg.norm(small_table.targets - (11.31, 7.07), axis=1).mean()
        assert err < 0.5 * center

    def test_axes_use_different_seeds(self, small_model):
        """The x and y forests do not share their random draws."""
        assert small_model.regressor_x.params.seed != small_model.regressor_y.params.seed

    def test_augmented(self, small_table):
        """Augmented models append ten geometry columns."""
        spec = TrainSpec(regressor="knn", augmented=True)
        model = fit_gaze(small_table, spec=spec)
        assert model.regressor_input_dim == 44
        with pytest.raises(RegressionError):
            predict_gaze_batch(model, small_table.features[:2])
        preds = predict_gaze_batch(model, small_table.features[:2], small_table.eye_geometry[:2])
        assert preds.shape == (2, 2)

    def test_predict_single_pair(self, small_table, eye_pair):
        """A single eye pair gives a screen point."""
        model = fit_gaze(small_table, spec=TrainSpec(regressor="knn"))
        point = predict_gaze(model, eye_pair)
        assert isinstance(point, GazePoint)
        aug = fit_gaze(small_table, spec=TrainSpec(regressor="knn", augmented=True))
        with pytest.raises(RegressionError, match="geometry"):
            predict_gaze(aug, eye_pair)
        geometry = eye_geometry_feature(eye_pair.left_box, eye_pair.right_box)
        assert isinstance(predict_gaze(aug, eye_pair, geometry), GazePoint)

    def test_empty_rows(self, small_table):
        """Training on no rows is refused."""
        with pytest.raises(RegressionError):
            fit_gaze(small_table, rows=np.array([], dtype=np.int64))

    def test_clamp(self, small_model, small_table):
        """Clamped predictions stay on the screen."""
        far = small_table.features[:3] * 50.0
        preds = predict_gaze_batch(small_model, far, clamp=True)
        assert np.all((preds[:, 0] >= 0) & (preds[:, 0] <= 22.62))
        assert np.all((preds[:, 1] >= 0) & (preds[:, 1] <= 14.14))
        point = clamp_to_screen(GazePoint(x_cm=-3.0, y_cm=20.0), ScreenGeometry())
        assert point.as_tuple() == (0.0, 14.14)

    def test_train_gaze(self, tiny_corpus):
        """train_gaze extracts and fits in one call."""
        model = train_gaze(tiny_corpus, "hog", "knn")
        assert model.descriptor == "hog"
        assert model.kind == RegressorKind.KNN
        assert model.training.subjects == ["s01", "s02"]

    def test_spec_fingerprint(self):
        """Any setting change alters the configuration fingerprint."""
        assert TrainSpec().fingerprint() == TrainSpec().fingerprint()
        assert TrainSpec().fingerprint() != TrainSpec(clamp=True).fingerprint()


class TestModelContainer:
    """Test saving and loading models."""

    @pytest.fixture(scope="class")
    def data(self, small_model):
        """Serialised forest model."""
        return model_bytes(small_model)

    def test_round_trip(self, small_model, small_table, data, tmp_path):
        """A loaded model predicts exactly like the original."""
        path = save_model(small_model, tmp_path / "model.gzm")
        loaded = load_model(path)
        assert np.array_equal(
            predict_gaze_batch(loaded, small_table.features[:20]),
            predict_gaze_batch(small_model, small_table.features[:20]),
        )
        assert loaded.training == small_model.training
        assert model_bytes(loaded) == data

    def test_knn_round_trip(self, small_table):
        """kNN models keep their training set."""
        model = fit_gaze(small_table, spec=TrainSpec(regressor="knn", augmented=True))
        loaded = model_from_bytes(model_bytes(model))
        assert loaded.augmented
        assert loaded.regressor_x.k == 3
        assert np.array_equal(loaded.regressor_y.X, model.regressor_y.X)

    def test_bytes_deterministic(self, small_model, data):
        """Serialising twice gives identical bytes."""
        assert model_bytes(small_model) == data
        assert data[:8] == b"GZKMODEL"

    def test_truncated(self, data):
        """Cut files fail the checksum."""
        with pytest.raises(ModelChecksumError):
            model_from_bytes(data[:-10])
        with pytest.raises(ModelChecksumError):
            model_from_bytes(data[:5])

    def test_corrupt(self, data):
        """A flipped byte fails the checksum."""
        corrupt = bytearray(data)
        corrupt[len(data) // 2] ^= 0xFF
        with pytest.raises(ModelChecksumError):
            model_from_bytes(bytes(corrupt))

    def test_bad_magic(self, data):
        """Other files are not models."""
        with pytest.raises(ModelFormatError):
            model_from_bytes(b"NOTAMODL" + data[8:])
        with pytest.raises(ModelFormatError):
            model_from_bytes(b"")

    def test_version(self, data):
        """Other format versions are refused before the checksum."""
        with pytest.raises(ModelVersionError) as exc:
            model_from_bytes(data[:8] + struct.pack("<H", 2) + data[10:])
        assert exc.value.details["version"] == 2

    def test_missing_file(self, tmp_path):
        """Unreadable paths raise ModelFormatError."""
        with pytest.raises(ModelFormatError):
            load_model(tmp_path / "absent.gzm")
