"""Unit tests for PCA, LDA and the composed reduction."""

import numpy as np
import pytest

from src.reduction.lda import fisher_ratio, fit_lda, scatter_matrices
from src.reduction.model import fit_reduction, pca_target, project
from src.reduction.pca import ReductionError, fit_pca, fix_signs


def _clusters(seed=0, classes=3, per_class=20, dim=5, spread=3.0):
    rng = np.random.default_rng(seed)
    centers = rng.normal(scale=spread, size=(classes, dim))
    X = np.vstack([c + rng.normal(size=(per_class, dim)) for c in centers])
    labels = np.repeat(np.arange(classes), per_class)
    return X, labels


class TestPca:
    """Test principal component analysis."""

    def test_basis_orthonormal(self):
        """Components are orthonormal and eigenvalues non-increasing."""
        X = np.random.default_rng(0).normal(size=(40, 12))
        result = fit_pca(X, 6)
        assert result.basis.shape == (12, 6)
        assert np.allclose(result.basis.T @ result.basis, np.eye(6))
        assert np.all(np.diff(result.eigenvalues) <= 1e-12)
        assert result.rank == 12
        assert np.allclose(result.mean, X.mean(axis=0))

    def test_first_axis_follows_variance(self):
        """The first component points along the dominant direction."""
        rng = np.random.default_rng(1)
        X = np.column_stack([rng.normal(scale=10.0, size=200), rng.normal(size=200)])
        axis = fit_pca(X, 1).basis[:, 0]
        assert abs(axis[0]) > 0.99

    def test_sign_convention(self):
        """The largest entry of each component is positive."""
        basis = fix_signs(np.array([[0.1, -0.9], [-0.8, 0.2]]))
        assert basis[1, 0] == pytest.approx(0.8)
        assert basis[0, 1] == pytest.approx(0.9)

    def test_rank_of_duplicated_columns(self):
        """Linearly dependent columns lower the numerical rank."""
        base = np.random.default_rng(2).normal(size=(30, 3))
        assert fit_pca(np.hstack([base, base]), 2).rank == 3

    def test_errors(self):
        """Too few samples or too many components are refused."""
        with pytest.raises(ReductionError):
            fit_pca(np.ones((1, 3)), 0)
        with pytest.raises(ReductionError):
            fit_pca(np.random.default_rng(3).normal(size=(5, 10)), 5)


class TestLda:
    """Test linear discriminant analysis."""

    def test_output_dimension(self):
        """c classes give c - 1 directions."""
        X, labels = _clusters(classes=4)
        assert fit_lda(X, labels).basis.shape == (5, 3)

    @pytest.mark.parametrize("classes,dim", [(3, 5), (5, 8), (35, 40)])
    def test_beats_random_projections(self, classes, dim):
        """No random basis of the same width separates the classes better than LDA."""
        X, labels = _clusters(seed=4, classes=classes, dim=dim)
        lda = fit_lda(X, labels)
        best = fisher_ratio(X, labels, lda.basis)
        rng = np.random.default_rng(5)
        ratios = [
            fisher_ratio(X, labels, rng.normal(size=(dim, classes - 1))) for _ in range(1000)
        ]
        assert best >= max(ratios)

    def test_scatter_decomposition(self):
        """Within plus between scatter equals the total scatter."""
        X, labels = _clusters(seed=6)
        sw, sb = scatter_matrices(X, labels)
        centered = X - X.mean(axis=0)
        assert np.allclose(sw + sb, centered.T @ centered)

    def test_single_class(self):
        """One class gives an empty basis."""
        X = np.random.default_rng(7).normal(size=(10, 4))
        assert fit_lda(X, np.zeros(10, dtype=int)).basis.shape == (4, 0)

    def test_singleton_class_refused(self):
        """Every class needs two samples."""
        X = np.random.default_rng(8).normal(size=(5, 3))
        with pytest.raises(ReductionError, match="fewer than 2"):
            fit_lda(X, np.array([0, 0, 1, 1, 2]))

    def test_too_few_dimensions(self):
        """Input dimension must reach c - 1."""
        X, labels = _clusters(classes=4, dim=2)
        with pytest.raises(ReductionError):
            fit_lda(X, labels)


class TestReductionModel:
    """Test the composed PCA then LDA projection."""

    def test_pca_target(self):
        """The PCA target respects the sample, class and rank caps."""
        assert pca_target(1440, 420, 35, 12, 400, 200) == 200
        assert pca_target(1440, 100, 35, 2, 99, 200) == 65
        assert pca_target(20, 420, 35, 12, 20, 200) == 20

    def test_fit_on_table(self, small_table):
        """Thirty-five grid classes reduce to 34 dimensions."""
        model = fit_reduction(small_table.features, small_table.labels, n_classes=35)
        assert model.output_dim == 34
        assert model.pca_dim == 200
        assert project(model, small_table.features[:3]).shape == (3, 34)
        assert project(model, small_table.features[0]).shape == (34,)

    def test_missing_class(self):
        """A configured class without samples is refused."""
        X, labels = _clusters(classes=3)
        with pytest.raises(ReductionError) as exc:
            fit_reduction(X, labels, n_classes=4)
        assert exc.value.details["empty"] == [3]

    def test_too_small_for_lda(self):
        """More classes than PCA room raises ReductionError."""
        X, labels = _clusters(classes=4, dim=2)
        with pytest.raises(ReductionError, match="below"):
            fit_reduction(X, labels)

    def test_project_dimension_mismatch(self):
        """Vectors of the wrong length are refused."""
        X, labels = _clusters()
        model = fit_reduction(X, labels)
        with pytest.raises(ReductionError):
            project(model, np.zeros(4))

    def test_deterministic(self):
        """The same data always gives the same projection."""
        X, labels = _clusters(seed=9)
        a = fit_reduction(X, labels)
        b = fit_reduction(X, labels)
        assert np.array_equal(project(a, X), project(b, X))
