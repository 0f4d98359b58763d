"""
Tests for input affinities, the t-SNE loss and gradient, and the optimizer.
"""

import logging

import numpy as np
import pytest
from scipy.spatial.distance import cdist

from core.affinity import (
    AffinityContext, calibrate_bandwidths, similarity_matrix, squared_distances,
)
from core.errors import CalibrationError, SpecValidationError
from core.tsne import (
    TsneConfig, kernel_matrix, kernel_w, loss_and_gradient, run_tsne, total_gradient, total_loss,
)
from data.generators import sample_gmm, two_gmm_spec


@pytest.mark.unit
@pytest.mark.core
class TestKernel:
    """Test the Student-t kernel."""

    def test_values(self):
        assert kernel_w(np.zeros(2), np.zeros(2)) == 1.0
        assert kernel_w(np.array([0.0, 0.0]), np.array([1.0, 0.0])) == 0.5
        assert kernel_w(np.array([1.0, 1.0]), np.array([-1.0, 1.0])) == pytest.approx(0.2)

    def test_rejects_nan(self):
        with pytest.raises(ValueError):
            kernel_w(np.array([np.nan, 0.0]), np.zeros(2))

    def test_matrix(self, random_embedding):
        W = kernel_matrix(random_embedding)
        assert np.all(np.diag(W) == 0)
        np.testing.assert_allclose(W, W.T)
        assert W[0, 1] == pytest.approx(kernel_w(random_embedding[0], random_embedding[1]))


@pytest.mark.unit
@pytest.mark.core
class TestLoss:
    """Test the total loss and its gradient."""

    def test_loss_matches_pairwise_form(self, random_embedding, random_similarities):
        Y, V = random_embedding, random_similarities
        n = Y.shape[0]
        expected = 0.0
        for i in range(n):
            for j in range(i + 1, n):
                expected += 2.0 * V[i, j] * np.log1p(np.sum((Y[i] - Y[j]) ** 2))
        expected += np.log(kernel_matrix(Y).sum())
        assert total_loss(Y, V) == pytest.approx(expected, rel=1e-12)

    def test_loss_differs_from_kl_by_constant(self, random_embedding, random_similarities):
        Y, V = random_embedding, random_similarities
        W = kernel_matrix(Y)
        Q = W / W.sum()
        mask = V > 0
        kl = np.sum(V[mask] * np.log(V[mask] / Q[mask]))
        assert total_loss(Y, V) == pytest.approx(kl - np.sum(V[mask] * np.log(V[mask])), rel=1e-10)

    def test_gradient_matches_finite_differences(self, random_embedding, random_similarities, finite_differences):
        V = random_similarities
        numeric = finite_differences.gradient(lambda Y: total_loss(Y, V), random_embedding)
        np.testing.assert_allclose(total_gradient(random_embedding, V), numeric, rtol=1e-5, atol=1e-8)

    def test_loss_and_gradient_agree(self, random_embedding, random_similarities):
        loss, gradient = loss_and_gradient(random_embedding, random_similarities)
        assert loss == total_loss(random_embedding, random_similarities)
        np.testing.assert_array_equal(gradient, total_gradient(random_embedding, random_similarities))

    def test_gradient_sums_to_zero(self, random_embedding, random_similarities):
        np.testing.assert_allclose(total_gradient(random_embedding, random_similarities).sum(axis=0), 0.0, atol=1e-12)

    def test_shape_mismatch(self, random_embedding):
        with pytest.raises(SpecValidationError):
            total_loss(random_embedding, np.eye(3))

    def test_non_finite_embedding(self, random_embedding, random_similarities):
        Y = random_embedding.copy()
        Y[0, 0] = np.inf
        with pytest.raises(ValueError):
            total_loss(Y, random_similarities)


@pytest.mark.unit
@pytest.mark.core
class TestCalibration:
    """Test bandwidth calibration and the symmetric similarities."""

    def test_row_entropies_hit_target(self, two_cluster_matrix):
        calibration = calibrate_bandwidths(squared_distances(two_cluster_matrix.values), 10.0)
        np.testing.assert_allclose(calibration.achieved_perplexity, 10.0, rtol=1e-6)
        np.testing.assert_allclose(calibration.conditional.sum(axis=1), 1.0)
        assert np.all(np.diag(calibration.conditional) == 0)

    def test_similarity_matrix_properties(self, two_cluster_matrix):
        V = similarity_matrix(two_cluster_matrix, 10.0)
        assert V.values.sum() == pytest.approx(1.0)
        np.testing.assert_allclose(V.values, V.values.T)
        assert np.all(np.diag(V.values) == 0)
        assert np.all(V.values >= 0)
        assert np.all(V.sigmas > 0)

    def test_threads_give_same_result(self, two_cluster_matrix):
        single = similarity_matrix(two_cluster_matrix, 10.0, threads=1)
        pooled = similarity_matrix(two_cluster_matrix, 10.0, threads=3)
        np.testing.assert_array_equal(single.values, pooled.values)

    def test_perplexity_out_of_range(self, two_cluster_matrix):
        with pytest.raises(SpecValidationError):
            similarity_matrix(two_cluster_matrix, 40.0)
        with pytest.raises(SpecValidationError):
            similarity_matrix(two_cluster_matrix, 1.0)

    def test_perplexity_between_n_minus_one_and_n(self):
        points = np.random.Generator(np.random.PCG64(0)).normal(size=(5, 2))
        with pytest.raises(SpecValidationError):
            similarity_matrix(points, 4.5)
        calibration = calibrate_bandwidths(squared_distances(points), 4.0)
        np.testing.assert_allclose(calibration.entropy_bits, 2.0, atol=1e-3)

    def test_duplicate_rows_fail(self):
        with pytest.raises(CalibrationError) as excinfo:
            similarity_matrix(np.ones((5, 2)), 2.0)
        assert excinfo.value.row == 0

    def test_equidistant_neighbors(self, caplog):
        triangle = np.array([[0.0, 0.0], [1.0, 0.0], [0.5, np.sqrt(3.0) / 2.0]])
        with caplog.at_level(logging.WARNING):
            calibration = calibrate_bandwidths(squared_distances(triangle), 1.5)
        np.testing.assert_allclose(calibration.conditional[0, 1:], 0.5)
        assert 'equidistant' in caplog.text

    def test_invalid_distance_matrix(self):
        with pytest.raises(SpecValidationError):
            calibrate_bandwidths(np.array([[0.0, 1.0], [2.0, 0.0]]), 1.5)


@pytest.mark.unit
@pytest.mark.core
class TestAffinityContext:
    """Test similarity columns of added and replaced points."""

    def test_exact_added_column_matches_augmented_matrix(self, small_context, two_cluster_matrix):
        x_new = np.array([0.3, -0.2])
        augmented = similarity_matrix(np.vstack([two_cluster_matrix.values, x_new]), small_context.perplexity)
        column = small_context.added_point_column(x_new, 'exact')
        np.testing.assert_allclose(column, augmented.values[:-1, -1], rtol=1e-10, atol=1e-15)

    def test_approx1_equals_exact_without_pca(self, small_context):
        x_new = np.array([1.0, 1.0])
        np.testing.assert_array_equal(small_context.added_point_column(x_new, 'approx1'),
                                      small_context.added_point_column(x_new, 'exact'))

    def test_approx2_close_to_exact(self, small_context):
        x_new = np.array([-2.5, 0.4])
        exact = small_context.added_point_column(x_new, 'exact')
        approximate = small_context.added_point_column(x_new, 'approx2')
        assert np.all(approximate >= 0)
        assert np.corrcoef(exact, approximate)[0, 1] > 0.95

    def test_replacing_with_itself_reproduces_column(self, small_context, two_cluster_matrix):
        index = 7
        column = small_context.replaced_point_column(index, two_cluster_matrix.values[index], 'approx2')
        np.testing.assert_allclose(column, small_context.similarity.values[:, index], rtol=1e-6, atol=1e-15)
        exact = small_context.replaced_point_column(index, two_cluster_matrix.values[index], 'exact')
        np.testing.assert_allclose(exact, small_context.similarity.values[:, index], rtol=1e-10, atol=1e-15)

    def test_replaced_column_zero_at_index(self, small_context):
        column = small_context.replaced_point_column(3, np.array([0.0, 0.0]), 'approx2')
        assert column[3] == 0.0
        assert column.shape == (small_context.n,)

    def test_bad_arguments(self, small_context):
        with pytest.raises(SpecValidationError):
            small_context.added_point_column(np.zeros(3))
        with pytest.raises(SpecValidationError):
            small_context.added_point_column(np.zeros(2), 'approx3')
        with pytest.raises(IndexError):
            small_context.replaced_point_column(40, np.zeros(2))

    def test_pca_context(self):
        matrix = sample_gmm(two_gmm_spec(half_separation=3.0, dim=5), 30, seed=2)
        context = AffinityContext.build(matrix, 6.0, pca_dim=2)
        assert context.features.shape == (30, 2)
        x_new = matrix.values[0] + 0.1
        for approximation in ('exact', 'approx1', 'approx2'):
            column = context.added_point_column(x_new, approximation)
            assert column.shape == (30,)
            assert np.all(column >= 0)

    def test_pca_wider_than_input_is_skipped(self, two_cluster_matrix):
        context = AffinityContext.build(two_cluster_matrix, 8.0, pca_dim=5)
        assert context.pca is None
        assert context.pca_dim is None


@pytest.mark.unit
@pytest.mark.core
class TestTsneConfig:
    """Test optimizer settings."""

    @pytest.mark.parametrize('settings', [
        {'perplexity': 1.0},
        {'learning_rate': 0.0},
        {'max_iter': -1},
        {'init': 'spectral'},
        {'final_momentum': 1.0},
        {'trace_interval': 0},
    ])
    def test_invalid_settings(self, settings):
        with pytest.raises(SpecValidationError):
            TsneConfig(**settings)

    def test_perplexity_checked_against_n(self):
        with pytest.raises(SpecValidationError):
            TsneConfig(perplexity=30.0).validate(n=30)

    def test_perplexity_above_largest_entropy(self):
        TsneConfig(perplexity=4.0).validate(n=5)
        with pytest.raises(SpecValidationError) as excinfo:
            TsneConfig(perplexity=4.5).validate(n=5)
        assert excinfo.value.field == 'perplexity'

    def test_from_dict_ignores_unknown(self, caplog):
        with caplog.at_level(logging.WARNING):
            config = TsneConfig.from_dict({'perplexity': 12.0, 'theta': 0.5})
        assert config.perplexity == 12.0
        assert 'theta' in caplog.text

    def test_warm_start(self):
        rerun = TsneConfig(perplexity=12.0).warm_start(100)
        assert rerun.max_iter == 100
        assert rerun.exaggeration_iters == 0
        assert rerun.init == 'given'
        assert rerun.initial_momentum == rerun.final_momentum
        assert rerun.perplexity == 12.0


@pytest.mark.unit
@pytest.mark.core
class TestRunTsne:
    """Test the gradient-descent optimizer."""

    def test_deterministic(self, two_cluster_matrix):
        config = TsneConfig(perplexity=8.0, max_iter=150, seed=3)
        first, second = run_tsne(two_cluster_matrix, config), run_tsne(two_cluster_matrix, config)
        assert first.Y.tobytes() == second.Y.tobytes()

    def test_random_init_depends_on_seed(self, two_cluster_matrix):
        first = run_tsne(two_cluster_matrix, TsneConfig(perplexity=8.0, max_iter=50, init='random', seed=1))
        second = run_tsne(two_cluster_matrix, TsneConfig(perplexity=8.0, max_iter=50, init='random', seed=2))
        assert not np.array_equal(first.Y, second.Y)

    def test_loss_decreases_and_embedding_is_centered(self, small_embedding):
        trace = small_embedding.loss_trace
        assert trace[0][0] == 0 and trace[-1][0] == 400
        assert trace[-1][1] < trace[0][1]
        assert small_embedding.loss == pytest.approx(trace[-1][1])
        np.testing.assert_allclose(small_embedding.Y.mean(axis=0), 0.0, atol=1e-8)

    def test_clusters_are_separated(self, small_embedding, two_cluster_matrix):
        Y, labels = small_embedding.Y, two_cluster_matrix.labels
        distances = cdist(Y, Y)
        np.fill_diagonal(distances, np.inf)
        nearest = np.argmin(distances, axis=1)
        assert np.mean(labels[nearest] == labels) >= 0.9

    def test_warm_start_keeps_layout(self, small_embedding, small_context):
        rerun = run_tsne(small_context.similarity, small_embedding.config.warm_start(20), init=small_embedding.Y)
        change = np.linalg.norm(rerun.Y - small_embedding.Y) / np.linalg.norm(small_embedding.Y)
        assert change < 0.1

    def test_given_init_checks(self, two_cluster_matrix):
        with pytest.raises(SpecValidationError):
            run_tsne(two_cluster_matrix, TsneConfig(perplexity=8.0, max_iter=5, init='given'))
        with pytest.raises(SpecValidationError):
            run_tsne(two_cluster_matrix, TsneConfig(perplexity=8.0, max_iter=5), init=np.zeros((3, 2)))

    def test_zero_iterations_returns_start(self, two_cluster_matrix):
        start = np.random.Generator(np.random.PCG64(0)).normal(size=(40, 2))
        embedding = run_tsne(two_cluster_matrix, TsneConfig(perplexity=8.0, max_iter=0), init=start)
        np.testing.assert_array_equal(embedding.Y, start)
        assert len(embedding.loss_trace) == 1

    def test_pca_dim_is_applied(self):
        matrix = sample_gmm(two_gmm_spec(half_separation=3.0, dim=6), 30, seed=0)
        embedding = run_tsne(matrix, TsneConfig(perplexity=5.0, max_iter=30, pca_dim=3))
        assert embedding.Y.shape == (30, 2)

    def test_input_matrix_or_array(self, two_cluster_matrix):
        config = TsneConfig(perplexity=8.0, max_iter=20)
        from_matrix = run_tsne(two_cluster_matrix, config)
        from_array = run_tsne(two_cluster_matrix.values, config)
        np.testing.assert_array_equal(from_matrix.Y, from_array.Y)
