"""
Tests for singularity scores (t-SNE, UMAP, LargeVis), perturbation scores,
pre-screening, score reports and perplexity selection.
"""

import json
import logging
import os

import numpy as np
import pytest

from core.cache import ResultCache
from core.errors import LooSolveError, NumericalError, SpecValidationError
from core.loo_solver import SolverStrategy
from core.tsne import TsneConfig, total_gradient
from data.csv_io import read_table
from scores.perplexity_selection import elbow_index, embed_at, select_perplexity
from scores.perturbation import (
    PerturbationConfig, embedding_gap_points, input_diameter, perturbation_directions, perturbation_score,
    perturbation_scores_batch, resolve_length,
)
from scores.report import ScoreReport, dichotomize, json_number, top_fraction_jaccard
from scores.screening import knee_radius, periphery_points
from scores.singularity import (
    Hessian2, edge_matrix, largevis_hessians, largevis_loss, scores_from_hessians, singularity_hessian_largevis,
    singularity_hessian_tsne, singularity_hessian_umap, singularity_scores, umap_loss,
)

UMAP_A, UMAP_B = 1.577, 0.895


def numerical_hessian(function, Y, index, step=1e-4):
    """Second central differences of a scalar function of Y with respect to row ``index``."""
    H = np.zeros((2, 2))
    for a in range(2):
        for b in range(2):
            total = 0.0
            for sa, sb, sign in ((1, 1, 1), (1, -1, -1), (-1, 1, -1), (-1, -1, 1)):
                moved = Y.copy()
                moved[index, a] += sa * step
                moved[index, b] += sb * step
                total += sign * function(moved)
            H[a, b] = total / (4.0 * step * step)
    return H


def fast_perturbation(**overrides):
    settings = dict(directions=1, strategy=SolverStrategy(grid_resolution=4, cluster_count=4, frozen_starts=8))
    settings.update(overrides)
    return PerturbationConfig(**settings)


@pytest.mark.unit
@pytest.mark.scores
class TestHessians:
    """Test analytic per-point Hessians against finite differences."""

    def test_closed_form_eigenvalues(self):
        hessian = Hessian2(3.0, 1.0, -2.0)
        np.testing.assert_allclose(hessian.eigenvalues, np.linalg.eigvalsh(hessian.matrix))
        assert hessian.lambda_min < hessian.lambda_max

    def test_from_matrix_symmetrizes(self):
        hessian = Hessian2.from_matrix(np.array([[1.0, 2.0], [4.0, 5.0]]))
        assert hessian.b == 3.0

    def test_tsne_hessian(self, random_embedding, random_similarities, finite_differences):
        index = 3

        def row_gradient(y):
            moved = random_embedding.copy()
            moved[index] = y
            return total_gradient(moved, random_similarities)[index]

        numeric = finite_differences.jacobian(row_gradient, random_embedding[index])
        analytic = singularity_hessian_tsne(random_embedding, random_similarities, index).matrix
        np.testing.assert_allclose(analytic, numeric, rtol=1e-5, atol=1e-9)

    def test_umap_hessian(self, random_embedding, random_similarities):
        index = 5
        numeric = numerical_hessian(lambda Y: umap_loss(Y, random_similarities, UMAP_A, UMAP_B),
                                    random_embedding, index)
        analytic = singularity_hessian_umap(random_embedding, random_similarities, index, UMAP_A, UMAP_B).matrix
        np.testing.assert_allclose(analytic, numeric, rtol=1e-4, atol=1e-5)

    def test_largevis_hessian(self, random_embedding, random_similarities):
        edges = np.array([[0, 1], [1, 2], [2, 7], [7, 9], [4, 7], [3, 11]])
        index = 7
        numeric = numerical_hessian(lambda Y: largevis_loss(Y, random_similarities, edges, 7.0),
                                    random_embedding, index)
        analytic = singularity_hessian_largevis(random_embedding, random_similarities, edges, 7.0, index).matrix
        np.testing.assert_allclose(analytic, numeric, rtol=1e-4, atol=1e-5)

    def test_largevis_without_repulsion(self, random_embedding, random_similarities):
        edges = np.array([[0, 1], [0, 2]])
        index = 0
        numeric = numerical_hessian(lambda Y: largevis_loss(Y, random_similarities, edges, 0.0),
                                    random_embedding, index)
        analytic = largevis_hessians(random_embedding, random_similarities, edges, 0.0, [index])[0]
        np.testing.assert_allclose(analytic, numeric, rtol=1e-4, atol=1e-6)

    def test_edge_matrix(self):
        E = edge_matrix([[0, 1], [2, 2]], 3)
        assert E[0, 1] and E[1, 0]
        assert not E[2, 2]
        assert E.sum() == 2

    def test_invalid_parameters(self, random_embedding, random_similarities):
        with pytest.raises(SpecValidationError):
            singularity_hessian_umap(random_embedding, random_similarities, 0, -1.0, UMAP_B)
        with pytest.raises(SpecValidationError):
            largevis_hessians(random_embedding, random_similarities, [[0, 1]], -1.0)
        with pytest.raises(IndexError):
            singularity_hessian_tsne(random_embedding, random_similarities, 12)


@pytest.mark.unit
@pytest.mark.scores
class TestSingularityScores:
    """Test singularity score reports."""

    def test_scores_from_hessians(self):
        hessians = np.array([np.diag([2.0, 4.0]), np.diag([-1.0, 3.0]), np.diag([0.0, 1.0])])
        scores, flags = scores_from_hessians(hessians)
        assert scores[0] == pytest.approx(0.5)
        assert np.isposinf(scores[1]) and np.isposinf(scores[2])
        assert flags.tolist() == [False, True, True]

    def test_tsne_scores(self, small_embedding):
        report = singularity_scores(small_embedding.Y, small_embedding.similarity)
        assert report.kind == 'singularity'
        assert report.n == 40
        assert report.config['perplexity'] == 8.0
        finite = report.values[np.isfinite(report.values)]
        assert np.all(finite > 0)
        hessian = singularity_hessian_tsne(small_embedding.Y, small_embedding.similarity, 0)
        if hessian.lambda_min > 0:
            assert report.values[0] == pytest.approx(1.0 / hessian.lambda_min)

    def test_umap_scores(self, random_embedding, random_similarities):
        report = singularity_scores(random_embedding, random_similarities, 'umap', a=UMAP_A, b=UMAP_B)
        assert report.config['a'] == UMAP_A
        assert report.values.shape == (12,)

    def test_largevis_coincident_pair_is_recorded(self, random_embedding, random_similarities):
        Y = random_embedding.copy()
        Y[1] = Y[0]
        report = singularity_scores(Y, random_similarities, 'largevis', edges=[[2, 3]], gamma=7.0)
        assert set(report.errors) == {0, 1}
        assert np.isnan(report.values[0]) and np.isnan(report.values[1])
        assert not report.computed[0]
        assert np.all(~np.isnan(report.values[2:]))

    def test_missing_method_parameters(self, random_embedding, random_similarities):
        with pytest.raises(SpecValidationError):
            singularity_scores(random_embedding, random_similarities, 'umap')
        with pytest.raises(SpecValidationError):
            singularity_scores(random_embedding, random_similarities, 'largevis', gamma=7.0)
        with pytest.raises(SpecValidationError):
            singularity_scores(random_embedding, random_similarities, 'pacmap')


@pytest.mark.unit
@pytest.mark.scores
class TestScoreReport:
    """Test score reports and their summaries."""

    @pytest.fixture
    def report(self):
        values = [1.0, 5.0, 3.0, np.nan, np.inf, 2.0]
        return ScoreReport(values, 'singularity', flags=[False, False, False, False, True, False],
                           masked=[False, False, False, True, False, False])

    def test_validation(self):
        with pytest.raises(ValueError):
            ScoreReport([1.0, -1.0], 'singularity')
        with pytest.raises(ValueError):
            ScoreReport([1.0], 'curvature')
        with pytest.raises(ValueError):
            ScoreReport([1.0, 2.0], 'perturbation', masked=[True])

    def test_top_fraction(self, report):
        assert report.top_fraction_indices(0.5).tolist() == [1, 2]
        assert report.top_fraction_indices(0.01).tolist() == [1]
        mean, infinite = report.top_fraction_mean(0.5)
        assert mean == 4.0
        assert infinite == 1
        with pytest.raises(ValueError):
            report.top_fraction_indices(0.0)

    def test_dichotomize(self, report):
        marked = dichotomize(report, quantile=0.75)
        assert marked.tolist() == [False, True, False, False, True, False]

    def test_jaccard(self, report):
        assert top_fraction_jaccard(report, report, 0.5) == 1.0
        other = ScoreReport([9.0, 0.0, 0.0, 0.0, 7.0, 8.0], 'singularity')
        assert top_fraction_jaccard(report, other, 0.34) == 0.0

    def test_json_numbers(self):
        assert json_number(float('nan')) is None
        assert json_number(float('inf')) == 'inf'
        assert json_number(-float('inf')) == '-inf'
        assert json_number(np.float64(1.5)) == 1.5

    def test_save(self, report, temp_dir):
        json_path = report.save_json(os.path.join(temp_dir, 'r', 'scores.json'))
        with open(json_path) as f:
            document = json.load(f)
        assert document['scores'][3] is None
        assert document['scores'][4] == 'inf'
        assert document['masked'][3] is True
        rows = read_table(report.save_csv(os.path.join(temp_dir, 'scores.csv')))
        assert rows['index'].tolist() == [0, 1, 2, 3, 4, 5]
        assert rows['flag'].iat[4] == 1


@pytest.mark.unit
@pytest.mark.scores
class TestScreening:
    """Test DBSCAN pre-screening."""

    def test_outliers_are_periphery(self):
        rng = np.random.Generator(np.random.PCG64(0))
        blob = rng.normal(scale=0.5, size=(200, 2))
        outliers = np.array([[8.0, 8.0], [-8.0, 7.0], [9.0, -9.0]])
        result = periphery_points(np.vstack([blob, outliers]), min_samples=10)
        assert np.all(result.periphery[-3:])
        assert 0.0 < result.masked_fraction < 1.0
        assert result.eps > 0

    def test_explicit_eps(self):
        points = np.random.Generator(np.random.PCG64(1)).normal(size=(50, 2))
        assert periphery_points(points, min_samples=5, eps=100.0).periphery.sum() == 0

    def test_knee_radius_of_identical_spacing(self):
        points = np.column_stack([np.arange(20.0), np.zeros(20)])
        assert knee_radius(points, min_samples=2) == 1.0


@pytest.mark.unit
@pytest.mark.scores
class TestPerturbation:
    """Test perturbation scores."""

    def test_config_validation(self):
        with pytest.raises(SpecValidationError):
            PerturbationConfig(length=0.0)
        with pytest.raises(SpecValidationError):
            PerturbationConfig(directions=0)
        with pytest.raises(SpecValidationError):
            PerturbationConfig(approximation='approx9')
        assert PerturbationConfig().strategy.frozen_starts == 32

    def test_directions(self, small_context):
        directions = perturbation_directions(small_context, 2)
        assert [label for label, _ in directions] == ['+e1', '-e1', '+e2', '-e2']
        np.testing.assert_allclose(directions[0][1], -directions[1][1])
        np.testing.assert_allclose(np.linalg.norm(directions[2][1]), 1.0)

    def test_default_length(self, small_context, two_cluster_matrix):
        length = resolve_length(small_context, PerturbationConfig())
        assert length == pytest.approx(0.1 * input_diameter(two_cluster_matrix.values))
        assert resolve_length(small_context, PerturbationConfig(length=0.7)) == 0.7

    def test_single_score(self, small_context, small_embedding):
        score = perturbation_score(small_context, small_embedding.Y, 4, fast_perturbation())
        assert np.isfinite(score) and score >= 0
        with pytest.raises(IndexError):
            perturbation_score(small_context, small_embedding.Y, 40, fast_perturbation())

    def test_batch_subset_and_threads(self, small_context, small_embedding):
        cfg = fast_perturbation()
        serial = perturbation_scores_batch(small_context, small_embedding.Y, cfg, indices=[0, 9])
        pooled = perturbation_scores_batch(small_context, small_embedding.Y, cfg, indices=[0, 9], threads=2)
        assert serial.kind == 'perturbation'
        assert np.flatnonzero(serial.computed).tolist() == [0, 9]
        assert np.isnan(serial.values[1])
        np.testing.assert_array_equal(serial.values[[0, 9]], pooled.values[[0, 9]])
        assert serial.config['n'] == 40

    def test_failures_are_recorded(self, small_context, small_embedding, mocker, caplog):
        mocker.patch('scores.perturbation.solve_loo_map', side_effect=LooSolveError('no start converged'))
        with caplog.at_level(logging.WARNING):
            report = perturbation_scores_batch(small_context, small_embedding.Y, fast_perturbation(), indices=[2, 3])
        assert set(report.errors) == {2, 3}
        assert 'direction +e1' in report.errors[2]
        assert np.all(np.isnan(report.values))
        assert 'failed for point 2' in caplog.text

    def test_prescreen_masks_core_points(self, small_context, small_embedding, mocker):
        mocker.patch('scores.perturbation.perturbation_score', return_value=1.0)
        report = perturbation_scores_batch(small_context, small_embedding.Y,
                                           fast_perturbation(prescreen=True, min_samples=5))
        screening = periphery_points(small_embedding.Y, 5)
        np.testing.assert_array_equal(report.masked, ~screening.periphery)
        np.testing.assert_array_equal(report.values[~report.masked], 1.0)

    def test_embedding_gap_points(self):
        coordinate = np.array([0.3, 0.1, 0.2, 0.4])
        Y = np.array([[10.0, 0.0], [0.0, 0.0], [1.0, 0.0], [11.0, 0.0]])
        assert sorted(embedding_gap_points(Y, coordinate).tolist()) == [0, 2]


@pytest.mark.unit
@pytest.mark.scores
class TestPerplexitySelection:
    """Test the FI-curve elbow."""

    def test_log_elbow(self):
        assert elbow_index([8.0, 4.0, 2.0, 1.9, 1.8]) == 2

    def test_linear_elbow(self):
        assert elbow_index([10.0, 5.0, 4.0, 3.5, 3.2], rule='linear') == 1

    def test_invalid_curves(self):
        with pytest.raises(SpecValidationError):
            elbow_index([1.0, 2.0])
        with pytest.raises(SpecValidationError):
            elbow_index([1.0, 0.0, 2.0])
        with pytest.raises(SpecValidationError):
            elbow_index([3.0, 2.0, 1.0], rule='kneedle')

    @pytest.mark.parametrize('bad', [float('nan'), float('inf')])
    def test_non_finite_curve(self, bad):
        with pytest.raises(NumericalError):
            elbow_index([1.0, bad, 0.5, 0.4], rule='linear')

    def test_candidate_without_finite_scores_is_skipped(self, two_cluster_matrix, mocker, caplog):
        mocker.patch.object(ScoreReport, 'top_fraction_mean',
                            side_effect=[(1.0, 0), (float('nan'), 3), (0.5, 0), (0.4, 0)])
        with caplog.at_level(logging.WARNING):
            curve = select_perplexity(two_cluster_matrix, [3, 6, 9, 12], TsneConfig(max_iter=20))
        assert curve.skipped == [6.0]
        assert curve.perplexities.tolist() == [3.0, 9.0, 12.0]
        assert 'no finite singularity scores' in caplog.text

    def test_candidates_validated(self, two_cluster_matrix):
        config = TsneConfig(max_iter=10)
        with pytest.raises(SpecValidationError):
            select_perplexity(two_cluster_matrix, [5, 10], config)
        with pytest.raises(SpecValidationError):
            select_perplexity(two_cluster_matrix, [5, 10, 8], config)

    def test_selection_skips_failed_candidates(self, two_cluster_matrix, temp_dir, caplog):
        config = TsneConfig(max_iter=150)
        with caplog.at_level(logging.WARNING):
            curve = select_perplexity(two_cluster_matrix, [3, 6, 12, 45], config)
        assert curve.skipped == [45.0]
        assert curve.perplexities.tolist() == [3.0, 6.0, 12.0]
        assert curve.chosen in (3.0, 6.0, 12.0)
        assert set(curve.embeddings) == {3.0, 6.0, 12.0}
        assert 'Skipping perplexity 45' in caplog.text
        rows = read_table(curve.save_csv(os.path.join(temp_dir, 'fi_curve.csv')))
        assert rows['chosen'].sum() == 1

    def test_too_few_successes(self, two_cluster_matrix):
        with pytest.raises(NumericalError):
            select_perplexity(two_cluster_matrix, [6, 45, 50], TsneConfig(max_iter=20))

    def test_embed_at_uses_cache(self, two_cluster_matrix):
        cache = ResultCache()
        config = TsneConfig(max_iter=20)
        first = embed_at(two_cluster_matrix, config, 6.0, cache=cache)
        second = embed_at(two_cluster_matrix, config, 6.0, cache=cache)
        assert first is second
        assert first.config.perplexity == 6.0
        assert len(cache.get_all_keys()) == 1
