"""
Integration tests for nescope.

The fast tests check that the layers work together (configuration, files,
embedding, scores, metrics). Tests marked ``slow`` reproduce the reported
phenomena at full scale and are deselected by default; run them with
``pytest -m slow``.
"""

import os

import numpy as np
import pytest
from scipy.stats import spearmanr

from core.affinity import AffinityContext
from core.landscape import (
    estimate_field_parameters, field_alignment, interpolation_trajectory, landscape, minima_count_sweep,
)
from core.loo import make_loo_problem
from core.loo_solver import SolverStrategy, solve_loo_map
from core.pipeline_app import PipelineApp
from core.tsne import TsneConfig, embed_context, run_tsne
from core.validation import validate_loo
from data.csv_io import load_csv, save_csv
from data.generators import PRESETS, SwissRollSpec, sample_gmm, sample_swiss_roll
from data.spec_files import parse_generator_spec
from metrics.clustering import db_index, wcdr, wilks_lambda
from metrics.entropy import entropy_difference
from metrics.report import compute_metrics
from metrics.statistics import cluster_center_spearman, majority_significant
from scores.perplexity_selection import select_perplexity
from scores.perturbation import PerturbationConfig, embedding_gap_points, perturbation_scores_batch
from scores.singularity import singularity_scores


def write_file(directory, name, text):
    path = os.path.join(directory, name)
    with open(path, 'w') as f:
        f.write(text)
    return path


def midpoint(matrix):
    values, labels = matrix.values, matrix.labels
    return 0.5 * (values[labels == 0].mean(axis=0) + values[labels == 1].mean(axis=0))


def cluster_distance(Y, labels):
    return float(np.linalg.norm(Y[labels == 0].mean(axis=0) - Y[labels == 1].mean(axis=0)))


def pairwise_spread(points):
    points = np.asarray(points)
    return float(np.max(np.linalg.norm(points[:, None, :] - points[None, :, :], axis=2)))


@pytest.fixture(scope='module')
def separated_pair():
    """Well-separated two-component data with perplexity-5 and perplexity-50 embeddings."""
    matrix = sample_gmm(PRESETS['gmm2-separated'](), 300, seed=0)
    runs = {}
    for perplexity in (5.0, 50.0):
        context = AffinityContext.build(matrix, perplexity)
        runs[perplexity] = (context, embed_context(context, TsneConfig(perplexity=perplexity, seed=0)).Y)
    return matrix, runs


@pytest.mark.integration
class TestConfigurationIntegration:
    """Test the configuration chain as seen by the pipeline."""

    def test_priority_chain(self, temp_dir):
        """Flags > environment > JSON > defaults."""
        config_file = write_file(temp_dir, 'config.json',
                                 '{"tsne": {"perplexity": 20, "max_iter": 300, "learning_rate": 100.0}}')
        env_file = write_file(temp_dir, '.env', 'NESCOPE_PERPLEXITY=12\nNESCOPE_MAX_ITER=200\n')
        app = PipelineApp(config_file, {'tsne.max_iter': 50, 'output.dir': temp_dir}, env_file=env_file)
        tsne = app.pipeline_config.tsne
        assert tsne.max_iter == 50
        assert tsne.perplexity == 12.0
        assert tsne.learning_rate == 100.0
        assert tsne.exaggeration == 12.0

    def test_generator_spec_file(self, temp_dir):
        spec = write_file(temp_dir, 'roll.json', '{"type": "swiss_roll", "n": 40, "seed": 5}')
        app = PipelineApp(os.path.join(temp_dir, 'absent.json'),
                          {'data.generator': spec, 'data.n': 30, 'output.dir': temp_dir},
                          env_file=os.path.join(temp_dir, 'absent.env'))
        matrix = app.pipeline_config.load_matrix()
        assert (matrix.n, matrix.d) == (30, 3)


@pytest.mark.integration
class TestPipelineIntegration:
    """Test data files, embeddings, scores and metrics together."""

    def test_csv_export_gives_identical_embedding(self, temp_dir):
        matrix = sample_gmm(PRESETS['gmm5'](), 60, seed=3)
        reloaded = load_csv(save_csv(matrix, os.path.join(temp_dir, 'gmm5.csv')), labels=True)
        config = TsneConfig(perplexity=10.0, max_iter=200, seed=1)
        first, second = run_tsne(matrix, config), run_tsne(reloaded, config)
        assert first.Y.tobytes() == second.Y.tobytes()

    def test_scores_feed_metrics(self, small_context, small_embedding, two_cluster_matrix):
        Y = small_embedding.Y
        singularity = singularity_scores(Y, small_context.similarity, 'tsne')
        cfg = PerturbationConfig(directions=1, strategy=SolverStrategy(grid_resolution=4, cluster_count=4,
                                                                       frozen_starts=8))
        perturbation = perturbation_scores_batch(small_context, Y, cfg, indices=np.arange(6))
        assert perturbation.computed.sum() == 6
        assert np.all(perturbation.values[:6] >= 0.0)

        report = compute_metrics(two_cluster_matrix.values, Y, two_cluster_matrix.labels)
        report.add_vector('singularity', singularity.values)
        assert set(report.vectors) == {'neighborhood_preservation', 'entropy_difference', 'singularity'}
        tests = cluster_center_spearman(Y, two_cluster_matrix.labels, singularity.values)
        assert len(tests) == 2

    def test_loo_validation_is_small(self):
        source = parse_generator_spec({'preset': 'gmm2', 'n': 80, 'seed': 0})
        report = validate_loo(source, TsneConfig(perplexity=10.0, max_iter=500, seed=0), trials=2,
                              rerun_iterations=100)
        assert report.mean < 0.5


@pytest.mark.integration
@pytest.mark.slow
class TestReproduction:
    """Full-scale phenomena; each takes seconds to minutes."""

    def test_loo_validation_band_and_trend(self):
        source = parse_generator_spec({'preset': 'gmm2', 'n': 1000, 'seed': 0})
        config = TsneConfig(perplexity=25.0, seed=0)
        small = validate_loo(source, config, trials=20, n=1000, seed=0, threads=4)
        large = validate_loo(source, config, trials=20, n=5000, seed=0, threads=4)
        assert 0.02 <= small.mean <= 0.15
        assert large.mean < small.mean

    def test_overconfidence_discontinuity(self, separated_pair):
        matrix, runs = separated_pair
        context, Y = runs[50.0]
        distance = cluster_distance(Y, matrix.labels)

        solution = solve_loo_map(make_loo_problem(context, Y, midpoint(matrix), 'exact'))
        assert solution.minima_count >= 2
        assert pairwise_spread([m.y for m in solution.minima]) > 0.5 * distance

        values, labels = matrix.values, matrix.labels
        trajectory = interpolation_trajectory(context, Y, values[labels == 0].mean(axis=0),
                                              values[labels == 1].mean(axis=0), steps=51, threads=4)
        lo, hi = trajectory.max_jump_interval
        assert trajectory.max_jump > 0.5 * distance
        assert hi - lo <= 0.02 + 1e-12

    def test_fracture_minima_decrease_with_perplexity(self, separated_pair):
        matrix, runs = separated_pair
        x_new = midpoint(matrix)
        counts, variances = {}, {}
        for perplexity, (context, Y) in runs.items():
            counts[perplexity] = landscape(make_loo_problem(context, Y, x_new, 'exact'), resolution=60).minima_count
            values, labels = matrix.values, matrix.labels
            trajectory = interpolation_trajectory(context, Y, values[labels == 0].mean(axis=0),
                                                  values[labels == 1].mean(axis=0), steps=51, threads=4)
            # Unevenness relative to the embedding's own scale
            variances[perplexity] = trajectory.step_variance / cluster_distance(Y, labels) ** 2
        assert counts[5.0] > counts[50.0]
        assert variances[5.0] > variances[50.0]

    def test_minima_sweep_follows_perplexity(self, separated_pair):
        matrix, _ = separated_pair
        counts = dict(minima_count_sweep(matrix, [5, 50], midpoint(matrix), TsneConfig(seed=0), resolution=60))
        assert counts[5.0] >= counts[50.0] >= 1

    def test_gradient_field_matches_saddle_model(self, separated_pair):
        matrix, runs = separated_pair
        context, Y = runs[50.0]
        problem = make_loo_problem(context, Y, midpoint(matrix), 'exact')
        alignment = field_alignment(problem, estimate_field_parameters(Y, matrix.labels, problem.u))
        assert alignment.mean_cosine > 0.9
        assert alignment.hyperbolic_agreement > 0.9

    def test_elbow_improves_clustering(self):
        matrix = sample_gmm(PRESETS['gmm8'](), 800, seed=0)
        curve = select_perplexity(matrix, [5, 10, 20, 30, 50, 75, 100], TsneConfig(seed=0), threads=4)
        low, chosen = curve.embeddings[5.0].Y, curve.embeddings[curve.chosen].Y
        assert curve.chosen > 5.0
        for metric in (db_index, wcdr, wilks_lambda):
            assert metric(chosen, matrix.labels) < metric(low, matrix.labels)
        assert wcdr(chosen, matrix.labels) <= 0.5 * wcdr(low, matrix.labels)

        # Singular points scatter at low perplexity and concentrate on cluster edges at the elbow
        low_tests = cluster_center_spearman(low, matrix.labels, curve.reports[5.0].values)
        chosen_tests = cluster_center_spearman(chosen, matrix.labels, curve.reports[curve.chosen].values)
        assert not majority_significant(low_tests)
        assert majority_significant(chosen_tests)

    def test_perturbation_scores_follow_entropy_difference(self):
        matrix = sample_gmm(PRESETS['gmm5'](), 700, seed=0)
        context = AffinityContext.build(matrix, 30.0)
        Y = embed_context(context, TsneConfig(seed=0)).Y
        report = perturbation_scores_batch(context, Y, PerturbationConfig(), threads=4)
        difference = entropy_difference(matrix.values, Y, matrix.labels).values
        keep = np.isfinite(report.values)
        assert spearmanr(report.values[keep], difference[keep])[0] > 0.4

    def test_swiss_roll_break_points_score_highest(self):
        matrix = sample_swiss_roll(SwissRollSpec(1000, seed=0))
        context = AffinityContext.build(matrix, 150.0)
        Y = embed_context(context, TsneConfig(perplexity=150.0, seed=0)).Y
        gap = embedding_gap_points(Y, matrix.coordinate)
        report = perturbation_scores_batch(context, Y, PerturbationConfig(), threads=4)
        top_decile = np.nanquantile(report.values, 0.9)
        assert np.all(report.values[gap] >= top_decile)

    def test_second_approximation_ranks_like_exact(self):
        matrix = sample_gmm(PRESETS['gmm50d'](), 1000, seed=0)
        context = AffinityContext.build(matrix, 30.0)
        Y = embed_context(context, TsneConfig(seed=0)).Y
        indices = np.random.Generator(np.random.PCG64(0)).choice(1000, 100, replace=False)
        exact = perturbation_scores_batch(context, Y, PerturbationConfig(approximation='exact'), indices, threads=4)
        approx = perturbation_scores_batch(context, Y, PerturbationConfig(approximation='approx2'), indices,
                                           threads=4)
        assert spearmanr(exact.values[indices], approx.values[indices])[0] > 0.95
