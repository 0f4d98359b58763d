"""
Pytest configuration and shared fixtures for the nescope test suite.
"""

import os
import tempfile
import json

import numpy as np
import pytest

from core.affinity import AffinityContext
from core.tsne import TsneConfig, embed_context
from data.csv_io import save_csv
from data.generators import InputMatrix, sample_gmm, two_gmm_spec


# Test configuration and fixtures
@pytest.fixture
def temp_dir():
    """Create a temporary directory for test files."""
    with tempfile.TemporaryDirectory() as tmpdir:
        yield tmpdir


@pytest.fixture
def mock_env_file(temp_dir):
    """Create a mock .env file for testing."""
    env_content = """
# Test environment configuration
NESCOPE_THREADS=3
NESCOPE_SEED=11
NESCOPE_LOG_LEVEL=debug
NESCOPE_PERPLEXITY=12.5
NESCOPE_PROGRESS=false
"""
    env_path = os.path.join(temp_dir, '.env')
    with open(env_path, 'w') as f:
        f.write(env_content.strip())
    return env_path


@pytest.fixture
def mock_config_json(temp_dir):
    """Create a mock config.json file for testing."""
    config_data = {
        "tsne": {
            "perplexity": 20,
            "max_iter": 300
        },
        "perturbation": {
            "directions": 2
        },
        "selection": {
            "candidates": [5, 10, 15, 20]
        },
        "app": {
            "seed": 4
        }
    }
    config_path = os.path.join(temp_dir, 'config.json')
    with open(config_path, 'w') as f:
        json.dump(config_data, f)
    return config_path


@pytest.fixture
def missing_config(temp_dir):
    """Paths of a config file and .env file that do not exist."""
    return os.path.join(temp_dir, 'absent.json'), os.path.join(temp_dir, 'absent.env')


@pytest.fixture
def two_cluster_matrix():
    """40 labeled points from two well separated Gaussians in 2-D."""
    return sample_gmm(two_gmm_spec(half_separation=3.0), 40, seed=1)


@pytest.fixture
def random_embedding():
    """A generic 12×2 layout for derivative checks."""
    rng = np.random.Generator(np.random.PCG64(5))
    return rng.normal(scale=2.0, size=(12, 2))


@pytest.fixture
def random_similarities():
    """A symmetric 12×12 similarity matrix with zero diagonal summing to one."""
    rng = np.random.Generator(np.random.PCG64(6))
    V = rng.uniform(size=(12, 12))
    V = V + V.T
    np.fill_diagonal(V, 0.0)
    return V / V.sum()


@pytest.fixture
def small_context(two_cluster_matrix):
    """Affinity context of the two-cluster data at perplexity 8."""
    return AffinityContext.build(two_cluster_matrix, perplexity=8.0)


@pytest.fixture
def small_embedding(small_context):
    """A converged t-SNE embedding of the two-cluster data."""
    config = TsneConfig(perplexity=8.0, max_iter=400, seed=0)
    return embed_context(small_context, config)


@pytest.fixture
def labeled_csv(temp_dir, two_cluster_matrix):
    """The two-cluster data written as a CSV with a label column."""
    return str(save_csv(two_cluster_matrix, os.path.join(temp_dir, 'points.csv')))


def numerical_gradient(function, x, step=1e-6):
    """Central-difference gradient of a scalar function of a vector."""
    x = np.asarray(x, dtype=np.float64)
    gradient = np.zeros_like(x)
    for index in np.ndindex(x.shape):
        shift = np.zeros_like(x)
        shift[index] = step
        gradient[index] = (function(x + shift) - function(x - shift)) / (2.0 * step)
    return gradient


def numerical_jacobian(function, x, step=1e-6):
    """Central-difference Jacobian of a vector function; row j is d f / d x_j."""
    x = np.asarray(x, dtype=np.float64)
    columns = []
    for j in range(x.size):
        shift = np.zeros_like(x)
        shift.flat[j] = step
        columns.append((np.asarray(function(x + shift)) - np.asarray(function(x - shift))) / (2.0 * step))
    return np.array(columns)


@pytest.fixture
def finite_differences():
    """Expose the finite-difference helpers to tests."""
    class Helpers:
        gradient = staticmethod(numerical_gradient)
        jacobian = staticmethod(numerical_jacobian)
    return Helpers


@pytest.fixture
def input_matrix():
    """Factory for InputMatrix objects from nested lists."""
    def build(values, labels=None):
        return InputMatrix(np.asarray(values, dtype=np.float64), labels)
    return build


@pytest.fixture(autouse=True)
def reset_environment():
    """Reset environment variables before each test."""
    # Store original env vars
    original_env = dict(os.environ)
    for name in [key for key in os.environ if key.startswith('NESCOPE_')]:
        del os.environ[name]

    yield

    # Restore original env vars and clear test vars
    os.environ.clear()
    os.environ.update(original_env)
