"""
Test suite for nescope.

This package contains tests for all pipeline components:
- Unit tests for affinities, t-SNE, LOO problems, scores and metrics
- Finite-difference checks of every analytic gradient and Hessian
- Command-line tests of exit codes and output files
- Slow reproduction checks (deselected by default)
"""

import os
import sys

# Add the project root to Python path for testing
project_root = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
if project_root not in sys.path:
    sys.path.insert(0, project_root)
