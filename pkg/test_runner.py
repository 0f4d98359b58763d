#!/usr/bin/env python3
"""
Test runner for nescope.

Runs the pytest suite with coverage reporting over the nescope packages.
"""

import sys
import os
import subprocess
import argparse
from pathlib import Path

PACKAGES = ["config", "core", "data", "scores", "metrics", "commands", "utils"]

TEST_FILES = {
    "config": ["tests/test_config.py"],
    "core": ["tests/test_core_components.py", "tests/test_tsne.py"],
    "data": ["tests/test_data.py"],
    "loo": ["tests/test_loo.py"],
    "scores": ["tests/test_scores.py"],
    "metrics": ["tests/test_metrics.py"],
    "cli": ["tests/test_commands.py"],
}


# Colors for terminal output
class Colors:
    HEADER = '\033[95m'
    OKBLUE = '\033[94m'
    OKGREEN = '\033[92m'
    WARNING = '\033[93m'
    FAIL = '\033[91m'
    ENDC = '\033[0m'


def print_colored(text, color):
    """Print colored text to terminal."""
    print(f"{color}{text}{Colors.ENDC}")


def check_dependencies():
    """Check if all required runtime and testing dependencies are installed."""
    print_colored("Checking dependencies...", Colors.OKBLUE)

    # (distribution name, import name)
    required_packages = [
        ('numpy', 'numpy'),
        ('scipy', 'scipy'),
        ('scikit-learn', 'sklearn'),
        ('tqdm', 'tqdm'),
        ('pandas', 'pandas'),
        ('psutil', 'psutil'),
        ('pytest', 'pytest'),
        ('pytest-cov', 'pytest_cov'),
        ('pytest-mock', 'pytest_mock'),
    ]

    missing_packages = []

    for package, module in required_packages:
        try:
            __import__(module)
            print(f"  ✓ {package}")
        except ImportError:
            missing_packages.append(package)
            print_colored(f"  ✗ {package} (missing)", Colors.FAIL)

    if missing_packages:
        print_colored("\nMissing dependencies detected!", Colors.WARNING)
        print("Please install missing packages:")
        print(f"  pip install {' '.join(missing_packages)}")
        print("\nOr install everything:")
        print("  pip install -r requirements.txt")
        return False

    print_colored("✓ All dependencies are installed", Colors.OKGREEN)
    return True


def run_tests(test_type="all", verbose=False, coverage=True, report_format="terminal"):
    """Run the test suite with specified options."""
    cmd = ["python", "-m", "pytest"]

    if test_type == "unit":
        cmd.extend(["tests/", "-m", "unit"])
    elif test_type == "integration":
        cmd.extend(["tests/test_integration.py", "-m", "integration"])
    elif test_type == "slow":
        cmd.extend(["tests/", "-m", "slow"])
    elif test_type == "all":
        cmd.extend(["tests/"])
    else:
        cmd.extend(TEST_FILES[test_type])

    if coverage:
        cmd.extend([f"--cov={package}" for package in PACKAGES])
        cmd.append("--cov-report=term-missing")

        if report_format == "html":
            cmd.extend(["--cov-report=html:htmlcov"])
        elif report_format == "xml":
            cmd.extend(["--cov-report=xml"])

    if verbose:
        cmd.extend(["-v", "-s"])
    else:
        cmd.extend(["-q"])

    print_colored(f"\nRunning {test_type} tests...", Colors.OKBLUE)
    print(f"Command: {' '.join(cmd)}")

    env = os.environ.copy()
    env.setdefault('NESCOPE_THREADS', '2')

    try:
        result = subprocess.run(cmd, env=env, capture_output=False)
        return result.returncode == 0
    except KeyboardInterrupt:
        print_colored("\nTests interrupted by user", Colors.WARNING)
        return False
    except Exception as e:
        print_colored(f"\nError running tests: {e}", Colors.FAIL)
        return False


def validate_application():
    """Check that the package modules exist and compile."""
    print_colored("\nValidating application structure...", Colors.OKBLUE)

    required_files = ["app.py"] + sorted(
        str(path) for package in PACKAGES for path in Path(package).glob("*.py")
    )

    missing_files = [path for path in required_files if not Path(path).exists()]
    for path in missing_files:
        print_colored(f"  ✗ {path} (missing)", Colors.FAIL)
    if missing_files:
        return False

    for file_path in required_files:
        try:
            with open(file_path, 'r') as f:
                compile(f.read(), file_path, 'exec')
        except SyntaxError as e:
            print_colored(f"  ✗ {file_path} - Syntax Error: {e}", Colors.FAIL)
            return False

    print_colored(f"✓ {len(required_files)} Python files have valid syntax", Colors.OKGREEN)
    return True


def main():
    """Main test runner function."""
    parser = argparse.ArgumentParser(description="Test runner for nescope")

    parser.add_argument(
        "--type",
        choices=["all", "unit", "integration", "slow"] + sorted(TEST_FILES),
        default="all",
        help="Type of tests to run (default: all)"
    )
    parser.add_argument("--verbose", "-v", action="store_true", help="Verbose output")
    parser.add_argument("--no-coverage", action="store_true", help="Skip coverage reporting")
    parser.add_argument(
        "--report",
        choices=["terminal", "html", "xml"],
        default="terminal",
        help="Coverage report format (default: terminal)"
    )
    parser.add_argument(
        "--validate-only",
        action="store_true",
        help="Only validate application structure, don't run tests"
    )

    args = parser.parse_args()

    print_colored("=" * 60, Colors.HEADER)
    print_colored("NESCOPE TEST SUITE", Colors.HEADER)
    print_colored("=" * 60, Colors.HEADER)

    if not validate_application():
        print_colored("\nApplication validation failed!", Colors.FAIL)
        sys.exit(1)

    if args.validate_only:
        sys.exit(0)

    if not check_dependencies():
        sys.exit(1)

    success = run_tests(
        test_type=args.type,
        verbose=args.verbose,
        coverage=not args.no_coverage,
        report_format=args.report
    )

    if success:
        print_colored("\nAll tests passed!", Colors.OKGREEN)
    else:
        print_colored("\nSome tests failed!", Colors.FAIL)

    sys.exit(0 if success else 1)


if __name__ == "__main__":
    main()
