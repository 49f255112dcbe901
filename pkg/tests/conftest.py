"""Pytest configuration and shared fixtures for layerbvp tests"""

import sys
from pathlib import Path

import pytest

# Add the repository root to the Python path so the package imports without installation
sys.path.insert(0, str(Path(__file__).parent.parent))

from layerbvp.dynamics import Params
from layerbvp.hpreal import MACHINE, extended
from layerbvp.integrate import IntegratorConfig


@pytest.fixture
def machine():
    """The IEEE double kernel"""
    return MACHINE


@pytest.fixture
def ext50():
    """A 50-digit extended kernel"""
    return extended(50)


@pytest.fixture
def params():
    """Params at eps = 0.1, where all three branches exist"""
    return Params(0.1)


@pytest.fixture
def tight_cfg():
    """Integrator settings for conservation and endpoint checks"""
    return IntegratorConfig(rel_tol=1e-12, abs_tol=1e-14)


@pytest.fixture
def temp_output_dir(tmp_path):
    """Create a temporary output directory for tests"""
    output_dir = tmp_path / "test_output"
    output_dir.mkdir()
    return output_dir


@pytest.fixture
def clean_env(monkeypatch):
    """Remove the LAYERBVP_* variables for the duration of a test"""
    for name in ("LAYERBVP_DIGITS", "LAYERBVP_OUTPUT_DIR", "LAYERBVP_WORKERS"):
        monkeypatch.delenv(name, raising=False)
    return monkeypatch


@pytest.fixture(scope="session")
def branches_eps01():
    """All three branches at eps = 0.1, solved once per session"""
    from layerbvp.asymptotics import Branch
    from layerbvp.shooting import find_branch

    cfg = IntegratorConfig(rel_tol=1e-12, abs_tol=1e-14)
    return {b: find_branch(b, Params(0.1), cfg, MACHINE) for b in Branch}


# Markers configuration
def pytest_configure(config):
    """Register custom markers"""
    config.addinivalue_line(
        "markers", "unit: Unit tests for individual functions"
    )
    config.addinivalue_line(
        "markers", "integration: Acceptance checks over whole computations"
    )
    config.addinivalue_line(
        "markers", "slow: Tests that take a long time"
    )
    config.addinivalue_line(
        "markers", "extended: Tests in the 50-digit kernel"
    )
