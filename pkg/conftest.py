"""
Shared pytest fixtures
"""
import sys
from pathlib import Path

import pytest

# Add project root to path
sys.path.insert(0, str(Path(__file__).parent))

from core.models import ModelParams, Horizon, TargetRate, ServerMode
from storage.artifact_manager import artifact_manager


@pytest.fixture
def base_params():
    """lambda=2, mu=1, theta=1, x0=1: the LLN rest point"""
    return ModelParams(**{"lambda": 2.0, "mu": 1.0, "theta": 1.0, "x0": 1.0})


@pytest.fixture
def empty_params():
    return ModelParams(**{"lambda": 2.0, "mu": 1.0, "theta": 1.0, "x0": 0.0})


@pytest.fixture
def many_params():
    return ModelParams(**{"lambda": 2.0, "mu": 1.0, "theta": 1.0, "x0": 2.0, "mode": ServerMode.MANY})


@pytest.fixture
def horizon10():
    return Horizon(T=10.0)


@pytest.fixture
def target2():
    return TargetRate(gamma=2.0)


@pytest.fixture
def output_dir(tmp_path):
    """Point the global artifact manager at a temporary directory"""
    previous = artifact_manager.output_dir
    artifact_manager.configure(str(tmp_path))
    yield tmp_path
    artifact_manager.output_dir = previous
