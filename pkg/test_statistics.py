"""
Tests for Monte Carlo statistics and the simplex projections
"""
import numpy as np
import pytest

from utils.projections import project_simplex, project_weighted_simplex, project_floor
from utils.statistics import RunningMoments, normal_ci, interval, intervals_overlap


def test_running_moments_match_numpy():
    values = np.random.default_rng(1).normal(size=1000)
    moments = RunningMoments()
    for v in values:
        moments.push(v)
    assert moments.mean == pytest.approx(values.mean(), rel=1e-12)
    assert moments.variance == pytest.approx(values.var(ddof=1), rel=1e-10)
    assert moments.std_error == pytest.approx(values.std(ddof=1) / np.sqrt(1000), rel=1e-10)


def _moments(values):
    moments = RunningMoments()
    for v in values:
        moments.push(v)
    return moments


def test_merge_equals_single_pass():
    values = np.random.default_rng(2).exponential(size=2500)
    merged = RunningMoments()
    for chunk in np.array_split(values, 7):
        merged.merge(_moments(chunk))
    whole = _moments(values)
    assert merged.count == whole.count
    assert merged.mean == pytest.approx(whole.mean, rel=1e-12)
    assert merged.variance == pytest.approx(whole.variance, rel=1e-10)


def test_empty_moments():
    moments = RunningMoments().merge(RunningMoments())
    assert moments.count == 0
    assert moments.std_error == 0.0
    assert moments.ess == 0.0


def test_ess_of_weights():
    assert _moments([1.0, 1.0, 0.0, 2.0]).ess == pytest.approx(16.0 / 6.0)
    assert _moments([0.0, 0.0, 0.0]).ess == 0.0
    assert _moments([3.0] * 5).ess == pytest.approx(5.0)


def test_normal_ci_and_intervals():
    assert normal_ci(1.0) == pytest.approx(1.959964, abs=1e-6)
    assert interval(1.0, 0.5) == (0.5, 1.5)
    assert intervals_overlap((0.0, 1.0), (1.0, 2.0))
    assert not intervals_overlap((0.0, 1.0), (1.5, 2.0))


def test_project_simplex_keeps_feasible_points():
    v = np.array([0.2, 0.3, 0.5])
    assert np.allclose(project_simplex(v, 1.0), v)


def test_project_simplex_matches_definition():
    v = np.array([2.0, -1.0, 0.5, 0.1])
    q = project_simplex(v, 1.0)
    assert q.sum() == pytest.approx(1.0)
    assert np.all(q >= 0)
    assert np.allclose(q, [1.0, 0.0, 0.0, 0.0])


def test_project_simplex_zero_total():
    assert np.all(project_simplex(np.array([1.0, 2.0]), 0.0) == 0.0)


def test_weighted_simplex_restores_mass():
    q = project_weighted_simplex(np.array([3.0, 0.1, 0.7, 5.0]), total=2.0, dt=0.25)
    assert 0.25 * q.sum() == pytest.approx(2.0, rel=1e-15)
    assert np.all(q >= 0)


def test_project_floor():
    assert np.array_equal(project_floor(np.array([-1.0, 0.5]), 0.0), [0.0, 0.5])
