"""
Tests for the local cost, controls, decay rate, heuristic and path cost
"""
import math

import numpy as np
import pytest

from core.errors import LambdaLessThanMu, NegativeArgument, BoundaryInfeasible, GridTooCoarse, ParameterError
from core.models import ModelParams, LocalCostInput, TargetRate, Trajectory, Horizon
from fluid.fluid_limit import lln_trajectory
from rates.heuristic import heuristic_oracle, heuristic_tilt
from rates.rate_function import (
    ell, local_cost, optimal_controls, z_of_gamma, decay_rate, path_cost, cost_terms,
)


@pytest.mark.parametrize("x, expected", [(1.0, 0.0), (0.0, 1.0), (math.e, 1.0)])
def test_ell_values(x, expected):
    assert ell(x) == pytest.approx(expected, abs=1e-15)


def test_ell_is_vectorized_and_nonnegative():
    values = ell(np.linspace(0.0, 5.0, 101))
    assert values.shape == (101,)
    assert np.all(values >= 0)


def test_ell_rejects_negative():
    with pytest.raises(NegativeArgument):
        ell(-0.1)


def test_local_cost_zero_on_fluid_drift(base_params):
    assert local_cost(base_params, LocalCostInput(x=1.0, p=0.0, q=1.0)) == pytest.approx(0.0, abs=1e-14)


def test_local_cost_infinite_at_empty_queue(base_params):
    assert local_cost(base_params, LocalCostInput(x=0.0, p=0.0, q=0.5)) == math.inf


def test_local_cost_reference_value(base_params):
    assert local_cost(base_params, LocalCostInput(x=1.0, p=0.0, q=2.0)) == pytest.approx(0.5460029, abs=1e-6)


def test_local_cost_matches_brute_force(base_params):
    # minimize over phi1 with phi2 and phi3 fixed by the constraints
    phi1 = np.linspace(1.0, 2.0, 200001)
    phi2 = 2.0 * phi1 - 2.0
    keep = phi2 > 0
    values = 2.0 * ell(phi1[keep]) + ell(phi2[keep]) + ell(2.0)
    assert local_cost(base_params, LocalCostInput(x=1.0, p=0.0, q=2.0)) == pytest.approx(values.min(), abs=1e-6)


def test_optimal_controls_empty_queue():
    params = ModelParams(**{"lambda": 4.0, "mu": 1.0, "theta": 1.0})
    assert optimal_controls(params, LocalCostInput(x=0.0, p=0.0, q=0.0)) == pytest.approx((0.5, 2.0, 1.0))


def test_optimal_controls_fluid_point(base_params):
    assert optimal_controls(base_params, LocalCostInput(x=1.0, p=0.0, q=1.0)) == pytest.approx((1.0, 1.0, 1.0))


def test_optimal_controls_tilted_point(base_params):
    phi = optimal_controls(base_params, LocalCostInput(x=1.0, p=0.0, q=2.0))
    assert phi == pytest.approx((1.3660254, 0.7320508, 2.0), abs=1e-7)
    assert phi[0] * phi[1] == pytest.approx(1.0, abs=1e-14)


def test_optimal_controls_boundary_infeasible(base_params):
    with pytest.raises(BoundaryInfeasible):
        optimal_controls(base_params, LocalCostInput(x=0.0, p=0.0, q=0.5))


def test_many_server_cost_is_shifted_single_server(base_params):
    many = base_params.replace(mode="ManyServer")
    single = cost_terms(base_params, 0.7, 0.3, 1.1)
    shifted = cost_terms(many, 1.7, 0.3, 1.1)
    for a, b in zip(single, shifted):
        assert a[0] == pytest.approx(b[0], rel=1e-12)


@pytest.mark.parametrize("lam, mu, gamma, expected", [
    (2.0, 1.0, 2.0, math.sqrt(3.0) - 1.0),
    (2.0, 1.0, 0.0, math.sqrt(2.0)),
    (3.0, 3.0, 0.0, 1.0),
])
def test_z_of_gamma(lam, mu, gamma, expected):
    params = ModelParams(**{"lambda": lam, "mu": mu, "theta": 1.0})
    z = z_of_gamma(params, TargetRate(gamma=gamma))
    assert z == pytest.approx(expected, rel=1e-12)
    assert lam / z - mu * z == pytest.approx(gamma, abs=1e-12)


@pytest.mark.parametrize("gamma, expected, tol", [
    (1.0, 0.0, 1e-14),
    (2.0, 0.1597084, 1e-6),
    (0.0, 3.0 - 2.0 * math.sqrt(2.0), 1e-12),
])
def test_decay_rate_values(base_params, gamma, expected, tol):
    assert decay_rate(base_params, TargetRate(gamma=gamma)).c_gamma == pytest.approx(expected, abs=tol)


def test_decay_rate_independent_of_theta(base_params):
    values = {decay_rate(base_params.replace(theta=theta), TargetRate(gamma=2.5)).c_gamma
              for theta in (0.1, 1.0, 7.0)}
    assert len(values) == 1


def test_decay_rate_convex_with_minimum_at_drift(base_params):
    gammas = np.linspace(0.0, 4.0, 81)
    values = np.array([decay_rate(base_params, TargetRate(gamma=g)).c_gamma for g in gammas])
    assert np.all(np.diff(values, 2) >= -1e-12)
    assert gammas[np.argmin(values)] == pytest.approx(1.0)


@pytest.mark.parametrize("gamma, expected, tol", [
    (2.0, 0.1597084, 1e-5),
    (1.0, 0.0, 1e-8),
    (0.0, 3.0 - 2.0 * math.sqrt(2.0), 1e-5),
])
def test_heuristic_matches_decay_rate(base_params, gamma, expected, tol):
    assert heuristic_oracle(base_params, TargetRate(gamma=gamma)) == pytest.approx(expected, abs=tol)


def test_heuristic_keeps_reneging_rate(base_params):
    optimum = heuristic_tilt(base_params, TargetRate(gamma=2.0), grid_resolution=200, search_theta=True)
    assert optimum.theta_star == pytest.approx(base_params.theta, rel=1e-3)
    assert optimum.mu_star == pytest.approx(math.sqrt(3.0) - 1.0, abs=1e-4)
    assert optimum.lambda_star == pytest.approx(optimum.mu_star + 2.0)


def test_heuristic_grid_too_small(base_params):
    with pytest.raises(ParameterError):
        heuristic_oracle(base_params, TargetRate(gamma=2.0), grid_resolution=10)


def test_path_cost_of_fluid_path_is_zero(base_params):
    traj = lln_trajectory(base_params, Horizon(T=10.0), 10000)
    assert path_cost(base_params, traj).total <= 1e-6


def test_path_cost_constant_path(base_params):
    grid = np.linspace(0.0, 1.0, 1001)
    traj = Trajectory(grid=grid, xi=np.ones_like(grid), zeta=2.0 * grid)
    report = path_cost(base_params, traj)
    assert report.total == pytest.approx(0.5460029, abs=1e-4)
    assert sum(report.components.values()) == pytest.approx(report.total)


def test_path_cost_single_point(base_params):
    with pytest.raises(GridTooCoarse):
        path_cost(base_params, Trajectory(grid=[0.0], xi=[1.0], zeta=[0.0]))


def test_path_cost_infinite_when_reneging_from_empty(empty_params):
    grid = np.linspace(0.0, 1.0, 11)
    traj = Trajectory(grid=grid, xi=np.zeros_like(grid), zeta=grid)
    assert path_cost(empty_params, traj).total == math.inf


def test_midpoint_convexity_of_ell_and_local_cost(base_params):
    rng = np.random.default_rng(0)
    a, b = rng.uniform(0.0, 5.0, 1000), rng.uniform(0.0, 5.0, 1000)
    assert np.all(ell(0.5 * (a + b)) <= 0.5 * (ell(a) + ell(b)) + 1e-9)

    x1, x2 = rng.uniform(0.1, 3.0, (2, 1000))
    p1, p2 = rng.uniform(-2.0, 2.0, (2, 1000))
    q1, q2 = rng.uniform(0.0, 3.0, (2, 1000))

    def total(x, p, q):
        return sum(cost_terms(base_params, x, p, q))

    mid = total(0.5 * (x1 + x2), 0.5 * (p1 + p2), 0.5 * (q1 + q2))
    assert np.all(mid <= 0.5 * (total(x1, p1, q1) + total(x2, p2, q2)) + 1e-9)


def test_rate_only_quantities_reject_subcritical_rates():
    params = ModelParams(**{"lambda": 1.0, "mu": 2.0, "theta": 1.0})
    with pytest.raises(LambdaLessThanMu):
        decay_rate(params, TargetRate(gamma=0.5))
    with pytest.raises(LambdaLessThanMu):
        heuristic_tilt(params, TargetRate(gamma=0.5))


def test_heuristic_tracks_closed_form_on_gamma_grid(base_params):
    drift = base_params.lambda_ - base_params.mu
    for gamma in np.linspace(0.0, 4.0 * drift + 1.0, 20):
        target = TargetRate(gamma=float(gamma))
        assert heuristic_oracle(base_params, target) == pytest.approx(decay_rate(base_params, target).c_gamma, abs=1e-5)
