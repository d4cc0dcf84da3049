"""
Tilted-rates heuristic for the reneging decay rate

Minimizes lambda*ell(lambda*/lambda) + mu*ell(mu*/mu) + theta*y*ell(theta*/theta)
subject to lambda* = mu* + theta* y and theta* y = gamma. This is an
optimizer-based cross-check of the closed form in rate_function.
"""
import logging
import math

import numpy as np
from scipy.optimize import minimize, minimize_scalar

from core.errors import ParameterError
from core.models import ModelParams, TargetRate, HeuristicOptimum
from core.validation import require_supercritical
from rates.rate_function import ell

logger = logging.getLogger(__name__)

MIN_GRID_RESOLUTION = 100


def _flow_cost(params: ModelParams, gamma: float, mu_star):
    lam, mu = params.lambda_, params.mu
    return lam * ell((mu_star + gamma) / lam) + mu * ell(mu_star / mu)


def _reneging_cost(params: ModelParams, gamma: float, theta_star):
    # y = gamma / theta*, so theta*y*ell(theta*/theta) = (gamma/theta*) * theta * ell(theta*/theta)
    if gamma == 0:
        return np.zeros_like(np.asarray(theta_star, dtype=float))
    return gamma * params.theta / theta_star * ell(theta_star / params.theta)


def _refine_1d(f, grid: np.ndarray, values: np.ndarray) -> float:
    """Golden-section refinement around the grid minimizer"""
    k = int(np.argmin(values))
    lo = grid[max(k - 1, 0)]
    hi = grid[min(k + 1, grid.size - 1)]
    if 0 < k < grid.size - 1 and values[k] < values[k - 1] and values[k] < values[k + 1]:
        try:
            res = minimize_scalar(f, bracket=(lo, grid[k], hi), method="golden",
                                  options={"xtol": 1e-12})
            return float(res.x)
        except ValueError:
            logger.debug("Golden bracket rejected, falling back to bounded search")
    res = minimize_scalar(f, bounds=(lo, hi), method="bounded", options={"xatol": 1e-12})
    return float(res.x)


def heuristic_tilt(params: ModelParams, target: TargetRate, grid_resolution: int = 1000,
                   search_theta: bool = False) -> HeuristicOptimum:
    """
    Full optimizer of the tilted-rates heuristic

    Args:
        params: Model rates
        target: Reneging rate gamma
        grid_resolution: Grid points per searched coordinate (>= 100)
        search_theta: Also search theta* on a log grid instead of fixing theta* = theta

    Returns:
        HeuristicOptimum with the optimal (lambda*, mu*, theta*) and value

    Raises:
        LambdaLessThanMu, RateNonpositive, ParameterError
    """
    require_supercritical(params)
    if grid_resolution < MIN_GRID_RESOLUTION:
        raise ParameterError(f"grid_resolution must be >= {MIN_GRID_RESOLUTION}",
                             {"grid_resolution": grid_resolution})
    gamma = target.gamma
    upper = params.lambda_ + params.mu + gamma
    mu_grid = np.linspace(0.0, upper, grid_resolution)

    def flow(m):
        return float(_flow_cost(params, gamma, max(float(m), 0.0)))

    mu_star = _refine_1d(flow, mu_grid, _flow_cost(params, gamma, mu_grid))
    theta_star = params.theta
    value = flow(mu_star)

    if search_theta and gamma > 0:
        theta_grid = params.theta * np.logspace(-1.0, 1.0, grid_resolution)
        mm, tt = np.meshgrid(mu_grid, theta_grid, indexing="ij")
        surface = _flow_cost(params, gamma, mm) + _reneging_cost(params, gamma, tt)
        i, j = np.unravel_index(int(np.argmin(surface)), surface.shape)

        def joint(v):
            m, t = max(v[0], 0.0), max(v[1], 1e-300)
            return float(_flow_cost(params, gamma, m) + _reneging_cost(params, gamma, t))

        res = minimize(joint, x0=np.array([mu_grid[i], theta_grid[j]]), method="Nelder-Mead",
                       bounds=[(0.0, upper), (theta_grid[0], theta_grid[-1])],
                       options={"xatol": 1e-10, "fatol": 1e-14, "maxiter": 20000})
        mu_star, theta_star = float(res.x[0]), float(res.x[1])
        value = float(res.fun)
        logger.debug(f"2-D heuristic search: mu*={mu_star:.10g}, theta*={theta_star:.10g} "
                     f"(theta={params.theta})")

    return HeuristicOptimum(
        value=max(value, 0.0),
        lambda_star=mu_star + gamma,
        mu_star=mu_star,
        theta_star=theta_star,
    )


def heuristic_oracle(params: ModelParams, target: TargetRate, grid_resolution: int = 1000) -> float:
    """Per-unit-time decay rate from the heuristic, with theta* = theta"""
    optimum = heuristic_tilt(params, target, grid_resolution)
    if not math.isfinite(optimum.value):
        raise ParameterError("heuristic objective is not finite", {"value": optimum.value})
    return optimum.value
