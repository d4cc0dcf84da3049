"""
Law-of-large-numbers trajectories

Skorohod reflection at zero, the closed-form fluid path, a fourth-order
integrator for the reflected fluid ODE and the many-server fluid limit.
"""
import logging
import math
from typing import Optional

import numpy as np

from core.errors import NegativeStart, GridTooCoarse, ManyServerX0TooSmall
from core.models import ModelParams, Horizon, Trajectory, ReflectedPath

logger = logging.getLogger(__name__)


def uniform_grid(horizon: Horizon, grid_size: int) -> np.ndarray:
    """Uniform time grid with grid_size points on [0, T]"""
    if grid_size < 2:
        raise GridTooCoarse("a trajectory grid needs at least two points", {"grid_size": grid_size})
    grid = np.linspace(0.0, horizon.T, grid_size)
    grid[-1] = horizon.T
    return grid


def skorohod_map(psi: np.ndarray, grid: Optional[np.ndarray] = None) -> ReflectedPath:
    """
    One-dimensional reflection of psi at zero

    values[k] = psi[k] - min(0, min(psi[:k+1])) and pushing[k] is the
    subtracted term, computed in one forward pass.

    Args:
        psi: Sampled path with psi[0] >= 0
        grid: Matching time grid (defaults to 0, 1, 2, ...)

    Returns:
        ReflectedPath

    Raises:
        NegativeStart: if psi[0] < 0
    """
    psi = np.asarray(psi, dtype=float)
    if psi.size == 0:
        raise GridTooCoarse("empty path", {"size": 0})
    if psi[0] < 0:
        raise NegativeStart(f"reflection needs psi[0] >= 0, got {psi[0]}", {"psi0": float(psi[0])})
    if grid is None:
        grid = np.arange(psi.size, dtype=float)

    pushing = 0.0 - np.minimum(np.minimum.accumulate(psi), 0.0)
    values = psi + pushing
    return ReflectedPath(grid=grid, values=values, pushing=pushing)


def _lln_closed_form(lam: float, mu: float, theta: float, x0: float, t: np.ndarray):
    drift = lam - mu
    level = drift / theta
    decay = -np.expm1(-theta * t)
    xi = level + (x0 - level) * np.exp(-theta * t)
    zeta = drift * t + (x0 - level) * decay
    return xi, zeta


def lln_trajectory(params: ModelParams, horizon: Horizon, grid_size: int) -> Trajectory:
    """
    Closed-form fluid path (zero-cost trajectory)

    For ManyServer with x0 >= 1 the single-server formula at x0 - 1 is
    shifted up by one. Arrival rates below the service rate need the
    reflection and are delegated to fluid_integrate.
    """
    grid = uniform_grid(horizon, grid_size)
    if params.lambda_ < params.mu:
        logger.debug("lambda < mu: closed form does not apply, integrating the reflected ODE")
        return fluid_integrate(params, horizon, grid_size)

    if params.many_server:
        if params.x0 < 1:
            raise ManyServerX0TooSmall(
                f"many-server closed form needs x0 >= 1, got {params.x0}", {"x0": params.x0})
        xi, zeta = _lln_closed_form(params.lambda_, params.mu, params.theta, params.x0 - 1.0, grid)
        xi = xi + 1.0
    else:
        xi, zeta = _lln_closed_form(params.lambda_, params.mu, params.theta, params.x0, grid)

    xi[0] = params.x0
    zeta[0] = 0.0
    return Trajectory(grid=grid, xi=xi, zeta=zeta)


def _drift(params: ModelParams, x: float) -> float:
    lam, mu, theta = params.lambda_, params.mu, params.theta
    if params.many_server:
        return lam - mu * min(x, 1.0) - theta * max(x - 1.0, 0.0)
    return lam - mu - theta * x


def _reneging_rate(params: ModelParams, x: float) -> float:
    if params.many_server:
        return params.theta * max(x - 1.0, 0.0)
    return params.theta * max(x, 0.0)


def fluid_integrate(params: ModelParams, horizon: Horizon, grid_size: int) -> Trajectory:
    """
    RK4 integration of the fluid ODE for (x, y)

    Single-server steps are followed by a projection onto [0, inf) (the
    reflection acting as operator splitting); the many-server ODE has no
    reflection term.
    """
    grid = uniform_grid(horizon, grid_size)
    h = grid[1] - grid[0]
    xs = np.empty(grid_size)
    ys = np.empty(grid_size)
    xs[0], ys[0] = params.x0, 0.0
    pushed = 0.0

    def rhs(x):
        return _drift(params, x), _reneging_rate(params, x)

    for k in range(grid_size - 1):
        x, y = xs[k], ys[k]
        k1x, k1y = rhs(x)
        k2x, k2y = rhs(x + 0.5 * h * k1x)
        k3x, k3y = rhs(x + 0.5 * h * k2x)
        k4x, k4y = rhs(x + h * k3x)
        x_next = x + h / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
        y_next = y + h / 6.0 * (k1y + 2.0 * k2y + 2.0 * k3y + k4y)
        if not params.many_server and x_next < 0.0:
            pushed += -x_next
            x_next = 0.0
        xs[k + 1], ys[k + 1] = x_next, y_next

    if pushed > 0:
        logger.debug(f"Reflection at zero absorbed {pushed:.6g} of negative drift")
    return Trajectory(grid=grid, xi=xs, zeta=ys)


def gamma_star(params: ModelParams, horizon: Horizon) -> float:
    """
    Zero-cost reneging rate over [0, T]

    gamma*_T = (lambda - mu) + (1 - e^{-theta T}) / T * (x0 - (lambda - mu) / theta),
    with x0 replaced by x0 - 1 in the many-server case.
    """
    drift = params.lambda_ - params.mu
    x0 = params.x0 - 1.0 if params.many_server else params.x0
    T = horizon.T
    return drift + (-math.expm1(-params.theta * T)) / T * (x0 - drift / params.theta)
