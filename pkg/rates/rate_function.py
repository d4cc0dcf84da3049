"""
Pointwise rate-function machinery for the queue with reneging

ell, the local cost L(x, p, q) and its minimizing controls, the explicit
decay rate C(gamma) with its tilt root z(gamma), and the path cost by
quadrature.
"""
import logging
import math
from typing import Tuple, Union

import numpy as np
from scipy.special import xlogy

from core.errors import NegativeArgument, BoundaryInfeasible, GridTooCoarse
from core.validation import require_supercritical
from core.models import (
    ModelParams, LocalCostInput, TargetRate, DecayRateResult, Trajectory, CostReport,
)

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]

COMPONENTS = ("arrival", "service", "reneging")


def ell(x: ArrayLike) -> ArrayLike:
    """
    x log x - x + 1, with ell(0) = 1

    Args:
        x: Nonnegative scalar or array

    Returns:
        Value of the same shape

    Raises:
        NegativeArgument: if any entry is negative
    """
    arr = np.asarray(x, dtype=float)
    if np.any(arr < 0):
        raise NegativeArgument(f"ell is defined on [0, inf), got {np.min(arr)}")
    # xlogy(0, 0) == 0
    out = xlogy(arr, arr) - arr + 1.0
    if np.ndim(x) == 0:
        return float(out)
    return out


def _effective_rates(params: ModelParams, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Service rate and reneging level seen at queue length x"""
    if params.many_server:
        return params.mu * np.minimum(x, 1.0), np.maximum(x - 1.0, 0.0)
    return np.full_like(x, params.mu), x


def flow_controls(lam: float, mu_eff: np.ndarray, s: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Solve lam*phi1 - mu_eff*phi2 = s with phi1*phi2 = 1

    Each branch uses the cancellation-free form of the two roots.
    """
    phi1 = np.empty_like(s)
    phi2 = np.empty_like(s)
    busy = mu_eff > 0
    root = np.hypot(s, 2.0 * np.sqrt(lam * mu_eff))
    up = busy & (s >= 0)
    down = busy & (s < 0)
    phi1[up] = (root[up] + s[up]) / (2.0 * lam)
    phi2[up] = 2.0 * lam / (root[up] + s[up])
    phi1[down] = 2.0 * mu_eff[down] / (root[down] - s[down])
    phi2[down] = (root[down] - s[down]) / (2.0 * mu_eff[down])
    # no service capacity: all net flow comes from arrivals
    idle = ~busy
    phi1[idle] = np.maximum(s[idle], 0.0) / lam
    phi2[idle] = 1.0
    return phi1, phi2


def cost_terms(params: ModelParams, x: ArrayLike, p: ArrayLike, q: ArrayLike) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Arrival, service and reneging parts of L(x, p, q), vectorized

    Infeasible points (reneging without a reneging population, or negative
    net flow without service capacity) carry +inf in the affected term.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    p = np.broadcast_to(np.asarray(p, dtype=float), x.shape)
    q = np.broadcast_to(np.asarray(q, dtype=float), x.shape)
    lam, theta = params.lambda_, params.theta
    mu_eff, level = _effective_rates(params, x)
    s = p + q

    phi1, phi2 = flow_controls(lam, mu_eff, s)
    arrival = lam * ell(phi1)
    service = mu_eff * ell(phi2)
    arrival = np.where((mu_eff == 0) & (s < 0), np.inf, arrival)

    rate = theta * level
    with np.errstate(divide="ignore", invalid="ignore"):
        reneging = np.where(
            rate > 0,
            xlogy(q, q / np.where(rate > 0, rate, 1.0)) - q + rate,
            np.where(q > 0, np.inf, 0.0),
        )
    return arrival, service, reneging


def local_cost(params: ModelParams, point: LocalCostInput) -> float:
    """
    L(x, p, q): cheapest instantaneous tilt moving the queue at slope p while
    reneging at slope q from level x. +inf when x = 0 and q > 0.
    """
    arrival, service, reneging = cost_terms(params, point.x, point.p, point.q)
    return float(arrival[0] + service[0] + reneging[0])


def optimal_controls(params: ModelParams, point: LocalCostInput) -> Tuple[float, float, float]:
    """
    Minimizing control triple (phi1, phi2, phi3) at (x, p, q)

    Raises:
        BoundaryInfeasible: x = 0 with q > 0
    """
    x, p, q = point.x, point.p, point.q
    mu_eff, level = _effective_rates(params, np.array([x]))
    if level[0] == 0:
        if q > 0:
            raise BoundaryInfeasible(
                f"reneging slope {q} requires a positive reneging population at x={x}",
                {"x": x, "q": q},
            )
        if not params.many_server:
            # empty queue: balanced flow lam*phi1 = mu*phi2
            return (math.sqrt(params.mu / params.lambda_), math.sqrt(params.lambda_ / params.mu), 1.0)
    phi1, phi2 = flow_controls(params.lambda_, mu_eff, np.array([p + q]))
    phi3 = q / (params.theta * level[0]) if level[0] > 0 else 1.0
    return float(phi1[0]), float(phi2[0]), float(phi3)


def z_of_gamma(params: ModelParams, target: TargetRate) -> float:
    """Positive root of lambda/z - mu*z = gamma"""
    lam, mu, gamma = params.lambda_, params.mu, target.gamma
    return 2.0 * lam / (gamma + math.sqrt(gamma * gamma + 4.0 * lam * mu))


def decay_rate(params: ModelParams, target: TargetRate) -> DecayRateResult:
    """
    C(gamma) = lambda(1 - 1/z) + mu(1 - z) - gamma log z

    theta does not enter.
    """
    require_supercritical(params)
    lam, mu, gamma = params.lambda_, params.mu, target.gamma
    z = z_of_gamma(params, target)
    c = lam * (1.0 - 1.0 / z) + mu * (1.0 - z) - gamma * math.log(z)
    # C >= 0; clip rounding below zero
    return DecayRateResult(c_gamma=max(c, 0.0), z_gamma=z)


def segment_slopes(traj: Trajectory) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Segment widths and forward-difference slopes of xi and zeta"""
    dt = np.diff(traj.grid)
    return dt, np.diff(traj.xi) / dt, np.diff(traj.zeta) / dt


def path_cost(params: ModelParams, traj: Trajectory) -> CostReport:
    """
    Trapezoidal approximation of the integral of L along a sampled path

    Slopes are forward differences on each segment; L is evaluated at both
    segment endpoints with the segment slopes and averaged.

    Raises:
        GridTooCoarse: fewer than two grid points
    """
    if traj.size < 2:
        raise GridTooCoarse("path cost needs at least two grid points", {"size": traj.size})
    if abs(traj.xi[0] - params.x0) > 1e-9 * max(1.0, params.x0):
        logger.warning(f"Trajectory starts at {traj.xi[0]}, params say x0={params.x0}")

    dt, p, q = segment_slopes(traj)
    left = cost_terms(params, traj.xi[:-1], p, q)
    right = cost_terms(params, traj.xi[1:], p, q)

    components = {}
    for name, lo, hi in zip(COMPONENTS, left, right):
        components[name] = float(np.sum(0.5 * dt * (lo + hi)))
    total = sum(components.values())
    if not math.isfinite(total):
        logger.debug("Path touches the empty-queue reneging boundary; cost is infinite")
        total = math.inf
    return CostReport(total=total, normalized=total / traj.T, components=components)
