"""
Euler-Lagrange minimizer of the terminal-reneging problem

Builds the optimal queue / reneging pair (xi, zeta) and the tilted controls
from a solved tilt constant, evaluates its cost in closed form and checks
the optimality side conditions. Also carries the gamma = 0 path, the
many-server reduction and the long-horizon boundary constant.
"""
import logging
import math
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Tuple

import numpy as np
from scipy.integrate import trapezoid

from core.errors import OptimalityViolated, HorizonTooShort, ConfigInvalid, ManyServerX0TooSmall
from core.models import (
    ModelParams, Horizon, TargetRate, TiltParameters, Trajectory, CostReport,
    OptimalityReport, ServerMode,
)
from core.validation import validate
from config.settings import get_solver_setting
from fluid.fluid_limit import uniform_grid
from minimizer.tilt_solver import solve_tilt
from rates.rate_function import ell, decay_rate, z_of_gamma, COMPONENTS

logger = logging.getLogger(__name__)

PRODUCT_TOL = 1e-12
TERMINAL_PHI1_TOL = 1e-12
FLOW_TOL = 1e-6
TERMINAL_ZETA_TOL = 1e-8


@dataclass(frozen=True)
class MinimizerProfile:
    """Analytic values of the minimizer on a time grid"""
    t: np.ndarray
    xi: np.ndarray
    zeta: np.ndarray
    dxi: np.ndarray
    dzeta: np.ndarray
    phi1: np.ndarray
    phi2: np.ndarray
    phi3: np.ndarray


def minimizer_profile(params: ModelParams, horizon: Horizon, tilt: TiltParameters,
                      t: np.ndarray) -> MinimizerProfile:
    """
    Evaluate the minimizer, its derivatives and controls at times t

    All exponentials enter through u_t = a e^{-theta (T - t)} and
    e^{-theta t}, both bounded by max(|a|, 1).
    """
    lam, mu, theta, x0 = params.lambda_, params.mu, params.theta, params.x0
    T = horizon.T
    a, A, B = tilt.a, tilt.A, tilt.B
    t = np.asarray(t, dtype=float)

    decay = np.exp(-theta * t)
    one_minus_decay = -np.expm1(-theta * t)
    u = a * np.exp(-theta * (T - t))
    one_minus_A = 1.0 - A

    lam_cap = decay * (1.0 - u) / one_minus_A
    log_lam_cap = -theta * t + np.log1p(-u) - math.log1p(-A)

    xi = (lam_cap * x0
          + (lam * B / theta) * one_minus_decay * (1.0 - u)
          - (mu / (theta * B)) * one_minus_decay / one_minus_A)
    zeta = ((lam * B / theta) * (theta * t + np.expm1(-theta * t))
            + (mu / (theta * B)) * (log_lam_cap - lam_cap + 1.0)
            + x0 * one_minus_decay / one_minus_A)

    phi1 = B * (1.0 - u)
    phi3 = 1.0 / (1.0 - u)
    dxi = (-theta * decay * x0 / one_minus_A
           + lam * B * (decay - u)
           - (mu / B) * decay / one_minus_A)
    dzeta = (lam * B * one_minus_decay
             - (mu / B) * one_minus_decay * phi3 / one_minus_A
             + theta * x0 * decay / one_minus_A)

    return MinimizerProfile(t=t, xi=xi, zeta=zeta, dxi=dxi, dzeta=dzeta,
                            phi1=phi1, phi2=1.0 / phi1, phi3=phi3)


def build_minimizer(params: ModelParams, horizon: Horizon, tilt: TiltParameters,
                    grid_size: Optional[int] = None) -> Trajectory:
    """
    Sample the minimizer and its controls on a uniform grid

    Raises:
        OptimalityViolated: the analytic queue path goes negative, i.e. T is
            too short for the interior minimizer
    """
    if grid_size is None:
        grid_size = get_solver_setting("grid_size")
    grid = uniform_grid(horizon, grid_size)
    prof = minimizer_profile(params, horizon, tilt, grid)

    xi = prof.xi.copy()
    zeta = prof.zeta.copy()
    xi[0], zeta[0] = params.x0, 0.0
    lowest = float(np.min(xi))
    if lowest < 0:
        if lowest < -1e-12 * max(1.0, params.x0):
            raise OptimalityViolated(
                f"minimizer queue path reaches {lowest:.3e} < 0; T={horizon.T} is below the interior regime",
                {"failed": ["positivity"], "min_xi": lowest, "T": horizon.T},
            )
        xi = np.maximum(xi, 0.0)

    controls = np.column_stack([prof.phi1, prof.phi2, prof.phi3])
    return Trajectory(grid=grid, xi=xi, zeta=zeta, controls=controls)


def _closed_form_total(params: ModelParams, horizon: Horizon, target: TargetRate,
                       tilt: TiltParameters, xi_T: float) -> float:
    lam, mu, theta, x0 = params.lambda_, params.mu, params.theta, params.x0
    T, gamma = horizon.T, target.gamma
    a, A, B = tilt.a, tilt.A, tilt.B
    log_B = math.log(B)
    log_terminal = -math.log1p(-a)
    total = ((xi_T + gamma * T - x0) * log_B
             - xi_T * log_terminal
             + x0 * (-math.log1p(-A))
             + (lam + mu) * T
             - (lam * B / theta) * (theta * T + a * math.expm1(-theta * T))
             + (mu / (B * theta)) * tilt.log_lambda_cap)
    return total


def quadrature_components(params: ModelParams, traj: Trajectory) -> Dict[str, float]:
    """Arrival / service / reneging integrals along a trajectory with controls"""
    if traj.controls is None:
        raise ConfigInvalid("trajectory carries no controls", {})
    phi = traj.controls
    level = np.maximum(traj.xi - 1.0, 0.0) if params.many_server else traj.xi
    integrands = (
        params.lambda_ * ell(phi[:, 0]),
        params.mu * ell(phi[:, 1]),
        params.theta * level * ell(phi[:, 2]),
    )
    return {name: float(trapezoid(f, traj.grid)) for name, f in zip(COMPONENTS, integrands)}


def minimizer_cost(params: ModelParams, horizon: Horizon, target: TargetRate,
                   tilt: TiltParameters, traj: Trajectory) -> CostReport:
    """
    Closed-form cost of the minimizer with a quadrature component split
    """
    xi_T = float(minimizer_profile(params, horizon, tilt, np.array([horizon.T])).xi[0])
    total = _closed_form_total(params, horizon, target, tilt, xi_T)
    if total < 0:
        # exact zero at the fluid path; rounding may land just below
        if total < -1e-9 * max(1.0, horizon.T):
            logger.warning(f"Closed-form minimizer cost is negative: {total:.3e}")
        total = 0.0
    return CostReport(
        total=total,
        normalized=total / horizon.T,
        components=quadrature_components(params, traj),
        decay_rate=decay_rate(params, target).c_gamma,
    )


def verify_optimality(params: ModelParams, horizon: Horizon, target: TargetRate,
                      tilt: TiltParameters, traj: Trajectory,
                      raise_on_failure: bool = True) -> OptimalityReport:
    """
    Check positivity, derivative bounds, phi1*phi2 = 1, transversality,
    the flow identities and the terminal reneging condition

    Raises:
        OptimalityViolated: with the failed check names in details
    """
    prof = minimizer_profile(params, horizon, tilt, traj.grid)
    checks: Dict[str, bool] = {}
    skipped: List[str] = []

    interior = prof.xi[1:]
    min_xi = float(np.min(interior)) if interior.size else float(prof.xi[0])
    checks["positivity"] = min_xi > 0

    c0 = None
    if params.x0 > 0:
        dz_min = float(np.min(prof.dzeta))
        if dz_min > 0:
            c0 = max(float(np.max(prof.dzeta)), 1.0 / dz_min, float(np.max(np.abs(prof.dxi))))
        checks["derivative_bounds"] = c0 is not None and math.isfinite(c0)
    else:
        skipped.append("derivative_bounds")

    product_defect = float(np.max(np.abs(prof.phi1 * prof.phi2 - 1.0)))
    checks["control_product"] = product_defect <= PRODUCT_TOL

    terminal_defect = abs(float(prof.phi1[-1]) - 1.0)
    checks["transversality"] = terminal_defect <= TERMINAL_PHI1_TOL

    lam, mu, theta = params.lambda_, params.mu, params.theta
    flow = lam * prof.phi1 - mu * prof.phi2 - (prof.dxi + prof.dzeta)
    reneging = theta * prof.phi3 * prof.xi - prof.dzeta
    scale = 1.0 + np.abs(prof.dxi) + np.abs(prof.dzeta)
    flow_defect = float(np.max(np.maximum(np.abs(flow), np.abs(reneging)) / scale))
    checks["flow_identities"] = flow_defect <= FLOW_TOL

    target_mass = target.gamma * horizon.T
    terminal = abs(float(prof.zeta[-1]) - target_mass) / max(target_mass, 1e-300)
    checks["terminal_reneging"] = terminal <= TERMINAL_ZETA_TOL

    report = OptimalityReport(
        checks=checks,
        skipped=skipped,
        min_xi=min_xi,
        c0=c0,
        max_product_defect=product_defect,
        terminal_phi1_defect=terminal_defect,
        max_flow_defect=flow_defect,
    )
    if report.passed:
        logger.debug(f"Optimality checks passed: {sorted(checks)}")
    elif raise_on_failure:
        raise OptimalityViolated(
            f"optimality checks failed: {', '.join(report.failed)}",
            {"failed": report.failed, "report": report.model_dump()},
        )
    else:
        logger.warning(f"Optimality checks failed: {report.failed}")
    return report


def special_path_gamma_zero(params: ModelParams, horizon: Horizon,
                            grid_size: Optional[int] = None) -> Tuple[Trajectory, CostReport]:
    """
    Drain the queue at unit speed, then hold it empty with no reneging

    On [0, x0) the controls are (1/z_-1, z_-1, 0) and afterwards
    (1/z_0, z_0, 1), where z_-1 solves lambda/z - mu*z = -1.

    Raises:
        HorizonTooShort: T <= x0
    """
    validate(params, horizon)
    lam, mu, theta, x0 = params.lambda_, params.mu, params.theta, params.x0
    T = horizon.T
    if params.many_server:
        raise ConfigInvalid("the gamma = 0 path is defined for the single-server queue",
                            {"mode": params.mode.value})
    if T <= x0:
        raise HorizonTooShort(f"the drain phase needs T > x0 (T={T}, x0={x0})", {"T": T, "x0": x0})
    if grid_size is None:
        grid_size = get_solver_setting("grid_size")

    z_drain = 2.0 * lam / (math.sqrt(4.0 * lam * mu + 1.0) - 1.0)
    z_hold = z_of_gamma(params, TargetRate(gamma=0.0))

    grid = uniform_grid(horizon, grid_size)
    draining = grid < x0
    xi = np.where(draining, x0 - grid, 0.0)
    controls = np.column_stack([
        np.where(draining, 1.0 / z_drain, 1.0 / z_hold),
        np.where(draining, z_drain, z_hold),
        np.where(draining, 0.0, 1.0),
    ])
    traj = Trajectory(grid=grid, xi=xi, zeta=np.zeros_like(grid), controls=controls)

    hold = T - x0
    components = {
        "arrival": lam * ell(1.0 / z_drain) * x0 + lam * ell(1.0 / z_hold) * hold,
        "service": mu * ell(z_drain) * x0 + mu * ell(z_hold) * hold,
        # phi3 = 0 while draining: theta * xi * ell(0) = theta * xi
        "reneging": theta * x0 * x0 / 2.0,
    }
    total = sum(components.values())
    c0 = decay_rate(params, TargetRate(gamma=0.0)).c_gamma
    report = CostReport(total=total, normalized=total / T, components=components, decay_rate=c0)
    logger.debug(f"gamma = 0 path: total={total!r}, C(0)={c0!r}")
    return traj, report


def multiserver_minimizer(params: ModelParams, horizon: Horizon, target: TargetRate,
                          tol: Optional[float] = None,
                          grid_size: Optional[int] = None) -> Tuple[TiltParameters, Trajectory, CostReport]:
    """
    Many-server minimizer: the single-server solution at x0 - 1, shifted up by one
    """
    if not params.many_server:
        raise ConfigInvalid("multiserver_minimizer needs ManyServer parameters", {"mode": params.mode.value})
    if params.x0 < 1:
        raise ManyServerX0TooSmall(f"many-server minimizer needs x0 >= 1, got {params.x0}", {"x0": params.x0})
    validate(params, horizon)

    reduced = params.replace(x0=params.x0 - 1.0, mode=ServerMode.SINGLE)
    tilt = solve_tilt(reduced, horizon, target, tol)
    traj = build_minimizer(reduced, horizon, tilt, grid_size)
    cost = minimizer_cost(reduced, horizon, target, tilt, traj)
    return tilt, traj.shifted(1.0), cost


def solve_minimizer(params: ModelParams, horizon: Horizon, target: TargetRate,
                    tol: Optional[float] = None,
                    grid_size: Optional[int] = None) -> Tuple[Optional[TiltParameters], Trajectory, CostReport]:
    """
    Minimizer for any supported configuration

    gamma = 0 goes to the special path (no tilt), ManyServer to the shifted
    single-server problem.
    """
    if target.gamma == 0:
        traj, cost = special_path_gamma_zero(params, horizon, grid_size)
        return None, traj, cost
    if params.many_server:
        return multiserver_minimizer(params, horizon, target, tol, grid_size)
    tilt = solve_tilt(params, horizon, target, tol)
    traj = build_minimizer(params, horizon, tilt, grid_size)
    return tilt, traj, minimizer_cost(params, horizon, target, tilt, traj)


def boundary_constant(params: ModelParams, target: TargetRate) -> float:
    """
    Long-horizon offset K with I_T = T*C(gamma) + K + O(1/T)

    K = -x0 log B + lambda*B*a/theta + (mu*z/theta) log z with z = z(gamma),
    B = 1/z and a = 1 - z (x0 replaced by x0 - 1 for ManyServer).
    """
    z = z_of_gamma(params, target)
    x0 = params.x0 - 1.0 if params.many_server else params.x0
    B, a = 1.0 / z, 1.0 - z
    return (-x0 * math.log(B)
            + params.lambda_ * B * a / params.theta
            + (params.mu * z / params.theta) * math.log(z))


def cost_profile(params: ModelParams, horizon: Horizon, gammas: Iterable[float],
                 grid_size: int = 2001) -> List[Dict[str, float]]:
    """Minimal cost over a grid of gamma values"""
    rows = []
    for gamma in gammas:
        target = TargetRate(gamma=gamma)
        _, _, cost = solve_minimizer(params, horizon, target, grid_size=grid_size)
        rows.append({
            "gamma": float(gamma),
            "total": cost.total,
            "normalized": cost.normalized,
            "decay_rate": cost.decay_rate,
        })
    return rows


def theta_sweep(params: ModelParams, horizon: Horizon, target: TargetRate,
                thetas: Iterable[float], grid_size: int = 20001) -> List[Dict[str, float]]:
    """
    Minimizer cost as theta varies with the other rates held fixed

    The shared decay rate is the same for every row; the reneging share
    is the reneging component over the total.
    """
    rows = []
    for theta in thetas:
        varied = params.replace(theta=float(theta))
        _, _, cost = solve_minimizer(varied, horizon, target, grid_size=grid_size)
        reneging = cost.components.get("reneging", 0.0)
        rows.append({
            "theta": float(theta),
            "total": cost.total,
            "normalized": cost.normalized,
            "reneging_component": reneging,
            "reneging_share": reneging / cost.total if cost.total > 0 else 0.0,
            "decay_rate": cost.decay_rate,
            "boundary_constant": boundary_constant(varied, target),
        })
        logger.info(f"theta={theta}: I/T={cost.normalized:.9g}, reneging share={rows[-1]['reneging_share']:.3g}")
    return rows
