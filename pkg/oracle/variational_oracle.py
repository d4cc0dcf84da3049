"""
Discretized variational oracle

Minimizes the piecewise-linear discretization of the path cost under the
terminal reneging constraint, independently of the Euler-Lagrange closed
form. Descent runs in slope coordinates: the queue path is parametrized by
its segment slopes p and the reneging path by its slopes q, which makes the
gradient the discrete analogue of the first variation.
"""
import logging
from typing import Dict, Iterable, List, Optional, Tuple

import numpy as np

from core.errors import ConfigInvalid, GammaNonpositive, GridTooCoarse, NotConverged
from core.models import (
    ModelParams, Horizon, TargetRate, Trajectory, CostReport, DiscreteProblem, OracleDiagnostics,
)
from core.validation import validate
from config.settings import get_solver_setting
from fluid.fluid_limit import lln_trajectory
from rates.rate_function import cost_terms, flow_controls, decay_rate, COMPONENTS
from utils.projections import project_weighted_simplex, project_floor

logger = logging.getLogger(__name__)

MIN_SEGMENTS = 10
ARMIJO_SLOPE = 1e-4
MIN_STEP = 1e-20
TINY = 1e-300
HISTORY_EVERY = 50


class DiscreteOracle:
    """
    Objective, gradient and projected descent for one DiscreteProblem

    Variables are the node values xi[0..m] (xi[0] = x0 fixed) and the
    reneging slopes q[0..m-1]. The objective is
    sum_k dt * L(xi_k, (xi_{k+1} - xi_k)/dt, q_k).
    """

    def __init__(self, problem: DiscreteProblem):
        params = problem.params
        if params.many_server:
            raise ConfigInvalid("the oracle discretizes the single-server problem", {"mode": params.mode.value})
        if problem.m < MIN_SEGMENTS:
            raise GridTooCoarse(f"oracle needs m >= {MIN_SEGMENTS}, got {problem.m}", {"m": problem.m})
        if problem.gamma <= 0:
            raise GammaNonpositive("oracle needs gamma > 0", {"gamma": problem.gamma})
        validate(params, Horizon(T=problem.T))

        self.problem = problem
        self.params = params
        self.dt = problem.dt
        self.mass = problem.gamma * problem.T
        self.eps_x = problem.eps_x
        self.grid = np.linspace(0.0, problem.T, problem.m + 1)
        self.grid[-1] = problem.T

    # Objective and gradient

    def _levels(self, xi: np.ndarray) -> np.ndarray:
        # node 0 is pinned at x0, which may sit below the floor
        return np.maximum(xi[:-1], self.eps_x)

    def terms(self, xi: np.ndarray, q: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        p = np.diff(xi) / self.dt
        return cost_terms(self.params, self._levels(xi), p, q)

    def objective(self, xi: np.ndarray, q: np.ndarray) -> float:
        arrival, service, reneging = self.terms(xi, q)
        return float(self.dt * np.sum(arrival + service + reneging))

    def components(self, xi: np.ndarray, q: np.ndarray) -> Dict[str, float]:
        return {name: float(self.dt * np.sum(term)) for name, term in zip(COMPONENTS, self.terms(xi, q))}

    def slope_direction(self, xi: np.ndarray, q: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """
        Steepest-descent direction in slope coordinates

        With L_p = log phi1, L_q = log(phi1*phi3) and L_x = theta(1 - phi3),
        the slope direction is -(L_p(k) + dt * sum_{j>k} L_x(j)) and the
        reneging direction is -L_q(k).
        """
        lam, mu, theta = self.params.lambda_, self.params.mu, self.params.theta
        x = self._levels(xi)
        p = np.diff(xi) / self.dt
        phi1, _ = flow_controls(lam, np.full_like(x, mu), p + q)
        log_phi1 = np.log(phi1)
        phi3 = q / (theta * x)
        l_x = theta * (1.0 - phi3)
        l_q = log_phi1 + np.log(np.maximum(q, TINY) / (theta * x))

        # node 0 is fixed, so its L_x never enters
        tail = np.zeros_like(l_x)
        tail[:-1] = np.cumsum(l_x[:0:-1])[::-1]
        return -(log_phi1 + self.dt * tail), -l_q

    # Feasibility

    def path_from_slopes(self, p: np.ndarray) -> np.ndarray:
        xi = np.empty(p.size + 1)
        xi[0] = self.params.x0
        xi[1:] = self.params.x0 + np.cumsum(p) * self.dt
        xi[1:] = project_floor(xi[1:], self.eps_x)
        return xi

    def project_reneging(self, q: np.ndarray) -> np.ndarray:
        return project_weighted_simplex(q, self.mass, self.dt)

    def initial_point(self) -> Tuple[np.ndarray, np.ndarray]:
        """Fluid path with its reneging slopes shifted uniformly to meet the constraint"""
        fluid = lln_trajectory(self.params, Horizon(T=self.problem.T), self.problem.m + 1)
        q = np.diff(fluid.zeta) / self.dt
        q = q + (self.mass - self.dt * np.sum(q)) / self.problem.T
        xi = self.path_from_slopes(np.diff(fluid.xi) / self.dt)
        return xi, self.project_reneging(q)

    def warm_point(self, coarse: Trajectory) -> Tuple[np.ndarray, np.ndarray]:
        """Interpolate a solution from another grid onto this one"""
        xi = np.interp(self.grid, coarse.grid, coarse.xi)
        xi[0] = self.params.x0
        coarse_q = np.diff(coarse.zeta) / np.diff(coarse.grid)
        mids = 0.5 * (self.grid[:-1] + self.grid[1:])
        segment = np.clip(np.searchsorted(coarse.grid, mids, side="right") - 1, 0, coarse_q.size - 1)
        xi = self.path_from_slopes(np.diff(xi) / self.dt)
        return xi, self.project_reneging(coarse_q[segment])

    # Descent

    def solve(self, max_iters: int, tol: float, armijo: float, initial_step: float,
              start: Optional[Tuple[np.ndarray, np.ndarray]] = None) -> Tuple[np.ndarray, np.ndarray, OracleDiagnostics]:
        """
        Projected gradient descent with Armijo backtracking

        Stops when the relative objective decrease of an accepted step falls
        below tol, or when no descent step exists.

        Raises:
            NotConverged: iteration cap reached
        """
        xi, q = start if start is not None else self.initial_point()
        value = self.objective(xi, q)
        if not np.isfinite(value):
            raise ConfigInvalid("oracle starting point has infinite cost", {"objective": value})

        step = initial_step
        history = [value]
        grad_norm = np.inf
        for iteration in range(1, max_iters + 1):
            d_p, d_q = self.slope_direction(xi, q)
            grad_norm = float(np.sqrt(self.dt * (np.sum(d_p ** 2) + np.sum(d_q ** 2))))
            p = np.diff(xi) / self.dt

            step = min(initial_step, 2.0 * step)
            accepted = False
            while step >= MIN_STEP:
                xi_trial = self.path_from_slopes(p + step * d_p)
                q_trial = self.project_reneging(q + step * d_q)
                # Euclidean gradient in (p, q) is -dt * direction
                slope = -self.dt * (np.dot(d_p, np.diff(xi_trial) / self.dt - p) + np.dot(d_q, q_trial - q))
                if slope >= 0:
                    break
                trial = self.objective(xi_trial, q_trial)
                if trial <= value + ARMIJO_SLOPE * slope:
                    accepted = True
                    break
                step *= armijo

            if not accepted:
                logger.debug(f"No descent step at iteration {iteration}; objective {value!r}")
                return xi, q, OracleDiagnostics(iterations=iteration, objective=value,
                                                gradient_norm=grad_norm, last_step=step,
                                                converged=True, history=history)

            decrease = value - trial
            xi, q, value = xi_trial, q_trial, trial
            if iteration % HISTORY_EVERY == 0:
                history.append(value)
            if decrease <= tol * max(1.0, abs(value)):
                history.append(value)
                logger.debug(f"Oracle converged after {iteration} iterations: {value!r}")
                return xi, q, OracleDiagnostics(iterations=iteration, objective=value,
                                                gradient_norm=grad_norm, last_step=step,
                                                converged=True, history=history)

        raise NotConverged(
            f"oracle did not converge within {max_iters} iterations",
            {"objective": value, "gradient_norm": grad_norm, "last_step": step, "iterations": max_iters},
        )

    def trajectory(self, xi: np.ndarray, q: np.ndarray) -> Trajectory:
        """Trajectory with segment controls attached to their left nodes"""
        zeta = np.concatenate([[0.0], np.cumsum(q) * self.dt])
        lam, mu, theta = self.params.lambda_, self.params.mu, self.params.theta
        x = self._levels(xi)
        p = np.diff(xi) / self.dt
        phi1, phi2 = flow_controls(lam, np.full_like(x, mu), p + q)
        phi3 = q / (theta * x)
        controls = np.column_stack([phi1, phi2, phi3])
        controls = np.vstack([controls, controls[-1:]])
        return Trajectory(grid=self.grid, xi=xi, zeta=zeta, controls=controls)


def optimize(problem: DiscreteProblem, max_iters: Optional[int] = None, tol: Optional[float] = None,
             initial: Optional[Trajectory] = None) -> Tuple[Trajectory, CostReport, OracleDiagnostics]:
    """
    Minimize the discretized cost for one problem

    Args:
        problem: Discretization (params, T, gamma, m, eps_x)
        max_iters: Iteration cap (defaults to SOLVER_CONFIG)
        tol: Relative decrease tolerance (defaults to SOLVER_CONFIG)
        initial: Optional trajectory to warm-start from

    Returns:
        (trajectory, cost report, diagnostics)
    """
    if max_iters is None:
        max_iters = get_solver_setting("oracle_max_iters")
    if tol is None:
        tol = get_solver_setting("oracle_tol")
    oracle = DiscreteOracle(problem)
    start = oracle.warm_point(initial) if initial is not None else None
    xi, q, diagnostics = oracle.solve(
        max_iters, tol,
        armijo=get_solver_setting("oracle_armijo"),
        initial_step=get_solver_setting("oracle_initial_step"),
        start=start,
    )
    report = CostReport(
        total=max(diagnostics.objective, 0.0),
        normalized=max(diagnostics.objective, 0.0) / problem.T,
        components=oracle.components(xi, q),
        decay_rate=decay_rate(problem.params, TargetRate(gamma=problem.gamma)).c_gamma,
    )
    return oracle.trajectory(xi, q), report, diagnostics


def discrete_objective(problem: DiscreteProblem, xi: np.ndarray, q: np.ndarray) -> float:
    """Objective of an arbitrary discrete point (used for certificates)"""
    return DiscreteOracle(problem).objective(np.asarray(xi, dtype=float), np.asarray(q, dtype=float))


def refinement_study(params: ModelParams, horizon: Horizon, target: TargetRate, m_list: Iterable[int],
                     reference: Optional[float] = None, max_iters: Optional[int] = None,
                     tol: Optional[float] = None) -> List[Dict[str, float]]:
    """
    Run the oracle on increasingly fine grids, each warm-started from the last

    Args:
        reference: Cost to report gaps against (e.g. the closed-form minimizer cost)

    Returns:
        Rows with m, objective, gap and iterations
    """
    rows = []
    previous = None
    for m in m_list:
        problem = DiscreteProblem(params=params, T=horizon.T, gamma=target.gamma, m=int(m),
                                  eps_x=get_solver_setting("oracle_eps_x"))
        traj, report, diagnostics = optimize(problem, max_iters, tol, initial=previous)
        previous = traj
        gap = report.total - reference if reference is not None else float("nan")
        rows.append({"m": int(m), "objective": report.total, "gap": gap, "iterations": diagnostics.iterations})
        logger.info(f"Oracle m={m}: objective={report.total:.12g}, gap={gap:.3e}, {diagnostics.iterations} iterations")
    return rows
