"""
Analysis handlers
Deterministic pipelines: decay rate, fluid limit, minimizer, oracle and the
reneging-paradox check
"""
import logging
from itertools import combinations
from typing import Any, Dict

import numpy as np

from core.models import Command, RunConfig, TargetRate, Horizon, ServerMode, Purpose
from core.validation import validate, require_supercritical
from fluid.fluid_limit import lln_trajectory, fluid_integrate, gamma_star
from minimizer.el_minimizer import solve_minimizer, verify_optimality, boundary_constant, theta_sweep, cost_profile
from oracle.variational_oracle import refinement_study
from rates.heuristic import heuristic_tilt
from rates.rate_function import decay_rate
from handlers.run_config import emit_table, emit_trajectory
from storage.artifact_manager import artifact_manager

logger = logging.getLogger(__name__)


def cmd_decay_rate(config: RunConfig) -> Dict[str, Any]:
    """C(gamma), z(gamma) and the tilted-rates heuristic value"""
    require_supercritical(config.params)
    result = decay_rate(config.params, config.target)
    optimum = heuristic_tilt(config.params, config.target)
    payload: Dict[str, Any] = {
        "c_gamma": result.c_gamma,
        "z_gamma": result.z_gamma,
        "heuristic": optimum.model_dump(),
        "heuristic_gap": optimum.value - result.c_gamma,
    }
    if config.gammas:
        rows = []
        for gamma in config.gammas:
            target = TargetRate(gamma=gamma)
            rows.append({
                "gamma": gamma,
                "c_gamma": decay_rate(config.params, target).c_gamma,
                "heuristic": heuristic_tilt(config.params, target).value,
            })
        payload["profile_file"] = emit_table(config, rows, "decay_rates", ["gamma", "c_gamma", "heuristic"])
        if config.horizon is not None:
            costs = cost_profile(config.params, config.horizon, config.gammas, grid_size=config.grid_size)
            payload["cost_profile_file"] = emit_table(config, costs, "cost_profile")
    logger.info(f"✅ C({config.target.gamma}) = {result.c_gamma:.10g}")
    return payload


def cmd_fluid(config: RunConfig) -> Dict[str, Any]:
    """Closed-form law of large numbers path checked against the RK4 integrator"""
    params = config.params
    validate(params, config.horizon, Purpose.SIMULATION)
    numeric = fluid_integrate(params, config.horizon, config.grid_size)
    if params.many_server and params.x0 < 1:
        # no closed form below full occupancy
        closed = numeric
    else:
        closed = lln_trajectory(params, config.horizon, config.grid_size)
    integrator_gap = float(max(np.max(np.abs(closed.xi - numeric.xi)), np.max(np.abs(closed.zeta - numeric.zeta))))
    payload = {
        "gamma_star": gamma_star(params, config.horizon),
        "final_xi": float(closed.xi[-1]),
        "final_zeta": float(closed.zeta[-1]),
        "integrator_gap": integrator_gap,
        "file": emit_trajectory(config, closed, "fluid"),
    }
    logger.info(f"✅ Fluid path: gamma*_T = {payload['gamma_star']:.10g}, RK4 gap {integrator_gap:.3e}")
    return payload


def cmd_minimizer(config: RunConfig) -> Dict[str, Any]:
    """Solve, build, cost and verify the Euler-Lagrange minimizer"""
    params, horizon, target = config.params, config.horizon, config.target
    tilt, traj, cost = solve_minimizer(params, horizon, target, tol=config.tol, grid_size=config.grid_size)

    optimality = None
    if tilt is not None:
        if params.many_server:
            reduced = params.replace(x0=params.x0 - 1.0, mode=ServerMode.SINGLE)
            report = verify_optimality(reduced, horizon, target, tilt, traj.shifted(-1.0))
        else:
            report = verify_optimality(params, horizon, target, tilt, traj)
        optimality = {**report.model_dump(), "passed": report.passed}

    payload: Dict[str, Any] = {
        "tilt": tilt.model_dump() if tilt is not None else None,
        "cost": cost.model_dump(),
        "optimality": optimality,
        "terminal_zeta": float(traj.zeta[-1]),
        "boundary_constant": boundary_constant(params, target) if target.gamma > 0 else None,
        "file": emit_trajectory(config, traj, "minimizer"),
    }
    payload["report_file"] = str(artifact_manager.save_json(payload, "minimizer.json",
                                                            config.command.value, config.echo()))
    logger.info(f"✅ Minimizer: I = {cost.total:.12g}, I/T = {cost.normalized:.10g}")
    return payload


def cmd_oracle(config: RunConfig) -> Dict[str, Any]:
    """Refinement study of the discretized oracle against the closed-form cost"""
    _, _, cost = solve_minimizer(config.params, config.horizon, config.target, tol=config.tol,
                                 grid_size=config.grid_size)
    rows = refinement_study(config.params, config.horizon, config.target, config.m_list,
                            reference=cost.total, max_iters=config.max_iters)
    objectives = [row["objective"] for row in rows]
    payload = {
        "reference": cost.total,
        "rows": rows,
        "monotone": all(b <= a * (1.0 + 1e-9) for a, b in zip(objectives, objectives[1:])),
        "file": emit_table(config, rows, "oracle_refinement", ["m", "objective", "gap", "iterations"]),
    }
    if rows:
        logger.info(f"✅ Oracle finest gap: {rows[-1]['gap']:.3e}")
    return payload


def cmd_paradox_check(config: RunConfig) -> Dict[str, Any]:
    """
    Theta-independence of the normalized cost and the shrinking reneging share

    The first table varies theta at the configured horizon; the second varies
    the horizon at the configured theta.
    """
    params, target = config.params, config.target
    theta_rows = theta_sweep(params, config.horizon, target, config.thetas, grid_size=config.grid_size)
    normalized = [row["normalized"] for row in theta_rows]
    spread = max((abs(a - b) / max(abs(a), abs(b), 1e-300) for a, b in combinations(normalized, 2)), default=0.0)

    horizon_rows = []
    for T in config.horizons:
        _, _, cost = solve_minimizer(params, Horizon(T=T), target, grid_size=config.grid_size)
        reneging = cost.components.get("reneging", 0.0)
        horizon_rows.append({
            "T": T,
            "total": cost.total,
            "normalized": cost.normalized,
            "reneging_component": reneging,
            "reneging_share": reneging / cost.total if cost.total > 0 else 0.0,
            "normalized_gap": cost.normalized - cost.decay_rate,
        })

    payload = {
        "decay_rate": decay_rate(params, target).c_gamma,
        "max_relative_spread": spread,
        "theta_rows": theta_rows,
        "horizon_rows": horizon_rows,
        "theta_file": emit_table(config, theta_rows, "paradox_theta"),
        "horizon_file": emit_table(config, horizon_rows, "paradox_horizon"),
    }
    logger.info(f"✅ Paradox check: spread across thetas {spread:.3e}")
    return payload


def register(subparsers, parent):
    """Add the analysis subcommands"""
    commands = {
        Command.DECAY_RATE: (cmd_decay_rate, "decay rate C(gamma) and tilt root z(gamma)"),
        Command.FLUID: (cmd_fluid, "law of large numbers path"),
        Command.MINIMIZER: (cmd_minimizer, "Euler-Lagrange minimizer with optimality checks"),
        Command.ORACLE: (cmd_oracle, "discretized variational oracle refinement study"),
        Command.PARADOX_CHECK: (cmd_paradox_check, "theta-independence and reneging share tables"),
    }
    for command, (handler, help_text) in commands.items():
        sub = subparsers.add_parser(command.value, parents=[parent], help=help_text)
        sub.set_defaults(handler=handler)
