"""
Simulation handlers
Monte Carlo pipelines: single sample paths, tail-probability estimates and
the decay sweep over n
"""
import logging
from typing import Any, Dict

from core.errors import ConfigInvalid
from core.models import Command, RunConfig, SimConfig, EstimateMethod
from minimizer.el_minimizer import solve_minimizer
from simulation.estimators import estimate_naive, estimate_is, decay_sweep, event_threshold, trend_slope
from simulation.queue_simulator import simulate, simulate_tilted
from handlers.run_config import emit_table, emit_sample_path
from storage.artifact_manager import artifact_manager

logger = logging.getLogger(__name__)


def _sim_config(config: RunConfig, replications: int) -> SimConfig:
    return SimConfig(params=config.params, horizon=config.horizon, n=config.n,
                     seed=config.seed, replications=replications)


def cmd_simulate(config: RunConfig) -> Dict[str, Any]:
    """One sample path, untilted or under the minimizer's controls"""
    sim = _sim_config(config, 1)
    if config.tilted:
        if config.target is None:
            raise ConfigInvalid("--tilted needs --gamma", {"missing": ["gamma"]})
        _, controls, _ = solve_minimizer(config.params, config.horizon, config.target, tol=config.tol,
                                         grid_size=config.grid_size)
        sample = simulate_tilted(sim, controls)
    else:
        sample = simulate(sim)

    payload = {
        "n": sample.n,
        "events": int(sample.jump_times.size - 1),
        "counts": sample.counts,
        "final_x": sample.final_x,
        "final_y": sample.final_y,
        "log_lr": sample.log_lr,
        "file": emit_sample_path(config, sample, "sample_path"),
    }
    logger.info(f"✅ Simulated {payload['events']} events, Y(T)/n = {sample.final_y:.6g}")
    return payload


def cmd_estimate(config: RunConfig) -> Dict[str, Any]:
    """Naive and/or importance-sampling estimate of the reneging tail probability"""
    sim = _sim_config(config, config.replications)
    _, controls, cost = solve_minimizer(config.params, config.horizon, config.target, tol=config.tol,
                                        grid_size=config.grid_size)
    payload: Dict[str, Any] = {
        "threshold": event_threshold(config.target, config.horizon.T, config.n, config.direction),
        "reference": cost.total,
        "t_times_c": config.horizon.T * cost.decay_rate,
    }
    if config.method in (EstimateMethod.NAIVE, EstimateMethod.BOTH):
        payload["naive"] = estimate_naive(sim, config.target, config.direction, config.workers).model_dump()
    if config.method in (EstimateMethod.IMPORTANCE, EstimateMethod.BOTH):
        payload["importance"] = estimate_is(sim, config.target, config.direction, controls,
                                            config.workers).model_dump()
    payload["report_file"] = str(artifact_manager.save_json(payload, "estimate.json",
                                                            config.command.value, config.echo()))
    logger.info(f"✅ Estimates written to {payload['report_file']}")
    return payload


def cmd_sweep(config: RunConfig) -> Dict[str, Any]:
    """Empirical decay exponent -(1/n) log p_hat across scales n"""
    rows = decay_sweep(config.params, config.horizon, config.target, config.direction, config.n_list,
                       config.replications, seed=config.seed, workers=config.workers)
    payload = {
        "rows": rows,
        "trend_slope": trend_slope(rows) if rows else None,
        "file": emit_table(config, rows, "decay_sweep",
                           ["n", "p_hat", "ci95", "log_decay", "ess", "reference", "t_times_c"]),
    }
    logger.info(f"✅ Decay sweep over n = {config.n_list}")
    return payload


def register(subparsers, parent):
    """Add the simulation subcommands"""
    commands = {
        Command.SIMULATE: (cmd_simulate, "one sample path of the scaled queue"),
        Command.ESTIMATE: (cmd_estimate, "naive and importance-sampling tail estimates"),
        Command.SWEEP: (cmd_sweep, "importance-sampling decay sweep over n"),
    }
    for command, (handler, help_text) in commands.items():
        sub = subparsers.add_parser(command.value, parents=[parent], help=help_text)
        sub.set_defaults(handler=handler)
