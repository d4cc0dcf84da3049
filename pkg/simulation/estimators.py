"""
Monte Carlo estimators of reneging tail probabilities

Naive proportion estimates, importance-sampling estimates under a control
tilt, and the decay sweep over the scale n. Replications run in fixed
chunks whose summaries are merged in chunk order, so results do not depend
on the number of workers.
"""
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Tuple

import numpy as np

from core.models import (
    SimConfig, TargetRate, Direction, Trajectory, EstimateReport, ModelParams, Horizon, Purpose,
)
from core.validation import validate
from config.settings import get_thread_cap
from simulation.queue_simulator import (
    RandomDraws, replication_rng, run_direct, run_tilted, control_table, ControlTable,
)
from minimizer.el_minimizer import solve_minimizer
from utils.statistics import RunningMoments, normal_ci

logger = logging.getLogger(__name__)

CHUNK_SIZE = 1000
MAX_LOG_WEIGHT = 709.0


@dataclass(frozen=True)
class ChunkTask:
    """Replications [start, stop) of one estimate"""
    params: ModelParams
    T: float
    n: int
    q0: int
    seed: int
    start: int
    stop: int
    threshold: int
    direction: Direction
    table: Optional[ControlTable]


@dataclass
class ChunkSummary:
    weights: RunningMoments
    hits: int
    lr: RunningMoments


def event_threshold(target: TargetRate, T: float, n: int, direction: Direction) -> int:
    """Integer reneging count bounding the event {Y(T)/n >= gamma T} (or <=)"""
    mass = target.gamma * T * n
    if Direction(direction) == Direction.AT_LEAST:
        return int(math.ceil(mass - 1e-9))
    return int(math.floor(mass + 1e-9))


def _is_hit(renegings: int, threshold: int, direction: Direction) -> bool:
    if direction == Direction.AT_LEAST:
        return renegings >= threshold
    return renegings <= threshold


def run_chunk(task: ChunkTask) -> ChunkSummary:
    """Simulate one chunk and summarize its weights"""
    weights = RunningMoments()
    lr = RunningMoments()
    hits = 0
    for r in range(task.start, task.stop):
        draws = RandomDraws(replication_rng(task.seed, r))
        if task.table is None:
            outcome = run_direct(task.params, task.T, task.n, task.q0, draws, record=False)
        else:
            outcome = run_tilted(task.params, task.T, task.n, task.q0, task.table, draws, record=False)
        likelihood = math.exp(outcome.log_lr) if outcome.log_lr < MAX_LOG_WEIGHT else math.inf
        lr.push(likelihood)
        if _is_hit(outcome.renegings, task.threshold, task.direction):
            hits += 1
            weights.push(likelihood)
        else:
            weights.push(0.0)
    return ChunkSummary(weights=weights, hits=hits, lr=lr)


def worker_count(requested: Optional[int], tasks: int) -> int:
    """Requested workers, bounded by the RENEGE_LDP_THREADS cap and the chunk count"""
    cap = get_thread_cap()
    return max(1, min(requested or cap, cap, tasks))


def run_replications(config: SimConfig, target: TargetRate, direction: Direction,
                     controls: Optional[Trajectory] = None, workers: Optional[int] = None) -> ChunkSummary:
    """
    Run all replications of an estimate and merge the chunk summaries in order

    Args:
        workers: Process count (defaults to, and never exceeds, the RENEGE_LDP_THREADS cap)
    """
    validate(config.params, config.horizon, Purpose.SIMULATION)
    direction = Direction(direction)
    table = control_table(controls, config.horizon.T) if controls is not None else None
    threshold = event_threshold(target, config.horizon.T, config.n, direction)
    tasks = [
        ChunkTask(params=config.params, T=config.horizon.T, n=config.n, q0=config.initial_queue,
                  seed=config.seed, start=start, stop=min(start + CHUNK_SIZE, config.replications),
                  threshold=threshold, direction=direction, table=table)
        for start in range(0, config.replications, CHUNK_SIZE)
    ]
    workers = worker_count(workers, len(tasks))

    if workers > 1:
        logger.info(f"Running {config.replications} replications on {workers} workers")
        with ProcessPoolExecutor(max_workers=workers) as pool:
            summaries = list(pool.map(run_chunk, tasks))
    else:
        summaries = [run_chunk(task) for task in tasks]

    total = ChunkSummary(weights=RunningMoments(), hits=0, lr=RunningMoments())
    for summary in summaries:
        total.weights.merge(summary.weights)
        total.lr.merge(summary.lr)
        total.hits += summary.hits
    return total


def _report(summary: ChunkSummary, n: int, replications: int, importance: bool) -> EstimateReport:
    p_hat = min(max(summary.weights.mean, 0.0), 1.0)
    std_error = summary.weights.std_error
    degenerate = std_error == 0.0
    if summary.hits == 0:
        logger.warning(f"No replication out of {replications} hit the event; estimate is 0")
    log_decay = 0.0 - math.log(p_hat) / n if p_hat > 0 else None
    return EstimateReport(
        p_hat=p_hat,
        ci95=normal_ci(std_error),
        std_error=std_error,
        log_decay=log_decay,
        ess=summary.weights.ess if importance else None,
        replications_used=replications,
        hits=summary.hits,
        degenerate=degenerate,
    )


def estimate_naive(config: SimConfig, target: TargetRate,
                   direction: Direction = Direction.AT_LEAST, workers: Optional[int] = None) -> EstimateReport:
    """Proportion of untilted runs with Y(T) >= gamma*T (or <=)"""
    summary = run_replications(config, target, direction, None, workers)
    report = _report(summary, config.n, config.replications, importance=False)
    logger.info(f"Naive estimate n={config.n}: p={report.p_hat:.6g} +/- {report.ci95:.3g} ({report.hits} hits)")
    return report


def estimate_is(config: SimConfig, target: TargetRate, direction: Direction,
                controls: Trajectory, workers: Optional[int] = None) -> EstimateReport:
    """Importance-sampling mean of 1{event} * exp(log_lr) under the control tilt"""
    summary = run_replications(config, target, direction, controls, workers)
    report = _report(summary, config.n, config.replications, importance=True)
    logger.info(f"IS estimate n={config.n}: p={report.p_hat:.6g} +/- {report.ci95:.3g}, ESS={report.ess:.1f}")
    return report


def likelihood_ratio_mean(config: SimConfig, controls: Trajectory,
                          workers: Optional[int] = None) -> Tuple[float, float]:
    """Mean of exp(log_lr) over the replications and its standard error"""
    summary = run_replications(config, TargetRate(gamma=0.0), Direction.AT_LEAST, controls, workers)
    return summary.lr.mean, summary.lr.std_error


def decay_sweep(params: ModelParams, horizon: Horizon, target: TargetRate, direction: Direction,
                n_list: Iterable[int], replications: int, controls: Optional[Trajectory] = None,
                seed: int = 0, workers: Optional[int] = None) -> List[Dict[str, float]]:
    """
    Importance-sampling estimates across scales n with the empirical decay exponent

    The reference columns are the minimal cost I*_{gamma,T} and T*C(gamma);
    -(1/n) log p_hat approaches the former as n grows at fixed T.
    """
    n_list = list(n_list)
    if not n_list:
        return []
    _, minimizer_path, cost = solve_minimizer(params, horizon, target)
    if controls is None:
        controls = minimizer_path

    rows = []
    for n in n_list:
        config = SimConfig(params=params, horizon=horizon, n=int(n), seed=seed, replications=replications)
        report = estimate_is(config, target, direction, controls, workers)
        rows.append({
            "n": int(n),
            "p_hat": report.p_hat,
            "ci95": report.ci95,
            "log_decay": report.log_decay if report.log_decay is not None else float("nan"),
            "ess": report.ess,
            "reference": cost.total,
            "t_times_c": horizon.T * cost.decay_rate,
        })
    return rows


def trend_slope(rows: List[Dict[str, float]]) -> float:
    """Least-squares slope of the log-decay column against 1/n"""
    ns = np.array([row["n"] for row in rows], dtype=float)
    decay = np.array([row["log_decay"] for row in rows], dtype=float)
    keep = np.isfinite(decay)
    if keep.sum() < 2:
        return float("nan")
    slope, _ = np.polyfit(1.0 / ns[keep], decay[keep], 1)
    return float(slope)
