"""
Event-driven simulation of the scaled queue with reneging

With unscaled queue length Q at scale n the event rates are

    arrivals   lambda*n
    services   mu*n*1{Q > 0}        (ManyServer: mu*min(Q, n))
    renegings  theta*(Q - 1)^+      (ManyServer: theta*(Q - n)^+)

so the customer in service never reneges. The tilted simulator multiplies
the three rates by piecewise-constant controls (phi1, phi2, phi3) and
accumulates the log likelihood ratio of the original law against the
tilted one.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import List

import numpy as np

from core.errors import ControlNotPositive, ConfigInvalid
from core.models import SimConfig, SamplePath, Trajectory, ModelParams, Purpose
from core.validation import validate
from config.settings import SIMULATION_CONFIG

logger = logging.getLogger(__name__)

ARRIVAL, SERVICE, RENEGE = 0, 1, 2
INITIAL = -1


def replication_rng(seed: int, replication: int) -> np.random.Generator:
    """Counter-based stream for one replication, independent of scheduling"""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(replication,))))


class RandomDraws:
    """Unit exponentials and uniforms drawn from a generator in blocks"""

    def __init__(self, rng: np.random.Generator, block_size: int = None):
        self.rng = rng
        self.block_size = block_size or SIMULATION_CONFIG['block_size']
        self._exp = self.rng.standard_exponential(self.block_size)
        self._unif = self.rng.random(self.block_size)
        self._i = 0
        self._j = 0

    def exponential(self) -> float:
        if self._i == self.block_size:
            self._exp = self.rng.standard_exponential(self.block_size)
            self._i = 0
        value = self._exp[self._i]
        self._i += 1
        return value

    def uniform(self) -> float:
        if self._j == self.block_size:
            self._unif = self.rng.random(self.block_size)
            self._j = 0
        value = self._unif[self._j]
        self._j += 1
        return value


@dataclass
class PathOutcome:
    """Terminal state of one run, plus the event record when requested"""
    queue: int
    renegings: int
    arrivals: int
    services: int
    log_lr: float
    renege_exposure: float
    times: List[float] = field(default_factory=list)
    queues: List[int] = field(default_factory=list)
    reneged: List[int] = field(default_factory=list)
    kinds: List[int] = field(default_factory=list)


@dataclass(frozen=True)
class ControlTable:
    """Cell-wise controls on [grid[j], grid[j+1]) with per-cell majorants"""
    grid: np.ndarray
    values: np.ndarray
    logs: np.ndarray
    majorants: np.ndarray


def _service_and_level(many: bool, q: int, n: int, mu_n: float, mu: float):
    if many:
        return mu * min(q, n), max(q - n, 0)
    return (mu_n if q > 0 else 0.0), (q - 1 if q > 1 else 0)


def _record(outcome: PathOutcome, t: float, q: int, y: int, kind: int):
    outcome.times.append(t)
    outcome.queues.append(q)
    outcome.reneged.append(y)
    outcome.kinds.append(kind)


def run_direct(params: ModelParams, T: float, n: int, q0: int, draws: RandomDraws,
               record: bool = True) -> PathOutcome:
    """Exact exponential-clock simulation with a categorical event draw"""
    lam_n, mu, theta = params.lambda_ * n, params.mu, params.theta
    mu_n = mu * n
    many = params.many_server
    q, y, arrivals, services = q0, 0, 0, 0
    t, exposure = 0.0, 0.0
    outcome = PathOutcome(queue=q0, renegings=0, arrivals=0, services=0, log_lr=0.0, renege_exposure=0.0)
    if record:
        _record(outcome, 0.0, q0, 0, INITIAL)

    while True:
        srv, level = _service_and_level(many, q, n, mu_n, mu)
        ren = theta * level
        total = lam_n + srv + ren
        dt = draws.exponential() / total
        if t + dt >= T:
            exposure += ren * (T - t)
            break
        exposure += ren * dt
        t += dt
        u = draws.uniform() * total
        if u < lam_n:
            q += 1
            arrivals += 1
            kind = ARRIVAL
        elif u < lam_n + srv:
            q -= 1
            services += 1
            kind = SERVICE
        else:
            q -= 1
            y += 1
            kind = RENEGE
        if record:
            _record(outcome, t, q, y, kind)

    outcome.queue, outcome.renegings = q, y
    outcome.arrivals, outcome.services = arrivals, services
    outcome.renege_exposure = exposure
    return outcome


def control_table(controls: Trajectory, T: float) -> ControlTable:
    """
    Validate a control trajectory and precompute cell values and majorants

    Raises:
        ControlNotPositive: phi1 or phi2 not strictly positive, or phi3 negative
        ConfigInvalid: no controls, or the grid does not cover [0, T]
    """
    if controls.controls is None:
        raise ConfigInvalid("tilted simulation needs a trajectory with controls", {})
    phi = np.asarray(controls.controls, dtype=float)
    if not np.all(np.isfinite(phi)):
        raise ControlNotPositive("controls must be finite", {})
    if np.min(phi[:, :2]) <= 0 or np.min(phi[:, 2]) < 0:
        raise ControlNotPositive(
            "phi1 and phi2 must be > 0 and phi3 >= 0",
            {"min_phi1": float(np.min(phi[:, 0])), "min_phi2": float(np.min(phi[:, 1])),
             "min_phi3": float(np.min(phi[:, 2]))},
        )
    grid = np.asarray(controls.grid, dtype=float)
    if grid[-1] < T * (1.0 - 1e-12):
        raise ConfigInvalid(f"controls end at {grid[-1]}, before T={T}", {"control_T": float(grid[-1]), "T": T})
    if grid.size < 2:
        raise ConfigInvalid("controls need at least two grid points", {"size": int(grid.size)})

    with np.errstate(divide="ignore"):
        logs = np.log(phi)
    # cell j runs at the left-endpoint controls, so they are its tightest majorant
    majorants = phi[:-1].copy()
    return ControlTable(grid=grid, values=phi, logs=logs, majorants=majorants)


def run_tilted(params: ModelParams, T: float, n: int, q0: int, table: ControlTable,
               draws: RandomDraws, record: bool = True) -> PathOutcome:
    """
    Thinning against a per-cell majorant of the tilted rates

    Within cell j the tilted rates use the controls at grid[j], which also
    serve as the cell majorant. The clock restarts at every cell boundary;
    a candidate is rejected only when rounding leaves u above the tilted
    total.
    """
    lam_n, mu, theta = params.lambda_ * n, params.mu, params.theta
    mu_n = mu * n
    many = params.many_server
    grid = table.grid.tolist()
    values, logs, majorants = table.values.tolist(), table.logs.tolist(), table.majorants.tolist()
    cells = len(majorants)

    q, y, arrivals, services = q0, 0, 0, 0
    t, exposure, log_lr = 0.0, 0.0, 0.0
    outcome = PathOutcome(queue=q0, renegings=0, arrivals=0, services=0, log_lr=0.0, renege_exposure=0.0)
    if record:
        _record(outcome, 0.0, q0, 0, INITIAL)

    j = 0
    while j < cells and t < T:
        cell_end = min(grid[j + 1], T)
        f1, f2, f3 = values[j]
        g1, g2, g3 = majorants[j]
        while True:
            srv, level = _service_and_level(many, q, n, mu_n, mu)
            ren = theta * level
            a1, a2, a3 = lam_n * f1, srv * f2, ren * f3
            excess = (a1 - lam_n) + (a2 - srv) + (a3 - ren)
            bound = lam_n * g1 + srv * g2 + ren * g3
            dt = draws.exponential() / bound
            if t + dt >= cell_end:
                span = cell_end - t
                log_lr += excess * span
                exposure += ren * span
                t = cell_end
                break
            log_lr += excess * dt
            exposure += ren * dt
            t += dt
            u = draws.uniform() * bound
            if u < a1:
                q += 1
                arrivals += 1
                log_lr -= logs[j][0]
                kind = ARRIVAL
            elif u < a1 + a2:
                q -= 1
                services += 1
                log_lr -= logs[j][1]
                kind = SERVICE
            elif u < a1 + a2 + a3:
                q -= 1
                y += 1
                log_lr -= logs[j][2]
                kind = RENEGE
            else:
                continue
            if record:
                _record(outcome, t, q, y, kind)
        j += 1

    outcome.queue, outcome.renegings = q, y
    outcome.arrivals, outcome.services = arrivals, services
    outcome.log_lr = log_lr
    outcome.renege_exposure = exposure
    return outcome


def _sample_path(config: SimConfig, outcome: PathOutcome) -> SamplePath:
    n = config.n
    return SamplePath(
        n=n,
        jump_times=np.asarray(outcome.times, dtype=float),
        x_bar=np.asarray(outcome.queues, dtype=float) / n,
        y_bar=np.asarray(outcome.reneged, dtype=float) / n,
        event_types=np.asarray(outcome.kinds, dtype=np.int8),
        log_lr=outcome.log_lr,
        counts={"arrivals": outcome.arrivals, "services": outcome.services, "renegings": outcome.renegings},
        initial_queue=config.initial_queue,
        final_x=outcome.queue / n,
        final_y=outcome.renegings / n,
        renege_exposure=outcome.renege_exposure,
    )


def simulate(config: SimConfig, replication: int = 0) -> SamplePath:
    """
    One untilted sample path, deterministic in (seed, replication)

    The first record is the initial state at t = 0 (event type -1).
    """
    validate(config.params, config.horizon, Purpose.SIMULATION)
    draws = RandomDraws(replication_rng(config.seed, replication))
    outcome = run_direct(config.params, config.horizon.T, config.n, config.initial_queue, draws)
    logger.debug(f"Simulated n={config.n}: {len(outcome.times) - 1} events, final X={outcome.queue / config.n:.6g}")
    return _sample_path(config, outcome)


def simulate_tilted(config: SimConfig, controls: Trajectory, replication: int = 0) -> SamplePath:
    """One sample path under the control tilt, with its log likelihood ratio"""
    validate(config.params, config.horizon, Purpose.SIMULATION)
    table = control_table(controls, config.horizon.T)
    draws = RandomDraws(replication_rng(config.seed, replication))
    outcome = run_tilted(config.params, config.horizon.T, config.n, config.initial_queue, table, draws)
    if not math.isfinite(outcome.log_lr):
        logger.warning(f"Non-finite log likelihood ratio in replication {replication}")
    return _sample_path(config, outcome)


def null_controls(T: float, points: int = 2) -> Trajectory:
    """Controls identically (1, 1, 1): the untilted law"""
    grid = np.linspace(0.0, T, points)
    return Trajectory(grid=grid, xi=np.zeros(points), zeta=np.zeros(points), controls=np.ones((points, 3)))


def constant_controls(T: float, phi1: float, phi2: float, phi3: float, points: int = 2) -> Trajectory:
    """Time-constant tilt"""
    grid = np.linspace(0.0, T, points)
    controls = np.tile(np.array([phi1, phi2, phi3], dtype=float), (points, 1))
    return Trajectory(grid=grid, xi=np.zeros(points), zeta=np.zeros(points), controls=controls)
