"""
Domain models for renege-ldp
"""
import math
from enum import Enum
from typing import Optional, List, Dict, Any

import numpy as np
from pydantic import BaseModel, Field, ConfigDict, field_validator, model_validator

# Arrays are stored read-only; models are frozen so values never change after
# construction.
ARRAY_CONFIG = ConfigDict(arbitrary_types_allowed=True, frozen=True, populate_by_name=True)


def _frozen_array(value: Any, dtype=float) -> np.ndarray:
    arr = np.array(value, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


def _finite(value: float, name: str) -> float:
    if not math.isfinite(value):
        raise ValueError(f"{name} must be finite, got {value}")
    return value


class ServerMode(str, Enum):
    """Single fast server or n servers at scale n"""
    SINGLE = "SingleServer"
    MANY = "ManyServer"


class Purpose(str, Enum):
    """What the parameters are about to be used for"""
    SIMULATION = "Simulation"
    VARIATIONAL = "Variational"


class Direction(str, Enum):
    """Tail of the reneging event"""
    AT_LEAST = "AtLeast"
    AT_MOST = "AtMost"


class ModelParams(BaseModel):
    """Rates and scaled initial queue length"""
    lambda_: float = Field(alias="lambda")
    mu: float
    theta: float
    x0: float = 0.0
    mode: ServerMode = ServerMode.SINGLE

    model_config = ConfigDict(populate_by_name=True, frozen=True)

    @field_validator("lambda_", "mu", "theta", "x0")
    @classmethod
    def _check_finite(cls, v: float, info) -> float:
        return _finite(v, info.field_name)

    @property
    def many_server(self) -> bool:
        return self.mode == ServerMode.MANY

    def replace(self, **changes) -> "ModelParams":
        """Copy with some fields changed (accepts ``lambda`` or ``lambda_``)"""
        if "lambda" in changes:
            changes["lambda_"] = changes.pop("lambda")
        return self.model_copy(update=changes)

    def to_json_dict(self) -> Dict[str, Any]:
        return self.model_dump(mode="json", by_alias=True)


class Horizon(BaseModel):
    """Time horizon [0, T]"""
    T: float

    model_config = ConfigDict(frozen=True)

    @field_validator("T")
    @classmethod
    def _check_finite(cls, v: float) -> float:
        return _finite(v, "T")


class TargetRate(BaseModel):
    """Target reneging per unit time"""
    gamma: float

    model_config = ConfigDict(frozen=True)

    @field_validator("gamma")
    @classmethod
    def _check_gamma(cls, v: float) -> float:
        _finite(v, "gamma")
        if v < 0:
            raise ValueError(f"gamma must be >= 0, got {v}")
        return v


class Trajectory(BaseModel):
    """
    Sampled pair (xi, zeta) on a time grid, with optional control triples

    ``controls`` has shape (len(grid), 3) holding (phi1, phi2, phi3).
    """
    grid: np.ndarray
    xi: np.ndarray
    zeta: np.ndarray
    controls: Optional[np.ndarray] = None

    model_config = ARRAY_CONFIG

    @field_validator("grid", "xi", "zeta", mode="before")
    @classmethod
    def _as_array(cls, v: Any) -> np.ndarray:
        return _frozen_array(v)

    @field_validator("controls", mode="before")
    @classmethod
    def _controls_array(cls, v: Any) -> Optional[np.ndarray]:
        if v is None:
            return None
        return _frozen_array(v)

    @model_validator(mode="after")
    def _check_shape(self) -> "Trajectory":
        m = self.grid.shape[0]
        if self.grid.ndim != 1 or self.xi.shape != (m,) or self.zeta.shape != (m,):
            raise ValueError("grid, xi and zeta must be 1-D sequences of equal length")
        if m == 0:
            raise ValueError("trajectory needs at least one grid point")
        if self.grid[0] != 0.0:
            raise ValueError("grid must start at 0")
        if m > 1 and not np.all(np.diff(self.grid) > 0):
            raise ValueError("grid must be strictly increasing")
        if self.zeta[0] != 0.0:
            raise ValueError("zeta must start at 0")
        scale = max(1.0, float(np.max(np.abs(self.zeta))))
        if m > 1 and np.min(np.diff(self.zeta)) < -1e-12 * scale:
            raise ValueError("zeta must be nondecreasing")
        if np.min(self.xi) < -1e-12:
            raise ValueError("xi must be nonnegative")
        if self.controls is not None:
            if self.controls.shape != (m, 3):
                raise ValueError("controls must have shape (len(grid), 3)")
            if np.min(self.controls) < 0:
                raise ValueError("controls must be nonnegative")
        return self

    @property
    def T(self) -> float:
        return float(self.grid[-1])

    @property
    def size(self) -> int:
        return int(self.grid.shape[0])

    def shifted(self, offset: float) -> "Trajectory":
        """Same trajectory with xi moved up by ``offset``"""
        return Trajectory(grid=self.grid, xi=self.xi + offset, zeta=self.zeta,
                          controls=self.controls)

    def columns(self) -> Dict[str, np.ndarray]:
        """Named columns in CSV order"""
        cols = {"t": self.grid, "xi": self.xi, "zeta": self.zeta}
        if self.controls is not None:
            cols["phi1"] = self.controls[:, 0]
            cols["phi2"] = self.controls[:, 1]
            cols["phi3"] = self.controls[:, 2]
        return cols


class CostReport(BaseModel):
    """Path cost with its arrival / service / reneging breakdown"""
    total: float
    normalized: float
    components: Dict[str, float] = Field(default_factory=dict)
    decay_rate: Optional[float] = None

    model_config = ConfigDict(frozen=True)

    @field_validator("total")
    @classmethod
    def _check_total(cls, v: float) -> float:
        if math.isnan(v) or v < 0:
            raise ValueError(f"total cost must be >= 0, got {v}")
        return v


class LocalCostInput(BaseModel):
    """Point (x, p, q) at which the local cost is evaluated"""
    x: float
    p: float
    q: float

    model_config = ConfigDict(frozen=True)

    @model_validator(mode="after")
    def _check_domain(self) -> "LocalCostInput":
        if not (math.isfinite(self.x) and math.isfinite(self.p) and math.isfinite(self.q)):
            raise ValueError("local cost input must be finite")
        if self.x < 0 or self.q < 0:
            raise ValueError("x and q must be nonnegative")
        return self


class DecayRateResult(BaseModel):
    """Decay rate C(gamma) and the tilt root z(gamma)"""
    c_gamma: float
    z_gamma: float

    model_config = ConfigDict(frozen=True)


class HeuristicOptimum(BaseModel):
    """Optimizer of the tilted-rates heuristic for the decay rate"""
    value: float
    lambda_star: float
    mu_star: float
    theta_star: float

    model_config = ConfigDict(frozen=True)


class ReflectedPath(BaseModel):
    """Output of the one-dimensional reflection map"""
    grid: np.ndarray
    values: np.ndarray
    pushing: np.ndarray

    model_config = ARRAY_CONFIG

    @field_validator("grid", "values", "pushing", mode="before")
    @classmethod
    def _as_array(cls, v: Any) -> np.ndarray:
        return _frozen_array(v)


class TiltParameters(BaseModel):
    """Euler-Lagrange constants in the stabilized variable a = A e^{theta T}"""
    a: float
    A: float
    B: float
    lambda_cap: float
    log_lambda_cap: float
    residual: float
    quadratic_residual: float
    iterations: int
    bracket: List[float] = Field(default_factory=list)
    bracket_defects: List[float] = Field(default_factory=list)
    wide_bracket: bool = False

    model_config = ConfigDict(frozen=True)


class OptimalityReport(BaseModel):
    """Outcome of the optimality side-condition checks"""
    checks: Dict[str, bool]
    skipped: List[str] = Field(default_factory=list)
    min_xi: float
    c0: Optional[float] = None
    max_product_defect: float
    terminal_phi1_defect: float
    max_flow_defect: float

    model_config = ConfigDict(frozen=True)

    @property
    def passed(self) -> bool:
        return all(self.checks.values())

    @property
    def failed(self) -> List[str]:
        return [name for name, ok in self.checks.items() if not ok]


class DiscreteProblem(BaseModel):
    """Piecewise-linear discretization of the terminal-reneging problem"""
    params: ModelParams
    T: float
    gamma: float
    m: int
    eps_x: float = 1e-8

    model_config = ConfigDict(frozen=True)

    @property
    def dt(self) -> float:
        return self.T / self.m


class OracleDiagnostics(BaseModel):
    """Convergence record of the variational oracle"""
    iterations: int
    objective: float
    gradient_norm: float
    last_step: float
    converged: bool
    history: List[float] = Field(default_factory=list)

    model_config = ConfigDict(frozen=True)


class SimConfig(BaseModel):
    """Scale, seed and replication count of a simulation run"""
    params: ModelParams
    horizon: Horizon
    n: int = Field(ge=1)
    seed: int = Field(ge=0, lt=2 ** 64)
    replications: int = Field(default=1, ge=1)

    model_config = ConfigDict(frozen=True)

    @property
    def initial_queue(self) -> int:
        # round() rounds half to even
        return int(round(self.n * self.params.x0))


class SamplePath(BaseModel):
    """One simulated realization of the scaled queue"""
    n: int
    jump_times: np.ndarray
    x_bar: np.ndarray
    y_bar: np.ndarray
    event_types: np.ndarray
    log_lr: float = 0.0
    counts: Dict[str, int]
    initial_queue: int
    final_x: float
    final_y: float
    renege_exposure: float = 0.0

    model_config = ARRAY_CONFIG

    @field_validator("jump_times", "x_bar", "y_bar", mode="before")
    @classmethod
    def _as_array(cls, v: Any) -> np.ndarray:
        return _frozen_array(v)

    @field_validator("event_types", mode="before")
    @classmethod
    def _as_int_array(cls, v: Any) -> np.ndarray:
        return _frozen_array(v, dtype=np.int8)


class EstimateReport(BaseModel):
    """Monte Carlo estimate of a reneging tail probability"""
    p_hat: float
    ci95: float
    std_error: float
    log_decay: Optional[float] = None
    ess: Optional[float] = None
    replications_used: int
    hits: int
    degenerate: bool = False

    model_config = ConfigDict(frozen=True)

    @model_validator(mode="after")
    def _check_bounds(self) -> "EstimateReport":
        if self.ess is not None and self.ess > self.replications_used * (1 + 1e-9):
            raise ValueError("ess cannot exceed the number of replications")
        return self


class Command(str, Enum):
    """CLI pipelines"""
    DECAY_RATE = "decay-rate"
    FLUID = "fluid"
    MINIMIZER = "minimizer"
    ORACLE = "oracle"
    SIMULATE = "simulate"
    ESTIMATE = "estimate"
    SWEEP = "sweep"
    PARADOX_CHECK = "paradox-check"


class EstimateMethod(str, Enum):
    NAIVE = "naive"
    IMPORTANCE = "is"
    BOTH = "both"


class OutputFormat(str, Enum):
    CSV = "csv"
    JSON = "json"


class RunConfig(BaseModel):
    """One fully merged CLI invocation"""
    command: Command
    params: ModelParams
    horizon: Optional[Horizon] = None
    target: Optional[TargetRate] = None
    grid_size: int = Field(default=10001, ge=2)
    tol: Optional[float] = Field(default=None, gt=0)
    max_iters: Optional[int] = Field(default=None, ge=1)
    n: Optional[int] = Field(default=None, ge=1)
    seed: int = Field(default=12345, ge=0, lt=2 ** 64)
    replications: int = Field(default=1000, ge=1)
    m_list: List[int] = Field(default_factory=lambda: [250, 500, 1000, 2000])
    n_list: List[int] = Field(default_factory=lambda: [10, 20, 40, 80])
    thetas: List[float] = Field(default_factory=lambda: [0.5, 1.0, 2.0])
    horizons: List[float] = Field(default_factory=lambda: [10.0, 20.0, 50.0, 200.0])
    gammas: List[float] = Field(default_factory=list)
    direction: Direction = Direction.AT_LEAST
    method: EstimateMethod = EstimateMethod.BOTH
    tilted: bool = False
    workers: Optional[int] = Field(default=None, ge=1)
    output_dir: Optional[str] = None
    format: OutputFormat = OutputFormat.CSV

    model_config = ConfigDict(frozen=True, extra="forbid")

    def echo(self) -> Dict[str, Any]:
        """Flat configuration as it would appear in a --config file"""
        flat = self.model_dump(mode="json", exclude={"params", "horizon", "target"})
        flat.update(self.params.to_json_dict())
        if self.horizon is not None:
            flat["T"] = self.horizon.T
        if self.target is not None:
            flat["gamma"] = self.target.gamma
        return flat
