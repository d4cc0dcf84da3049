"""
Parameter validation shared by every numerical entry point
"""
import logging
from typing import Tuple

from core.errors import (
    RateNonpositive, LambdaLessThanMu, ManyServerX0TooSmall, HorizonNonpositive,
)
from core.models import ModelParams, Horizon, Purpose, ServerMode

logger = logging.getLogger(__name__)


def validate(
    params: ModelParams,
    horizon: Horizon,
    purpose: Purpose = Purpose.VARIATIONAL,
) -> Tuple[ModelParams, Horizon]:
    """
    Check the invariants required for ``purpose``

    Args:
        params: Model rates and initial condition
        horizon: Time horizon
        purpose: Simulation accepts lambda < mu, Variational does not

    Returns:
        The inputs, unchanged

    Raises:
        RateNonpositive, LambdaLessThanMu, ManyServerX0TooSmall,
        HorizonNonpositive
    """
    _check_rates(params)
    if params.x0 < 0:
        raise RateNonpositive(f"x0 must be >= 0, got {params.x0}", {"field": "x0", "value": params.x0})
    if horizon.T <= 0:
        raise HorizonNonpositive(f"T must be > 0, got {horizon.T}", {"T": horizon.T})

    purpose = Purpose(purpose)
    if purpose == Purpose.VARIATIONAL:
        _check_supercritical(params)
        if params.mode == ServerMode.MANY and params.x0 < 1:
            raise ManyServerX0TooSmall(
                f"many-server variational computations need x0 >= 1, got {params.x0}",
                {"x0": params.x0},
            )

    logger.debug(f"Validated {params.to_json_dict()} T={horizon.T} for {purpose.value}")
    return params, horizon


def require_supercritical(params: ModelParams) -> ModelParams:
    """
    Rate checks for variational quantities that depend on the rates only
    (decay rate, heuristic); x0 and the horizon do not enter
    """
    _check_rates(params)
    _check_supercritical(params)
    return params


def _check_rates(params: ModelParams):
    for name, value in (("lambda", params.lambda_), ("mu", params.mu), ("theta", params.theta)):
        if value <= 0:
            raise RateNonpositive(f"{name} must be > 0, got {value}", {"field": name, "value": value})


def _check_supercritical(params: ModelParams):
    if params.lambda_ < params.mu:
        raise LambdaLessThanMu(
            f"variational computations need lambda >= mu (lambda={params.lambda_}, mu={params.mu})",
            {"lambda": params.lambda_, "mu": params.mu},
        )
