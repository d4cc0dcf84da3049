"""
Tests for domain models, validation and the error hierarchy
"""
import numpy as np
import pytest
from pydantic import ValidationError

from core.errors import (
    RenegeLDPError, ParameterError, NumericsError, LambdaLessThanMu, RateNonpositive,
    ManyServerX0TooSmall, HorizonNonpositive, NotConverged, ConfigInvalid,
)
from core.models import (
    ModelParams, Horizon, TargetRate, Trajectory, SimConfig, ServerMode, Purpose, RunConfig, Command,
)
from core.validation import validate, require_supercritical


def test_params_accept_lambda_alias():
    params = ModelParams(**{"lambda": 2.0, "mu": 1.0, "theta": 1.0})
    assert params.lambda_ == 2.0
    assert params.x0 == 0.0
    assert params.mode == ServerMode.SINGLE
    assert params.to_json_dict()["lambda"] == 2.0


def test_params_are_frozen(base_params):
    with pytest.raises(ValidationError):
        base_params.mu = 3.0


def test_params_replace(base_params):
    changed = base_params.replace(**{"lambda": 5.0, "theta": 2.0})
    assert changed.lambda_ == 5.0
    assert changed.theta == 2.0
    assert base_params.lambda_ == 2.0


def test_params_reject_nan():
    with pytest.raises(ValidationError):
        ModelParams(**{"lambda": float("nan"), "mu": 1.0, "theta": 1.0})


def test_negative_gamma_rejected():
    with pytest.raises(ValidationError):
        TargetRate(gamma=-0.1)


def test_validate_accepts_supercritical(base_params, horizon10):
    assert validate(base_params, horizon10) == (base_params, horizon10)


def test_validate_subcritical_depends_on_purpose():
    params = ModelParams(**{"lambda": 1.0, "mu": 2.0, "theta": 1.0, "x0": 0.0})
    with pytest.raises(LambdaLessThanMu):
        validate(params, Horizon(T=1.0), Purpose.VARIATIONAL)
    validate(params, Horizon(T=1.0), Purpose.SIMULATION)


def test_validate_rejects_nonpositive_rates():
    params = ModelParams(**{"lambda": 2.0, "mu": 0.0, "theta": 1.0})
    with pytest.raises(RateNonpositive) as info:
        validate(params, Horizon(T=1.0))
    assert info.value.details["field"] == "mu"


def test_validate_rejects_nonpositive_horizon(base_params):
    with pytest.raises(HorizonNonpositive):
        validate(base_params, Horizon(T=0.0))


def test_many_server_needs_full_occupancy():
    params = ModelParams(**{"lambda": 2.0, "mu": 1.0, "theta": 1.0, "x0": 0.5, "mode": "ManyServer"})
    with pytest.raises(ManyServerX0TooSmall):
        validate(params, Horizon(T=1.0))
    validate(params, Horizon(T=1.0), Purpose.SIMULATION)
    assert require_supercritical(params) is params


def test_rate_only_check_rejects_subcritical_rates():
    params = ModelParams(**{"lambda": 1.0, "mu": 2.0, "theta": 1.0})
    with pytest.raises(LambdaLessThanMu):
        require_supercritical(params)


def test_error_families_and_exit_status():
    assert issubclass(LambdaLessThanMu, ParameterError)
    assert issubclass(ParameterError, ValueError)
    assert issubclass(NotConverged, NumericsError)
    assert issubclass(NumericsError, ArithmeticError)
    assert LambdaLessThanMu().exit_status == 2
    assert NotConverged().exit_status == 3


def test_error_to_dict():
    err = NotConverged("stuck", {"iterations": 10})
    assert isinstance(err, RenegeLDPError)
    assert err.to_dict() == {"error": "NotConverged", "message": "stuck", "details": {"iterations": 10}}


def test_trajectory_is_read_only():
    traj = Trajectory(grid=[0.0, 1.0], xi=[1.0, 1.0], zeta=[0.0, 1.0])
    with pytest.raises(ValueError):
        traj.xi[0] = 3.0
    assert traj.T == 1.0
    assert traj.size == 2


@pytest.mark.parametrize("fields", [
    {"grid": [0.0, 1.0], "xi": [1.0], "zeta": [0.0, 1.0]},
    {"grid": [0.5, 1.0], "xi": [1.0, 1.0], "zeta": [0.0, 1.0]},
    {"grid": [0.0, 1.0], "xi": [1.0, 1.0], "zeta": [0.0, -1.0]},
    {"grid": [0.0, 1.0], "xi": [1.0, -0.5], "zeta": [0.0, 1.0]},
    {"grid": [0.0, 1.0], "xi": [1.0, 1.0], "zeta": [0.0, 1.0], "controls": [[1.0, 1.0, 1.0]]},
])
def test_trajectory_rejects_malformed_input(fields):
    with pytest.raises(ValidationError):
        Trajectory(**fields)


def test_trajectory_columns_and_shift():
    traj = Trajectory(grid=[0.0, 1.0], xi=[0.0, 0.5], zeta=[0.0, 1.0], controls=np.ones((2, 3)))
    shifted = traj.shifted(1.0)
    assert list(shifted.columns()) == ["t", "xi", "zeta", "phi1", "phi2", "phi3"]
    assert np.allclose(shifted.xi, [1.0, 1.5])


def test_initial_queue_rounds_half_to_even(base_params):
    params = base_params.replace(x0=0.25)
    assert SimConfig(params=params, horizon=Horizon(T=1.0), n=10, seed=0).initial_queue == 2
    assert SimConfig(params=params, horizon=Horizon(T=1.0), n=4, seed=0).initial_queue == 1


def test_run_config_echo_is_flat(base_params, horizon10, target2):
    config = RunConfig(command=Command.MINIMIZER, params=base_params, horizon=horizon10, target=target2)
    echo = config.echo()
    assert echo["lambda"] == 2.0
    assert echo["T"] == 10.0
    assert echo["gamma"] == 2.0
    assert echo["command"] == "minimizer"


def test_run_config_forbids_unknown_keys(base_params):
    with pytest.raises(ValidationError):
        RunConfig(command=Command.FLUID, params=base_params, colour="blue")


def test_config_invalid_is_parameter_error():
    assert ConfigInvalid("x").exit_status == 2
