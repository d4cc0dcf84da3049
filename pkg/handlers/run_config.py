"""
Run configuration shared by the CLI handlers

Merges built-in defaults, an optional --config JSON file and explicit flags
(in that order of precedence) into one validated RunConfig, and writes
tables in the configured output format.
"""
import argparse
import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

from pydantic import ValidationError

from config.settings import OUTPUT_CONFIG, SIMULATION_CONFIG, get_solver_setting
from core.errors import ConfigInvalid
from core.models import Command, RunConfig, OutputFormat, Trajectory, SamplePath
from storage.artifact_manager import artifact_manager, sample_path_columns

logger = logging.getLogger(__name__)

PARAM_KEYS = ("lambda", "mu", "theta", "x0", "mode")

# Keys each pipeline cannot run without
REQUIRED_KEYS: Dict[Command, Sequence[str]] = {
    Command.DECAY_RATE: ("lambda", "mu", "gamma"),
    Command.FLUID: ("lambda", "mu", "T"),
    Command.MINIMIZER: ("lambda", "mu", "gamma", "T"),
    Command.ORACLE: ("lambda", "mu", "gamma", "T"),
    Command.SIMULATE: ("lambda", "mu", "T", "n"),
    Command.ESTIMATE: ("lambda", "mu", "gamma", "T", "n"),
    Command.SWEEP: ("lambda", "mu", "gamma", "T"),
    Command.PARADOX_CHECK: ("lambda", "mu", "gamma", "T"),
}


def _float_list(text: str) -> List[float]:
    try:
        return [float(item) for item in text.split(",") if item.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _int_list(text: str) -> List[int]:
    try:
        return [int(item) for item in text.split(",") if item.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def common_arguments() -> argparse.ArgumentParser:
    """
    Parent parser with one flag per config key

    Every default is None so that only flags given on the command line
    override the --config file.
    """
    parser = argparse.ArgumentParser(add_help=False)
    parser.add_argument("--config", help="JSON file with any of the keys below")
    model = parser.add_argument_group("model")
    model.add_argument("--lambda", dest="lambda", type=float, help="arrival rate")
    model.add_argument("--mu", type=float, help="service rate")
    model.add_argument("--theta", type=float, help="reneging rate per waiting customer (default 1)")
    model.add_argument("--x0", type=float, help="scaled initial queue length (default 0)")
    model.add_argument("--mode", choices=["SingleServer", "ManyServer"])
    model.add_argument("--T", dest="T", type=float, help="time horizon")
    model.add_argument("--gamma", type=float, help="target reneging rate")

    options = parser.add_argument_group("options")
    options.add_argument("--grid-size", dest="grid_size", type=int)
    options.add_argument("--tol", type=float)
    options.add_argument("--max-iters", dest="max_iters", type=int)
    options.add_argument("--n", type=int, help="scale (queue length unit)")
    options.add_argument("--seed", type=int)
    options.add_argument("--replications", type=int)
    options.add_argument("--m-list", dest="m_list", type=_int_list)
    options.add_argument("--n-list", dest="n_list", type=_int_list)
    options.add_argument("--thetas", type=_float_list)
    options.add_argument("--horizons", type=_float_list)
    options.add_argument("--gammas", type=_float_list)
    options.add_argument("--direction", choices=["AtLeast", "AtMost"])
    options.add_argument("--method", choices=["naive", "is", "both"])
    options.add_argument("--tilted", action="store_const", const=True)
    options.add_argument("--workers", type=int)
    options.add_argument("--output-dir", dest="output_dir")
    options.add_argument("--format", choices=["csv", "json"])
    return parser


def load_config_file(path: str) -> Dict[str, Any]:
    """Read a flat JSON config file"""
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as e:
        raise ConfigInvalid(f"cannot read config file {path}: {e}", {"path": path})
    except json.JSONDecodeError as e:
        raise ConfigInvalid(f"config file {path} is not valid JSON: {e}", {"path": path, "line": e.lineno})
    if not isinstance(data, dict):
        raise ConfigInvalid("config file must hold a JSON object", {"path": path})
    return data


def build_run_config(command: str, flags: Dict[str, Any]) -> RunConfig:
    """
    Merge defaults < config file < flags and validate

    Args:
        command: Subcommand name
        flags: Parsed argparse namespace as a dict

    Returns:
        Validated RunConfig

    Raises:
        ConfigInvalid: unreadable file, unknown key, missing required key or
            a value rejected by the models
    """
    command = Command(command)
    flat: Dict[str, Any] = {
        "theta": 1.0,
        "x0": 0.0,
        "grid_size": get_solver_setting("grid_size"),
        "seed": SIMULATION_CONFIG["seed"],
        "output_dir": OUTPUT_CONFIG["output_dir"],
        "format": OUTPUT_CONFIG["format"],
    }
    config_path = flags.get("config")
    if config_path:
        logger.debug(f"Loading run config from {config_path}")
        flat.update(load_config_file(config_path))
    flat.update({k: v for k, v in flags.items() if v is not None and k not in ("config", "command", "handler")})

    missing = [key for key in REQUIRED_KEYS[command] if flat.get(key) is None]
    if missing:
        raise ConfigInvalid(f"{command.value} needs {', '.join(missing)}", {"missing": missing})

    params = {key: flat.pop(key) for key in PARAM_KEYS if key in flat}
    structured: Dict[str, Any] = {"command": command, "params": params}
    T = flat.pop("T", None)
    gamma = flat.pop("gamma", None)
    if T is not None:
        structured["horizon"] = {"T": T}
    if gamma is not None:
        structured["target"] = {"gamma": gamma}
    structured.update(flat)

    try:
        return RunConfig.model_validate(structured)
    except ValidationError as e:
        errors = [{"loc": ".".join(str(p) for p in err["loc"]), "msg": err["msg"]} for err in e.errors()]
        raise ConfigInvalid(f"invalid configuration for {command.value}", {"errors": errors})


def emit_table(config: RunConfig, rows: List[Dict[str, Any]], stem: str,
               columns: Optional[Sequence[str]] = None) -> str:
    """Write a table as CSV or JSON per config.format and return the path"""
    if config.format == OutputFormat.JSON:
        path = artifact_manager.save_json({"rows": rows}, f"{stem}.json", config.command.value, config.echo())
    else:
        path = artifact_manager.save_table(rows, f"{stem}.csv", columns)
    return str(path)


def emit_trajectory(config: RunConfig, traj: Trajectory, stem: str) -> str:
    """Write a trajectory as CSV (t,xi,zeta[,phi1..phi3]) or JSON columns"""
    if config.format == OutputFormat.JSON:
        path = artifact_manager.save_json({"columns": traj.columns()}, f"{stem}.json",
                                          config.command.value, config.echo())
    else:
        path = artifact_manager.save_trajectory(traj, f"{stem}.csv")
    return str(path)


def emit_sample_path(config: RunConfig, sample: SamplePath, stem: str) -> str:
    if config.format == OutputFormat.JSON:
        path = artifact_manager.save_json({"columns": sample_path_columns(sample)}, f"{stem}.json",
                                          config.command.value, config.echo())
    else:
        path = artifact_manager.save_sample_path(sample, f"{stem}.csv")
    return str(path)
