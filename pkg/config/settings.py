"""
Runtime Configuration
Solver tolerances, simulation defaults and output settings, overridable
through environment variables or a .env file
"""
import os
from dotenv import load_dotenv

load_dotenv()

APP_VERSION = '0.1.0'


def _env_float(name: str, default: float) -> float:
    return float(os.getenv(name, str(default)))


def _env_int(name: str, default: int) -> int:
    return int(os.getenv(name, str(default)))


# Numerical solver settings
SOLVER_CONFIG = {
    'tilt_tol': _env_float('RENEGE_LDP_TILT_TOL', 1e-12),
    'tilt_max_iter': _env_int('RENEGE_LDP_TILT_MAX_ITER', 200),
    'oracle_eps_x': _env_float('RENEGE_LDP_ORACLE_EPS_X', 1e-8),
    'oracle_armijo': 0.5,
    'oracle_initial_step': 1.0,
    'oracle_max_iters': _env_int('RENEGE_LDP_ORACLE_MAX_ITERS', 50000),
    'oracle_tol': _env_float('RENEGE_LDP_ORACLE_TOL', 1e-12),
    'grid_size': _env_int('RENEGE_LDP_GRID_SIZE', 10001),
}

# Monte Carlo settings
SIMULATION_CONFIG = {
    'threads': _env_int('RENEGE_LDP_THREADS', 1),
    'block_size': _env_int('RENEGE_LDP_BLOCK_SIZE', 4096),
    'seed': _env_int('RENEGE_LDP_SEED', 12345),
}

# Artifact output
OUTPUT_CONFIG = {
    'output_dir': os.getenv('RENEGE_LDP_OUTPUT_DIR', './results'),
    'format': os.getenv('RENEGE_LDP_OUTPUT_FORMAT', 'csv').lower(),
    'float_format': '%.17g',
}


def get_thread_cap() -> int:
    """
    Get the worker cap for parallel replications

    Returns:
        Number of worker threads (at least 1)
    """
    return max(1, int(SIMULATION_CONFIG.get('threads', 1)))


def get_solver_setting(name: str):
    """
    Get a solver setting

    Args:
        name: Key in SOLVER_CONFIG (tilt_tol, oracle_max_iters, ...)

    Returns:
        Configured value

    Raises:
        KeyError: for an unknown setting
    """
    return SOLVER_CONFIG[name]
