"""
Euclidean projections used by the discretized variational problem
"""
import numpy as np


def project_simplex(v: np.ndarray, total: float) -> np.ndarray:
    """
    Project v onto {q >= 0, sum(q) = total} (sort-based, O(m log m))

    Args:
        v: Point to project
        total: Required sum, >= 0

    Returns:
        Projected vector of the same shape
    """
    v = np.asarray(v, dtype=float)
    if total <= 0:
        return np.zeros_like(v)
    u = -np.sort(-v)
    cssv = np.cumsum(u) - total
    ranks = np.arange(1, v.size + 1)
    rho = np.nonzero(u - cssv / ranks > 0)[0][-1]
    tau = cssv[rho] / (rho + 1)
    return np.maximum(v - tau, 0.0)


def project_weighted_simplex(v: np.ndarray, total: float, dt: float) -> np.ndarray:
    """
    Project slopes v onto {q >= 0, dt * sum(q) = total} on a uniform grid

    The constraint is restored exactly by a final rescale of the positive
    part, which moves the point by at most a few ulps.
    """
    q = project_simplex(v, total / dt)
    mass = dt * float(np.sum(q))
    if mass > 0 and total > 0:
        q *= total / mass
    return q


def project_floor(x: np.ndarray, floor: float) -> np.ndarray:
    """Clip to [floor, inf)"""
    return np.maximum(np.asarray(x, dtype=float), floor)
