"""
Root finder for the Euler-Lagrange tilt constant

The unknown A is solved in the stabilized variable a = A e^{theta T} < 1,
which keeps every quantity representable for theta*T far beyond 700:

    1 - A e^{theta t} = 1 - a e^{-theta (T - t)}
    log Lambda_T      = -theta T + log(1 - a) - log(1 - a e^{-theta T})
    B                 = 1 / (1 - a)
"""
import logging
import math
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np
from scipy.optimize import brentq

from core.errors import BracketingFailed, ConfigInvalid, GammaNonpositive, NumericsFailed
from core.models import ModelParams, Horizon, TargetRate, TiltParameters
from core.validation import validate
from config.settings import get_solver_setting

logger = logging.getLogger(__name__)

UPPER_GAPS = (1e-12, 1e-14, 1e-15)
WIDE_BRACKET = 1e16
LOWEST_A = -1e300


@dataclass(frozen=True)
class TiltTerms:
    """Quantities of the tilt equation at one value of a"""
    a: float
    A: float
    B: float
    log_lambda: float
    lam_cap: float
    D: float
    S: float
    g: float


def tilt_terms(params: ModelParams, T: float, gamma: float, a: float) -> TiltTerms:
    theta_t = params.theta * T
    e_t = math.exp(-theta_t)
    A = a * e_t
    log_lambda = -theta_t + math.log1p(-a) - math.log1p(-A)
    lam_cap = math.exp(log_lambda)
    D = theta_t + math.expm1(-theta_t)
    S = gamma * T - params.x0 * (-math.expm1(log_lambda))
    g = log_lambda - lam_cap + 1.0
    return TiltTerms(a=a, A=A, B=1.0 / (1.0 - a), log_lambda=log_lambda, lam_cap=lam_cap,
                     D=D, S=S, g=g)


def _positive_root(params: ModelParams, terms: TiltTerms) -> float:
    """Positive root of lambda*D*B^2 - theta*S*B + mu*g = 0 (g <= 0)"""
    lam, mu, theta = params.lambda_, params.mu, params.theta
    ts = theta * terms.S
    disc = math.sqrt(ts * ts - 4.0 * lam * terms.D * mu * terms.g)
    if ts >= 0:
        return (ts + disc) / (2.0 * lam * terms.D)
    return 2.0 * mu * (-terms.g) / (disc - ts)


def tilt_defect(params: ModelParams, T: float, gamma: float, a: float) -> float:
    """
    Normalized defect of the tilt equation, strictly increasing in a

    Negative as a -> -inf and positive as a -> 1.
    """
    terms = tilt_terms(params, T, gamma, a)
    return (terms.B - _positive_root(params, terms)) / (-terms.log_lambda)


def quadratic_residual(params: ModelParams, T: float, gamma: float, a: float) -> float:
    """Residual of the quadratic in B, relative to the size of its terms"""
    t = tilt_terms(params, T, gamma, a)
    parts = (params.lambda_ * t.D * t.B * t.B, params.theta * t.S * t.B, params.mu * t.g)
    return abs(parts[0] - parts[1] + parts[2]) / (1.0 + sum(abs(p) for p in parts))


def _locate_bracket(f) -> Tuple[float, float, float, float]:
    """Expand geometrically downward from just below 1 until the defect changes sign"""
    hi, f_hi = None, None
    for gap in UPPER_GAPS:
        value = f(1.0 - gap)
        if value > 0:
            hi, f_hi = 1.0 - gap, value
            break
    if hi is None:
        raise BracketingFailed("tilt defect is not positive near a = 1", {"defect": value})

    f_zero = f(0.0)
    if f_zero < 0:
        return 0.0, f_zero, hi, f_hi
    if f_zero == 0:
        return 0.0, 0.0, 0.0, 0.0
    hi, f_hi = 0.0, f_zero
    lo = -1.0
    while True:
        f_lo = f(lo)
        if math.isnan(f_lo):
            raise NumericsFailed("tilt defect is NaN", {"a": lo})
        if f_lo < 0:
            return lo, f_lo, hi, f_hi
        hi, f_hi = lo, f_lo
        lo *= 2.0
        if lo < LOWEST_A:
            raise BracketingFailed("no sign change of the tilt defect above a = -1e300",
                                   {"lowest_a": hi, "defect": f_hi})


def _bisect_to_resolution(f, lo: float, hi: float) -> float:
    """Bisect a sign-change bracket until its ends are adjacent doubles; return the smaller |defect| end"""
    f_lo = f(lo)
    for _ in range(4096):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        f_mid = f(mid)
        if f_mid == 0:
            return mid
        if (f_mid < 0) == (f_lo < 0):
            lo, f_lo = mid, f_mid
        else:
            hi = mid
    return lo if abs(f_lo) <= abs(f(hi)) else hi


def solve_tilt(params: ModelParams, horizon: Horizon, target: TargetRate,
               tol: float = None) -> TiltParameters:
    """
    Solve for the Euler-Lagrange constant

    Args:
        params: Single-server rates and initial condition
        horizon: Horizon T
        target: Reneging rate gamma > 0
        tol: Defect tolerance (defaults to SOLVER_CONFIG['tilt_tol'])

    Returns:
        TiltParameters with the bracketing certificate

    Raises:
        GammaNonpositive: gamma == 0
        BracketingFailed: the defect never changes sign
        NumericsFailed: brentq did not converge, or |defect| > tol even at
            the closest double to the root
    """
    validate(params, horizon)
    if params.many_server:
        raise ConfigInvalid("solve_tilt works on the single-server problem; shift x0 by one first",
                            {"mode": params.mode.value})
    if target.gamma <= 0:
        raise GammaNonpositive("the tilt equation needs gamma > 0; use the gamma = 0 path",
                               {"gamma": target.gamma})
    if tol is None:
        tol = get_solver_setting("tilt_tol")
    T, gamma = horizon.T, target.gamma

    def f(a: float) -> float:
        return tilt_defect(params, T, gamma, a)

    lo, f_lo, hi, f_hi = _locate_bracket(f)
    wide = (hi - lo) > WIDE_BRACKET
    if wide:
        logger.warning(f"Tilt bracket [{lo:.3g}, {hi:.3g}] is wider than 1e16 (gamma={gamma})")

    if lo == hi:
        a, iterations = lo, 0
    else:
        a, info = brentq(f, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps,
                         maxiter=get_solver_setting("tilt_max_iter"), full_output=True, disp=False)
        iterations = info.iterations
        if not info.converged:
            raise NumericsFailed("tilt solver did not converge",
                                 {"a": a, "iterations": iterations, "bracket": [lo, hi]})

    residual = abs(f(a))
    if residual > tol and lo != hi:
        logger.debug(f"Tilt residual {residual:.3e} above {tol:.1e}, bisecting to adjacent doubles")
        a = _bisect_to_resolution(f, lo, hi)
        residual = abs(f(a))
    if not residual <= tol:
        logger.warning(f"❌ Tilt residual {residual:.3e} above tolerance {tol:.1e} at a={a!r}")
        raise NumericsFailed("tilt defect above tolerance at double-precision resolution",
                             {"a": a, "residual": residual, "tol": tol, "bracket": [lo, hi]})
    terms = tilt_terms(params, T, gamma, a)
    logger.debug(f"Tilt solved: a={a!r}, B={terms.B!r}, bracket=[{lo!r}, {hi!r}], {iterations} iterations")

    return TiltParameters(
        a=a,
        A=terms.A,
        B=terms.B,
        lambda_cap=terms.lam_cap,
        log_lambda_cap=terms.log_lambda,
        residual=residual,
        quadratic_residual=quadratic_residual(params, T, gamma, a),
        iterations=iterations,
        bracket=[lo, hi],
        bracket_defects=[f_lo, f_hi],
        wide_bracket=wide,
    )


def bracket_samples(params: ModelParams, horizon: Horizon, target: TargetRate,
                    tilt: TiltParameters, count: int = 100) -> List[float]:
    """Defect sampled across the final bracket (for the monotonicity check)"""
    lo, hi = tilt.bracket
    return [tilt_defect(params, horizon.T, target.gamma, a) for a in np.linspace(lo, hi, count)]
