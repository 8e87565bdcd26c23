"""Tree-recursion phase diagram for antiferromagnetic two-spin systems.

With edge weights beta (0-0), gamma (1-1), 1 (mixed) and activity lam on
spin 1, the spin-1/spin-0 ratio at the root of the infinite (delta-1)-ary
tree obeys

    x  ->  lam * ((1 + gamma * x) / (beta + x)) ** (delta - 1),

a strictly decreasing map when beta * gamma < 1.  Uniqueness of the Gibbs
measure is decided by the derivative magnitude at the unique fixed point;
the two extremal boundary conditions give the marginals (q-, q+) as the
stable two-cycle of the doubled map, and replacing the exponent delta - 1 by
delta yields their analogues (p-, p+) for the delta-regular tree.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable, Optional

from .errors import (
    DomainError,
    InvalidParametersError,
    NoConvergenceError,
    NotAntiferromagneticError,
)
from .model import SpinParams


class Regime(str, enum.Enum):
    UNIQUENESS = "uniqueness"
    NON_UNIQUENESS = "non-uniqueness"
    CRITICAL = "critical-within-tol"


@dataclass(frozen=True)
class PhasePoint:
    """Extremal tree marginals and ratios at a parameter point."""

    q_minus: float
    q_plus: float
    r_minus: float
    r_plus: float
    p_minus: float
    p_plus: float
    regime: Regime


def _require_antiferro(params: SpinParams) -> int:
    if not (params.beta * params.gamma < 1.0):
        raise NotAntiferromagneticError(
            f"beta*gamma = {params.beta * params.gamma} is not < 1"
        )
    return params.require_delta()


def tree_map(params: SpinParams) -> Callable[[float], float]:
    """The ratio recursion x -> lam * ((1+gamma x)/(beta+x))**(delta-1).

    Accepts x = +inf (limit value lam * gamma**(delta-1)).  Raises DomainError
    at x = 0 when beta = 0, where the map diverges.
    """
    delta = params.require_delta()
    beta, gamma, lam = params.beta, params.gamma, params.lam

    def f(x: float) -> float:
        if x < 0:
            raise DomainError(f"ratio must be >= 0, got {x}")
        if math.isinf(x):
            return lam * gamma ** (delta - 1)
        if beta == 0.0 and x == 0.0:
            raise DomainError("map diverges at x = 0 when beta = 0")
        return lam * ((1.0 + gamma * x) / (beta + x)) ** (delta - 1)

    return f


def tree_map_derivative(params: SpinParams) -> Callable[[float], float]:
    """df/dx = f(x) * (delta-1) * (beta*gamma - 1) / ((1+gamma x)(beta+x))."""
    delta = params.require_delta()
    beta, gamma = params.beta, params.gamma
    f = tree_map(params)

    def fprime(x: float) -> float:
        return f(x) * (delta - 1) * (beta * gamma - 1.0) / ((1.0 + gamma * x) * (beta + x))

    return fprime


def _fixed_point(params: SpinParams) -> float:
    """Unique fixed point of the decreasing ratio map, by bisection."""
    f = tree_map(params)
    lo = 0.0 if params.beta > 0 else 1e-300
    hi = 1.0
    while f(hi) > hi:
        hi *= 2.0
        if hi > 1e300:
            raise NoConvergenceError("fixed-point bracket diverged")
    if params.beta == 0:
        while f(lo) <= lo:
            lo /= 2.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if f(mid) > mid:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-16 * max(1.0, hi):
            break
    return 0.5 * (lo + hi)


def _derivative_excess(params: SpinParams) -> float:
    """|f'(fixed point)| - 1; positive in the non-uniqueness region."""
    xhat = _fixed_point(params)
    return abs(tree_map_derivative(params)(xhat)) - 1.0


def classify_uniqueness(params: SpinParams, tol: Optional[float] = None) -> Regime:
    """Classify the infinite-tree Gibbs measure at these parameters.

    Requires beta*gamma < 1 and finite delta.  Returns CRITICAL when the
    derivative magnitude at the fixed point is within tol of 1.
    """
    _require_antiferro(params)
    tol = params.tol if tol is None else tol
    excess = _derivative_excess(params)
    if excess > tol:
        return Regime.NON_UNIQUENESS
    if excess < -tol:
        return Regime.UNIQUENESS
    return Regime.CRITICAL


def hardcore_lambda_c(delta: int) -> float:
    """Critical activity (delta-1)^(delta-1) / (delta-2)^delta of the hard-core model."""
    if not isinstance(delta, int) or delta < 3:
        raise InvalidParametersError(f"delta must be an integer >= 3, got {delta}")
    return float((delta - 1) ** (delta - 1)) / float((delta - 2) ** delta)


def lambda_interval(beta: float, gamma: float, delta: int, tol: float = 1e-8):
    """Maximal open activity interval with non-uniqueness, or None.

    For soft antiferromagnetic constraints (beta, gamma > 0, beta*gamma < 1)
    the non-uniqueness activities form an interval (lambda1, lambda2), which
    is non-empty exactly when sqrt(beta*gamma) < (delta-2)/delta.  Endpoints
    are bracketed in closed form (the fixed point x with derivative magnitude
    1 solves gamma x^2 + [(1+bg) - (delta-1)(1-bg)] x + beta = 0) and then
    polished by bisection on the classification predicate.
    """
    if not (beta > 0 and gamma > 0):
        raise InvalidParametersError("lambda_interval needs beta, gamma > 0")
    if not (beta * gamma < 1.0):
        raise NotAntiferromagneticError(f"beta*gamma = {beta * gamma} is not < 1")
    if not isinstance(delta, int) or delta < 3:
        raise InvalidParametersError(f"delta must be an integer >= 3, got {delta}")
    bg = beta * gamma
    if math.sqrt(bg) >= (delta - 2) / delta:
        return None

    b_coef = (1.0 + bg) - (delta - 1) * (1.0 - bg)
    disc = b_coef * b_coef - 4.0 * gamma * beta
    sq = math.sqrt(disc)
    roots = sorted(((-b_coef - sq) / (2.0 * gamma), (-b_coef + sq) / (2.0 * gamma)))

    def lam_at(x: float) -> float:
        return x * ((beta + x) / (1.0 + gamma * x)) ** (delta - 1)

    def excess_at(lam: float) -> float:
        return _derivative_excess(SpinParams(beta, gamma, lam, delta))

    endpoints = []
    for x_root, inside_above in ((roots[0], True), (roots[1], False)):
        lam0 = lam_at(x_root)
        lo, hi = lam0 * (1 - 1e-4), lam0 * (1 + 1e-4)
        f_lo, f_hi = excess_at(lo), excess_at(hi)
        if not (f_lo < 0 < f_hi or f_hi < 0 < f_lo):
            endpoints.append(lam0)  # closed form already at machine precision
            continue
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            f_mid = excess_at(mid)
            if (f_mid > 0) == (f_hi > 0):
                hi, f_hi = mid, f_mid
            else:
                lo, f_lo = mid, f_mid
            if hi - lo <= tol * max(1.0, hi):
                break
        endpoints.append(0.5 * (lo + hi))
    return tuple(sorted(endpoints))


def extremal_marginals(params: SpinParams, tol: float = 1e-12,
                       max_iter: int = 500_000) -> PhasePoint:
    """Extremal root marginals (q-, q+) and their delta-regular analogues.

    Iterates the doubled ratio map from the two pinned-boundary starts
    (all-one leaves: x = +inf; all-zero leaves: x = 0), switching to damped
    iteration if floating noise makes the sequence oscillate.
    """
    delta = _require_antiferro(params)
    if params.beta == 0.0 and params.gamma == 0.0:
        raise InvalidParametersError("degenerate two-coloring model has no finite ratios")
    f = tree_map(params)
    beta0 = params.beta == 0.0

    def step(x: float) -> float:
        # the boundary iteration passes through the beta=0 singularity cleanly
        if beta0 and x == 0.0:
            return math.inf
        return f(x)

    def run(start: float) -> float:
        x = step(step(start))
        last_delta = None
        damped = False
        for _ in range(max_iter):
            nxt = step(step(x))
            if damped:
                nxt = 0.5 * (x + nxt)
            delta_x = nxt - x
            if last_delta is not None and delta_x * last_delta < 0:
                damped = True
            if abs(delta_x) <= tol * (1.0 + abs(nxt)):
                return nxt
            last_delta = delta_x
            x = nxt
        raise NoConvergenceError("extremal marginal iteration did not converge")

    r_plus = run(math.inf)
    r_minus = run(0.0)
    # polish the two-cycle so both cross-residuals are tight
    for _ in range(4):
        r_minus = f(r_plus)
        r_plus = f(r_minus)
    if r_minus > r_plus:
        r_minus, r_plus = r_plus, r_minus

    beta, gamma, lam = params.beta, params.gamma, params.lam

    def root_ratio(child: float) -> float:
        return lam * ((1.0 + gamma * child) / (beta + child)) ** delta

    rp_root = root_ratio(r_minus)
    rm_root = root_ratio(r_plus)

    def q(r: float) -> float:
        return r / (1.0 + r) if math.isfinite(r) else 1.0

    excess = _derivative_excess(params)
    if excess > params.tol:
        regime = Regime.NON_UNIQUENESS
    elif excess < -params.tol:
        regime = Regime.UNIQUENESS
    else:
        regime = Regime.CRITICAL
    return PhasePoint(
        q_minus=q(r_minus),
        q_plus=q(r_plus),
        r_minus=r_minus,
        r_plus=r_plus,
        p_minus=q(rm_root),
        p_plus=q(rp_root),
        regime=regime,
    )
