"""First- and second-moment exponent functions over the random gadget ensemble.

``psi1`` is the annealed free-energy exponent of configurations occupying
fractions (chi+, chi-) of the two sides of a random delta-regular bipartite
graph; its inner matching maximization has a closed-form quadratic solution
(``g1_argmax``).  ``psi2`` is the pair analogue with overlap variables
(upsilon+, upsilon-); its inner maximization over 4x4 edge-class tables with
fixed margins is an entropy-plus-linear objective solved by multiplicative
(row/column scaling) iteration on the transportation polytope.

Everything uses the convention 0 * log 0 = 0 and returns -inf for
zero-weight-support regions rather than raising.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import minimize
from scipy.special import xlogy

from .errors import (
    InfeasibleTransportError,
    InvalidParametersError,
    NoConvergenceError,
)
from .model import SpinParams

# pair-class spins: class 1 = (1,1), 2 = (1,0), 3 = (0,1), 4 = (0,0)
_A_SPIN = np.array([1, 1, 0, 0])
_B_SPIN = np.array([1, 0, 1, 0])

# exponent patterns of the 4x4 pair-interaction table
W_EXP_BETA = (1 - _A_SPIN[:, None]) * (1 - _A_SPIN[None, :]) + (1 - _B_SPIN[:, None]) * (
    1 - _B_SPIN[None, :]
)
W_EXP_GAMMA = _A_SPIN[:, None] * _A_SPIN[None, :] + _B_SPIN[:, None] * _B_SPIN[None, :]


def w_matrix(beta: float, gamma: float) -> np.ndarray:
    """Pair-interaction table w[i,j] = beta**eb[i,j] * gamma**eg[i,j]."""
    return np.asarray(
        [[beta ** int(eb) * gamma ** int(eg) for eb, eg in zip(rb, rg)]
         for rb, rg in zip(W_EXP_BETA, W_EXP_GAMMA)]
    )


def _log_w_matrix(beta: float, gamma: float) -> np.ndarray:
    return xlogy(W_EXP_BETA, beta) + xlogy(W_EXP_GAMMA, gamma)


def _check_chi(value: float, name: str) -> None:
    if not (-1e-12 <= value <= 1.0 + 1e-12):
        raise InvalidParametersError(f"{name} must lie in [0, 1], got {value}")


def g1_argmax(beta: float, gamma: float, chi_plus, chi_minus):
    """Maximizer of the inner matching exponent over [max(0, s-1), min(chi+, chi-)].

    Stationarity gives beta*gamma*(chi+ - x)(chi- - x) = x(1 - s + x); the
    in-range quadratic root is chosen, degenerating to chi+ * chi- when
    beta*gamma = 1 and to the lower boundary when beta or gamma vanish.
    Array-valued chi arguments are supported.
    """
    cp = np.asarray(chi_plus, dtype=np.float64)
    cm = np.asarray(chi_minus, dtype=np.float64)
    s = cp + cm
    lo = np.maximum(0.0, s - 1.0)
    hi = np.minimum(cp, cm)
    bg = beta * gamma
    if bg == 0.0:
        x = lo.copy()
    elif abs(bg - 1.0) <= 1e-12:
        x = cp * cm
    else:
        a = bg - 1.0
        b = -(bg * s + 1.0 - s)
        c = bg * cp * cm
        disc = np.maximum(b * b - 4.0 * a * c, 0.0)
        sq = np.sqrt(disc)
        q = -0.5 * (b + np.where(b >= 0, 1.0, -1.0) * sq)
        with np.errstate(divide="ignore", invalid="ignore"):
            x1 = q / a
            x2 = np.where(q != 0.0, c / q, np.nan)
        in1 = (x1 >= lo - 1e-9) & (x1 <= hi + 1e-9)
        x = np.where(in1, x1, x2)
        x = np.where(np.isnan(x), x1, x)
    x = np.clip(x, lo, hi)
    return float(x) if np.isscalar(chi_plus) and np.isscalar(chi_minus) else x


def _g1_value(beta: float, gamma: float, x, cp, cm):
    rest = np.maximum(1.0 - cp - cm + x, 0.0)
    up = np.maximum(cp - x, 0.0)
    um = np.maximum(cm - x, 0.0)
    return (
        xlogy(rest, beta)
        + xlogy(x, gamma)
        - xlogy(x, x)
        - xlogy(up, up)
        - xlogy(um, um)
        - xlogy(rest, rest)
    )


def _f1(cp, cm):
    return (
        xlogy(cp, cp)
        + xlogy(np.maximum(1.0 - cp, 0.0), np.maximum(1.0 - cp, 0.0))
        + xlogy(cm, cm)
        + xlogy(np.maximum(1.0 - cm, 0.0), np.maximum(1.0 - cm, 0.0))
    )


def psi1(params: SpinParams, chi_plus: float, chi_minus: float) -> float:
    """First-moment exponent at side densities (chi+, chi-); -inf is a value."""
    _check_chi(chi_plus, "chi_plus")
    _check_chi(chi_minus, "chi_minus")
    delta = params.require_delta()
    return float(_psi1_array(params, np.float64(chi_plus), np.float64(chi_minus)))


def _psi1_array(params: SpinParams, cp, cm):
    delta = params.require_delta()
    x = g1_argmax(params.beta, params.gamma, cp, cm)
    g1 = _g1_value(params.beta, params.gamma, x, cp, cm)
    with np.errstate(invalid="ignore"):
        out = (cp + cm) * math.log(params.lam) + (delta - 1) * _f1(cp, cm) + delta * g1
    return out


def transport_entropy_max(w, L, R, *, tol: float = 1e-12, max_sweeps: int = 100_000):
    """Maximize sum_ij y_ij log(w_ij / y_ij) subject to row sums L, column sums R.

    The maximizer is the unique scaled-product plan y = diag(u) w diag(v) on
    the support of w; it is found by alternating row/column scaling.  Subsets
    of rows whose feasibility constraint is tight force a block decomposition,
    which is applied recursively before scaling.  Raises
    InfeasibleTransportError when the zero pattern of w admits no plan.
    """
    w = np.asarray(w, dtype=np.float64)
    L = np.asarray(L, dtype=np.float64)
    R = np.asarray(R, dtype=np.float64)
    if w.ndim != 2 or w.shape != (len(L), len(R)):
        raise InvalidParametersError("w must be (len(L), len(R))")
    if np.any(w < 0) or np.any(L < -1e-12) or np.any(R < -1e-12):
        raise InvalidParametersError("w, L, R must be nonnegative")
    L = np.maximum(L, 0.0)
    R = np.maximum(R, 0.0)
    scale = max(float(L.sum()), 1.0)
    if abs(float(L.sum() - R.sum())) > 1e-9 * scale:
        raise InvalidParametersError("row and column marginals must have equal totals")

    y = np.zeros_like(w)
    _solve_block(w, L, R, [i for i in range(len(L))], [j for j in range(len(R))],
                 y, tol, max_sweeps, 1e-12 * scale)
    return y


def _solve_block(w, L, R, rows, cols, y, tol, max_sweeps, atol):
    rows = [i for i in rows if L[i] > 0.0]
    cols = [j for j in cols if R[j] > 0.0]
    col_mass = float(R[cols].sum()) if cols else 0.0
    if not rows:
        if col_mass > atol:
            raise InfeasibleTransportError("columns demand mass but no rows supply it")
        return
    support = {i: [j for j in cols if w[i, j] > 0.0] for i in rows}
    for i in rows:
        if not support[i]:
            raise InfeasibleTransportError(f"row {i} has mass but empty support")

    # Feasibility (and tight-set detection) over all row subsets
    nr = len(rows)
    tight: Optional[tuple] = None
    for mask in range(1, 1 << nr):
        sel = [rows[i] for i in range(nr) if mask >> i & 1]
        reach = set()
        for i in sel:
            reach.update(support[i])
        slack = float(R[sorted(reach)].sum()) - float(L[sel].sum())
        if slack < -atol:
            raise InfeasibleTransportError("marginals violate a Hall-type inequality")
        if abs(slack) <= atol and mask != (1 << nr) - 1:
            if tight is None or len(sel) < len(tight[0]):
                tight = (sel, sorted(reach))

    if tight is not None:
        sel, reach = tight
        rest_rows = [i for i in rows if i not in sel]
        rest_cols = [j for j in cols if j not in reach]
        _solve_block(w, L, R, sel, reach, y, tol, max_sweeps, atol)
        _solve_block(w, L, R, rest_rows, rest_cols, y, tol, max_sweeps, atol)
        return

    wb = w[np.ix_(rows, cols)]
    Lb = L[rows]
    Rb = R[cols]
    u = np.full(len(rows), 1.0)
    v = np.full(len(cols), 1.0)
    yb = None
    for sweep in range(max_sweeps):
        u = Lb / (wb @ v)
        v = Rb / (wb.T @ u)
        if sweep % 8 == 7 or sweep == max_sweeps - 1:
            yb = u[:, None] * wb * v[None, :]
            res = max(
                float(np.abs(yb.sum(axis=1) - Lb).max()),
                float(np.abs(yb.sum(axis=0) - Rb).max()),
            )
            if res <= tol:
                break
    else:
        yb = u[:, None] * wb * v[None, :]
        res = max(
            float(np.abs(yb.sum(axis=1) - Lb).max()),
            float(np.abs(yb.sum(axis=0) - Rb).max()),
        )
        if res > 1e-10:
            raise NoConvergenceError(f"scaling iteration stalled at residual {res:.3e}")
    y[np.ix_(rows, cols)] = yb


def _f2(cp, cm, up, um):
    t1 = np.maximum(cp - up, 0.0)
    t2 = np.maximum(1.0 - 2.0 * cp + up, 0.0)
    t3 = np.maximum(cm - um, 0.0)
    t4 = np.maximum(1.0 - 2.0 * cm + um, 0.0)
    return (
        2.0 * xlogy(t1, t1)
        + xlogy(up, up)
        + xlogy(t2, t2)
        + 2.0 * xlogy(t3, t3)
        + xlogy(um, um)
        + xlogy(t4, t4)
    )


def _margins(cp, cm, up, um):
    L = np.array([up, cp - up, cp - up, 1.0 - 2.0 * cp + up])
    R = np.array([um, cm - um, cm - um, 1.0 - 2.0 * cm + um])
    return np.maximum(L, 0.0), np.maximum(R, 0.0)


def _overlap_box(cp, cm):
    return (max(0.0, 2.0 * cp - 1.0), cp), (max(0.0, 2.0 * cm - 1.0), cm)


def _in_overlap_box(cp, cm, up, um, slack=1e-12):
    (lo_p, hi_p), (lo_m, hi_m) = _overlap_box(cp, cm)
    return lo_p - slack <= up <= hi_p + slack and lo_m - slack <= um <= hi_m + slack


def psi2_prime(params: SpinParams, chi_plus: float, chi_minus: float,
               upsilon_plus: float, upsilon_minus: float):
    """Pair exponent at fixed overlaps; returns (value, optimal 4x4 table).

    Infeasible overlap/support combinations yield (-inf, None).
    """
    _check_chi(chi_plus, "chi_plus")
    _check_chi(chi_minus, "chi_minus")
    delta = params.require_delta()
    if not _in_overlap_box(chi_plus, chi_minus, upsilon_plus, upsilon_minus):
        raise InvalidParametersError("overlaps outside the admissible region")
    w = w_matrix(params.beta, params.gamma)
    logw = _log_w_matrix(params.beta, params.gamma)
    L, R = _margins(chi_plus, chi_minus, upsilon_plus, upsilon_minus)
    try:
        y = transport_entropy_max(w, L, R)
    except InfeasibleTransportError:
        return float("-inf"), None
    # cells with w = 0 carry y = 0 and contribute nothing
    with np.errstate(invalid="ignore"):
        terms = np.where(y > 0, y * logw, 0.0) - xlogy(y, y)
    g2 = float(terms.sum())
    value = (
        2.0 * (chi_plus + chi_minus) * math.log(params.lam)
        + (delta - 1) * float(_f2(chi_plus, chi_minus, upsilon_plus, upsilon_minus))
        + delta * g2
    )
    return value, y


def _sinkhorn_batch(w, Ls, Rs, tol=1e-12, rounds=200, sweeps_per_round=32):
    """Batched row/column scaling for many marginal pairs against one w.

    Returns (values of sum y log(w/y), converged mask).  Converged cells are
    compressed out between rounds; anything left over (infeasible or slow)
    stays flagged for the scalar fallback path.
    """
    B = Ls.shape[0]
    logw_support = np.where(w > 0, np.log(np.where(w > 0, w, 1.0)), 0.0)
    vals = np.full(B, float("-inf"))
    ok = np.zeros(B, dtype=bool)
    active = np.arange(B)
    La, Ra = Ls, Rs
    ua = np.ones((B, 4))
    va = np.ones((B, 4))
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        for _ in range(rounds):
            for _ in range(sweeps_per_round):
                ua = np.where(La > 0, La / (va @ w.T), 0.0)
                va = np.where(Ra > 0, Ra / (ua @ w), 0.0)
            y = np.einsum("bi,ij,bj->bij", ua, w, va)
            res = np.maximum(
                np.abs(y.sum(axis=2) - La).max(axis=1),
                np.abs(y.sum(axis=1) - Ra).max(axis=1),
            )
            conv = np.isfinite(res) & (res <= tol)
            if conv.any():
                yo = y[conv]
                terms = np.where(yo > 0, yo * logw_support[None, :, :], 0.0) - xlogy(yo, yo)
                idx = active[conv]
                vals[idx] = terms.sum(axis=(1, 2))
                ok[idx] = True
            keep = ~conv
            if not keep.any():
                break
            active = active[keep]
            ua, va, La, Ra = ua[keep], va[keep], La[keep], Ra[keep]
            bad = ~np.isfinite(ua).all(axis=1) | ~np.isfinite(va).all(axis=1)
            if bad.any():
                # reset degenerate scalings once; cells that stay bad fall back
                ua[bad] = 1.0
                va[bad] = 1.0
    return vals, ok


def _psi2_prime_grid(params: SpinParams, cp: float, cm: float, ups, ums):
    """Vectorized psi2_prime values over parallel arrays of overlaps."""
    delta = params.require_delta()
    w = w_matrix(params.beta, params.gamma)
    ups = np.asarray(ups, dtype=np.float64)
    ums = np.asarray(ums, dtype=np.float64)
    Ls = np.stack([ups, cp - ups, cp - ups, 1.0 - 2.0 * cp + ups], axis=1).clip(min=0.0)
    Rs = np.stack([ums, cm - ums, cm - ums, 1.0 - 2.0 * cm + ums], axis=1).clip(min=0.0)
    g2, ok = _sinkhorn_batch(w, Ls, Rs)
    vals = (
        2.0 * (cp + cm) * math.log(params.lam)
        + (delta - 1) * _f2(cp, cm, ups, ums)
        + delta * g2
    )
    for b in np.nonzero(~ok)[0]:
        vals[b] = psi2_prime(params, cp, cm, float(ups[b]), float(ums[b]))[0]
    return vals


def _refine_max(objective, starts, bounds_dim=2, xatol=1e-10, fatol=1e-13, maxiter=400):
    """Nelder-Mead refinement of a box-constrained maximization on [0,1]^d."""
    best_x, best_v = None, float("-inf")

    def neg(s):
        s = np.asarray(s, dtype=np.float64)
        clipped = np.clip(s, 0.0, 1.0)
        val = objective(clipped)
        penalty = 1e8 * float(((s - clipped) ** 2).sum())
        if not np.isfinite(val):
            return 1e30 + penalty
        return -val + penalty

    for s0 in starts:
        res = minimize(
            neg, np.asarray(s0, dtype=np.float64), method="Nelder-Mead",
            options=dict(xatol=xatol, fatol=fatol, maxiter=maxiter, maxfev=4 * maxiter),
        )
        x = np.clip(res.x, 0.0, 1.0)
        val = objective(x)
        if val > best_v:
            best_x, best_v = x, val
    return best_x, best_v


def psi2(params: SpinParams, chi_plus: float, chi_minus: float, *,
         grid: int = 41, refine_starts: int = 5, nm_maxiter: int = 400):
    """Pair exponent maximized over the admissible overlap region.

    Dense grid over the overlap box followed by local refinement from the
    best cells (the product overlap (chi+^2, chi-^2) is always included as a
    start).  Returns (value, (upsilon+, upsilon-)).
    """
    _check_chi(chi_plus, "chi_plus")
    _check_chi(chi_minus, "chi_minus")
    (lo_p, hi_p), (lo_m, hi_m) = _overlap_box(chi_plus, chi_minus)
    wid_p, wid_m = hi_p - lo_p, hi_m - lo_m

    def to_upsilon(s):
        return lo_p + s[0] * wid_p, lo_m + s[1] * wid_m

    def objective(s):
        up, um = to_upsilon(s)
        return _psi2_prime_grid(params, chi_plus, chi_minus, [up], [um])[0]

    ss = np.linspace(0.0, 1.0, grid)
    SP, SM = np.meshgrid(ss, ss, indexing="ij")
    ups = lo_p + SP.ravel() * wid_p
    ums = lo_m + SM.ravel() * wid_m
    vals = _psi2_prime_grid(params, chi_plus, chi_minus, ups, ums)

    order = np.argsort(vals)[::-1]
    starts = [np.array([SP.ravel()[i], SM.ravel()[i]]) for i in order[:refine_starts]]
    if wid_p > 0 and wid_m > 0:
        starts.append(np.array([
            (chi_plus * chi_plus - lo_p) / wid_p,
            (chi_minus * chi_minus - lo_m) / wid_m,
        ]))
    if not np.isfinite(vals).any():
        return float("-inf"), (float("nan"), float("nan"))
    if wid_p == 0 or wid_m == 0:
        # degenerate box: maximize along the free dimension only (grid result)
        i = int(order[0])
        return float(vals[i]), (float(ups[i]), float(ums[i]))
    best_s, best_v = _refine_max(objective, starts, maxiter=nm_maxiter)
    up, um = to_upsilon(best_s)
    return float(best_v), (float(up), float(um))


def maximize_psi1(params: SpinParams, *, grid: int = 61, refine_starts: int = 5,
                  nm_maxiter: int = 600):
    """Global maximizer of psi1 over the unit square, reported with chi+ >= chi-."""
    ss = np.linspace(0.0, 1.0, grid)
    CP, CM = np.meshgrid(ss, ss, indexing="ij")
    with np.errstate(invalid="ignore"):
        vals = _psi1_array(params, CP.ravel(), CM.ravel())
    vals = np.nan_to_num(vals, nan=float("-inf"))
    order = np.argsort(vals)[::-1]
    starts = [np.array([CP.ravel()[i], CM.ravel()[i]]) for i in order[:refine_starts]]

    def objective(s):
        return psi1(params, float(s[0]), float(s[1]))

    best_s, best_v = _refine_max(objective, starts, maxiter=nm_maxiter)
    cp, cm = float(best_s[0]), float(best_s[1])
    if cp < cm:
        cp, cm = cm, cp
    return cp, cm, float(best_v)


@dataclass(frozen=True)
class MomentPoint:
    """A point of the pair-moment landscape (overlaps plus optimal table)."""

    chi_plus: float
    chi_minus: float
    upsilon_plus: float
    upsilon_minus: float
    value: float
    y: Optional[np.ndarray] = None


@dataclass(frozen=True)
class MomentReport:
    """Outcome of the product-overlap maximality check at the psi1 maximizer."""

    p_plus: float
    p_minus: float
    psi1_value: float
    psi2_value: float
    holds: bool
    gap: float
    argmax: MomentPoint
    moment_equality_residual: float
    argmax_tol: float

    def to_json_dict(self) -> dict:
        return {
            "p_plus": self.p_plus,
            "p_minus": self.p_minus,
            "psi1": self.psi1_value,
            "psi2": self.psi2_value,
            "condition1": {
                "holds": self.holds,
                "gap": self.gap,
                "argmax": [self.argmax.upsilon_plus, self.argmax.upsilon_minus],
            },
            "identity_residuals": {
                "moment_equality": self.moment_equality_residual,
            },
        }


def check_condition1(params: SpinParams, argmax_tol: float = 1e-4) -> MomentReport:
    """Check that the pair exponent at the psi1 maximizer peaks at product overlaps.

    Locates (p+, p-) by maximizing psi1, maximizes psi2' over overlaps there,
    and compares the argmax against ((p+)^2, (p-)^2).  Also reports the
    pair/first moment equality residual |psi2 - 2 psi1|.
    """
    p_plus, p_minus, v1 = maximize_psi1(params)
    v2, (u_p, u_m) = psi2(params, p_plus, p_minus)
    prod_val, _ = psi2_prime(params, p_plus, p_minus, p_plus ** 2, p_minus ** 2)
    _, y_at = psi2_prime(params, p_plus, p_minus, u_p, u_m)
    gap = v2 - prod_val
    if -1e-9 < gap < 0.0:
        gap = 0.0
    holds = max(abs(u_p - p_plus ** 2), abs(u_m - p_minus ** 2)) <= argmax_tol
    return MomentReport(
        p_plus=p_plus,
        p_minus=p_minus,
        psi1_value=v1,
        psi2_value=v2,
        holds=holds,
        gap=gap,
        argmax=MomentPoint(p_plus, p_minus, u_p, u_m, v2, y_at),
        moment_equality_residual=abs(v2 - 2.0 * v1),
        argmax_tol=argmax_tol,
    )
