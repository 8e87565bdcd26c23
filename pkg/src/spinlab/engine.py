"""Exact evaluation on weighted networks.

All partition-style quantities are kept in log space (:class:`LogValue`);
pendant elimination folds degree-0/degree-1 vertices into their neighbours so
that layered constructions collapse before the exponential enumeration runs.

Backend: the compiled kernel ``spinlab._kernels`` is used when importable,
otherwise the numpy fallback.  Set ``SPINLAB_PURE_PYTHON=1`` to force the
fallback; ``SPINLAB_THREADS`` caps the fallback's internal parallelism (the
compiled kernel is single-threaded).
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .errors import (
    InvalidParametersError,
    TooLargeError,
    UnknownVertexError,
    ZeroPartitionFunctionError,
)
from .model import NEG_INF, BipartiteMultigraph, SpinParams, WeightedNetwork, to_weighted_network

if os.environ.get("SPINLAB_PURE_PYTHON"):
    from . import _kernels_py as _kernels
else:
    try:
        from . import _kernels  # type: ignore[attr-defined]
    except ImportError:
        from . import _kernels_py as _kernels

DEFAULT_ENUM_CAP = 28


def kernel_backend() -> str:
    """Name of the active enumeration backend ('cython' or 'python')."""
    return _kernels.BACKEND


def _logaddexp(a: float, b: float) -> float:
    if a == NEG_INF:
        return b
    if b == NEG_INF:
        return a
    hi, lo = (a, b) if a >= b else (b, a)
    return hi + math.log1p(math.exp(lo - hi))


@dataclass(frozen=True)
class LogValue:
    """A nonnegative real stored as its log; -inf encodes exact zero."""

    log: float

    @classmethod
    def from_float(cls, x: float) -> "LogValue":
        if x < 0:
            raise InvalidParametersError("LogValue represents nonnegative reals")
        return cls(math.log(x) if x > 0 else NEG_INF)

    @property
    def is_zero(self) -> bool:
        return self.log == NEG_INF

    def to_float(self) -> float:
        """Linear value; overflows to inf for huge logs."""
        if self.is_zero:
            return 0.0
        try:
            return math.exp(self.log)
        except OverflowError:
            return math.inf

    def __mul__(self, other: "LogValue") -> "LogValue":
        if self.is_zero or other.is_zero:
            return LogValue(NEG_INF)
        return LogValue(self.log + other.log)

    def __truediv__(self, other: "LogValue") -> "LogValue":
        if other.is_zero:
            raise ZeroDivisionError("division by zero LogValue")
        if self.is_zero:
            return LogValue(NEG_INF)
        return LogValue(self.log - other.log)

    def __add__(self, other: "LogValue") -> "LogValue":
        return LogValue(_logaddexp(self.log, other.log))


def relative_difference(a: LogValue, b: LogValue) -> float:
    """|a - b| / max(a, b), computed stably from logs; 0 when both are zero."""
    if a.is_zero and b.is_zero:
        return 0.0
    if a.is_zero or b.is_zero:
        return 1.0
    return -math.expm1(-abs(a.log - b.log))


def eliminate_pendants(network: WeightedNetwork, protected_ids: Iterable[str] = ()) -> WeightedNetwork:
    """Fold away unprotected degree-0 and degree-1 vertices; Z is unchanged.

    A degree-1 vertex u with neighbour v contributes the factor
    phi(s) = sum_s' w_u(s') W_e(s', s), which multiplies into w_v; a degree-0
    vertex contributes sum_s' w_u(s') to the global scale.  Folded weights are
    renormalised (max log shifted into log_scale) so entries stay bounded.
    """
    protected = set(protected_ids)
    for vid in protected:
        if vid not in network.index:
            raise UnknownVertexError(f"protected id {vid!r} not in network")

    k = network.n_kept
    vlog = network.vertex_log.copy()
    log_scale = network.log_scale
    alive_v = [True] * k
    alive_e = [True] * network.n_edges
    incident = [[] for _ in range(k)]
    for e, (u, v) in enumerate(zip(network.edges_u, network.edges_v)):
        incident[int(u)].append(e)
        incident[int(v)].append(e)
    degree = [len(lst) for lst in incident]

    def _foldable(i: int) -> bool:
        return alive_v[i] and degree[i] <= 1 and network.ids[i] not in protected

    stack = [i for i in range(k) if _foldable(i)]
    while stack:
        i = stack.pop()
        if not _foldable(i):
            continue
        alive_v[i] = False
        if degree[i] == 0:
            total = _logaddexp(vlog[i, 0], vlog[i, 1])
            if total == NEG_INF:
                # whole network weight is zero; record an impossible vertex
                alive_v[i] = True
                vlog[i] = (NEG_INF, NEG_INF)
                degree[i] = 2  # never revisit
                continue
            log_scale += total
            continue
        e = next(ei for ei in incident[i] if alive_e[ei])
        alive_e[e] = False
        u, v = int(network.edges_u[e]), int(network.edges_v[e])
        other = v if u == i else u
        w = network.edge_log[e]
        if u == i:
            phi0 = _logaddexp(vlog[i, 0] + w[0], vlog[i, 1] + w[2])
            phi1 = _logaddexp(vlog[i, 0] + w[1], vlog[i, 1] + w[3])
        else:
            phi0 = _logaddexp(vlog[i, 0] + w[0], vlog[i, 1] + w[1])
            phi1 = _logaddexp(vlog[i, 0] + w[2], vlog[i, 1] + w[3])
        vlog[other, 0] += phi0
        vlog[other, 1] += phi1
        shift = max(vlog[other, 0], vlog[other, 1])
        if shift != NEG_INF and shift != 0.0:
            vlog[other, 0] -= shift
            vlog[other, 1] -= shift
            log_scale += shift
        degree[other] -= 1
        degree[i] -= 1
        if _foldable(other):
            stack.append(other)

    keep = [i for i in range(k) if alive_v[i]]
    remap = {i: j for j, i in enumerate(keep)}
    ids = [network.ids[i] for i in keep]
    new_vlog = vlog[keep] if keep else np.zeros((0, 2))
    eu, ev, elog = [], [], []
    for e in range(network.n_edges):
        if alive_e[e]:
            eu.append(remap[int(network.edges_u[e])])
            ev.append(remap[int(network.edges_v[e])])
            elog.append(network.edge_log[e])
    if not eu:
        elog = np.zeros((0, 4))
    return WeightedNetwork(ids, new_vlog, eu, ev, elog, log_scale)


def _enumerate_buckets(network: WeightedNetwork, term_ids=(), layout=None, cap=DEFAULT_ENUM_CAP):
    if network.n_kept > cap:
        raise TooLargeError(f"{network.n_kept} kept vertices exceed enumeration cap {cap}")
    term_pos = [network.index[t] for t in term_ids]
    mask_plus = mask_minus = 0
    use_phase = layout is not None
    if use_phase:
        for vid in layout[0]:
            mask_plus |= 1 << network.index[vid]
        for vid in layout[1]:
            mask_minus |= 1 << network.index[vid]
    raw = _kernels.bucketed_logz(
        network.vertex_log, network.edges_u, network.edges_v, network.edge_log,
        term_pos, mask_plus, mask_minus, use_phase,
    )
    return np.asarray(raw) + network.log_scale


def partition_function(network: WeightedNetwork, cap: int = DEFAULT_ENUM_CAP) -> LogValue:
    """Exact partition sum of the network (pendants folded first)."""
    reduced = eliminate_pendants(network)
    return LogValue(float(_enumerate_buckets(reduced, cap=cap)[0]))


def conditional_block(network: WeightedNetwork, assignment: Mapping[str, int],
                      cap: int = DEFAULT_ENUM_CAP) -> LogValue:
    """Total weight of configurations extending the partial assignment."""
    pinned = _pin(network, assignment)
    return partition_function(pinned, cap=cap)


def _pin(network: WeightedNetwork, assignment: Mapping[str, int]) -> WeightedNetwork:
    """Fix a partial assignment, folding the pinned factors into the rest."""
    for vid, s in assignment.items():
        if vid not in network.index:
            raise UnknownVertexError(f"assigned id {vid!r} not in network")
        if s not in (0, 1):
            raise InvalidParametersError(f"spin must be 0 or 1, got {s!r}")
    fixed = {network.index[vid]: int(s) for vid, s in assignment.items()}
    k = network.n_kept
    log_scale = network.log_scale
    zero = False

    for i, s in fixed.items():
        w = float(network.vertex_log[i, s])
        if w == NEG_INF:
            zero = True
        else:
            log_scale += w

    keep = [i for i in range(k) if i not in fixed]
    remap = {i: j for j, i in enumerate(keep)}
    extra = np.zeros((k, 2))
    eu, ev, elog = [], [], []
    for e in range(network.n_edges):
        u, v = int(network.edges_u[e]), int(network.edges_v[e])
        w = network.edge_log[e]
        if u in fixed and v in fixed:
            wval = float(w[2 * fixed[u] + fixed[v]])
            if wval == NEG_INF:
                zero = True
            else:
                log_scale += wval
        elif u in fixed:
            su = fixed[u]
            extra[v, 0] += w[2 * su + 0]
            extra[v, 1] += w[2 * su + 1]
        elif v in fixed:
            sv = fixed[v]
            extra[u, 0] += w[0 + sv]
            extra[u, 1] += w[2 + sv]
        else:
            eu.append(remap[u])
            ev.append(remap[v])
            elog.append(w)

    ids = [network.ids[i] for i in keep]
    new_vlog = (network.vertex_log[keep] + extra[keep]) if keep else np.zeros((0, 2))
    if zero:
        # impossible pin: total weight is exactly zero
        dead = "__dead__"
        while dead in network.index:
            dead += "_"
        ids = ids + [dead]
        new_vlog = np.vstack([new_vlog, [[NEG_INF, NEG_INF]]])
        log_scale = 0.0
    if not eu:
        elog = np.zeros((0, 4))
    return WeightedNetwork(ids, new_vlog, eu, ev, elog, log_scale)


def marginal(network: WeightedNetwork, vertex: str, cap: int = DEFAULT_ENUM_CAP) -> float:
    """Pr(sigma_vertex = 1) under the Gibbs distribution of the network."""
    if vertex not in network.index:
        raise UnknownVertexError(f"{vertex!r} not in network")
    reduced = eliminate_pendants(network, protected_ids=(vertex,))
    buckets = _enumerate_buckets(reduced, term_ids=(vertex,))
    l0, l1 = float(buckets[0]), float(buckets[1])
    total = _logaddexp(l0, l1)
    if total == NEG_INF:
        raise ZeroPartitionFunctionError("partition function is zero")
    return math.exp(l1 - total) if l1 != NEG_INF else 0.0


@dataclass(frozen=True)
class PhaseLayout:
    """Vertex bipartition used for the majority phase plus ordered terminals."""

    v_plus: tuple
    v_minus: tuple
    t_plus: tuple = ()
    t_minus: tuple = ()

    @property
    def terminal_order(self) -> tuple:
        return tuple(self.t_plus) + tuple(self.t_minus)


@dataclass(frozen=True)
class PhaseDecomposition:
    """Phase-wise split of the partition function with terminal tables.

    ``tables[pi]`` maps each terminal configuration (tuple of spins in
    ``terminal_order``) to its conditional probability given phase ``pi``.
    """

    z_plus: LogValue
    z_minus: LogValue
    tables: dict
    terminal_order: tuple

    @property
    def total(self) -> LogValue:
        return self.z_plus + self.z_minus

    def phase_probabilities(self) -> tuple:
        total = self.total
        if total.is_zero:
            raise ZeroPartitionFunctionError("partition function is zero")
        return (
            math.exp(self.z_plus.log - total.log) if not self.z_plus.is_zero else 0.0,
            math.exp(self.z_minus.log - total.log) if not self.z_minus.is_zero else 0.0,
        )


def phase_decomposition(network: WeightedNetwork, layout: PhaseLayout,
                        cap: int = DEFAULT_ENUM_CAP) -> PhaseDecomposition:
    """Split Z by majority phase (ties count as '+') with terminal tables.

    The phase of a configuration is '+' when the spin-1 count on
    ``layout.v_plus`` is at least the count on ``layout.v_minus``.  No pendant
    elimination happens here: the majority rule involves every vertex.
    """
    for vid in tuple(layout.v_plus) + tuple(layout.v_minus) + layout.terminal_order:
        if vid not in network.index:
            raise UnknownVertexError(f"layout id {vid!r} not in network")
    order = layout.terminal_order
    buckets = _enumerate_buckets(network, term_ids=order,
                                 layout=(layout.v_plus, layout.v_minus), cap=cap)
    t = len(order)
    half = 1 << t
    minus_logz, plus_logz = buckets[:half], buckets[half:]

    def _table(logzs: np.ndarray) -> dict:
        finite = logzs[np.isfinite(logzs)]
        if finite.size == 0:
            return {}
        top = float(finite.max())
        z = top + math.log(float(np.exp(logzs[np.isfinite(logzs)] - top).sum()))
        table = {}
        for pattern in range(half):
            tau = tuple((pattern >> i) & 1 for i in range(t))
            lz = float(logzs[pattern])
            table[tau] = math.exp(lz - z) if lz != NEG_INF else 0.0
        return table

    def _total(logzs: np.ndarray) -> LogValue:
        out = LogValue(NEG_INF)
        for lz in logzs:
            out = out + LogValue(float(lz))
        return out

    return PhaseDecomposition(
        z_plus=_total(plus_logz),
        z_minus=_total(minus_logz),
        tables={"+": _table(plus_logz), "-": _table(minus_logz)},
        terminal_order=order,
    )


def count_independent_sets(graph: BipartiteMultigraph, cap: int = DEFAULT_ENUM_CAP) -> int:
    """Exact number of independent sets, in integer arithmetic."""
    n = graph.n_vertices
    if n > cap:
        raise TooLargeError(f"{n} vertices exceed enumeration cap {cap}")
    index = {vid: i for i, vid in enumerate(graph.vertex_ids)}
    adj = [0] * n
    for u, v, _ in graph.edges:
        adj[index[u]] |= 1 << index[v]
        adj[index[v]] |= 1 << index[u]

    memo: dict = {}

    def count(mask: int) -> int:
        if mask == 0:
            return 1
        cached = memo.get(mask)
        if cached is not None:
            return cached
        # branch on the highest-degree remaining vertex
        best, best_deg = -1, -1
        m = mask
        while m:
            low = m & -m
            i = low.bit_length() - 1
            deg = bin(adj[i] & mask).count("1")
            if deg > best_deg:
                best, best_deg = i, deg
            m ^= low
        if best_deg == 0:
            result = 1 << bin(mask).count("1")
        else:
            without = count(mask & ~(1 << best))
            with_v = count(mask & ~((1 << best) | adj[best]))
            result = without + with_v
        memo[mask] = result
        return result

    return count((1 << n) - 1)


def flip_transform_check(graph: BipartiteMultigraph, alpha: float,
                         cap: int = DEFAULT_ENUM_CAP) -> tuple:
    """Compare Z_B(a, a, 1) against a^m * Z_B(1/a, 1/a, 1).

    Returns (lhs, rhs, relative_gap); the two sides agree on every bipartite
    multigraph, m counted with multiplicity.
    """
    if not (alpha > 0 and math.isfinite(alpha)):
        raise InvalidParametersError(f"alpha must be > 0, got {alpha}")
    if graph.field_subset is not None:
        raise InvalidParametersError("flip check requires no activity subset")
    m = graph.n_edges
    lhs = partition_function(to_weighted_network(graph, SpinParams(alpha, alpha, 1.0)), cap=cap)
    z_inv = partition_function(
        to_weighted_network(graph, SpinParams(1.0 / alpha, 1.0 / alpha, 1.0)), cap=cap
    )
    rhs = LogValue(m * math.log(alpha) + z_inv.log)
    return lhs, rhs, relative_difference(lhs, rhs)
