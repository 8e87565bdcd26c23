"""Parameter and graph data model for two-spin systems.

A system is given by edge weights ``beta`` (both endpoints spin 0) and
``gamma`` (both spin 1), mixed edges weigh 1, plus an activity ``lam`` per
spin-1 vertex and an optional degree bound ``delta``.  Instances are bipartite
multigraphs, optionally with an activity subset (the activity acts only on
listed vertices) and with disjoint terminal sets reserved for gadget wiring.

Evaluation happens on a :class:`WeightedNetwork`: per-vertex weight pairs and
per-edge 2x2 interaction tables, all stored in log space so that constructions
with thousands of pendant layers stay representable.  A multi-edge of
multiplicity t folds into the elementwise t-th power of its base table, which
is exact in log space (t * log entry).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .errors import (
    DegreeBoundViolatedError,
    InvalidParametersError,
    NonBipartiteError,
    TerminalOverlapError,
    UnknownVertexError,
)

SIDES = ("L", "R")

NEG_INF = float("-inf")


def _log(x: float) -> float:
    """log with log(0) = -inf and a hard error on negatives."""
    if x < 0:
        raise InvalidParametersError(f"negative weight {x!r}")
    return math.log(x) if x > 0 else NEG_INF


@dataclass(frozen=True)
class SpinParams:
    """Model parameters (beta, gamma, lam) with optional degree bound delta.

    ``delta=None`` means no degree bound.  ``tol`` is the default numeric
    tolerance used by classification-style predicates downstream.
    """

    beta: float
    gamma: float
    lam: float
    delta: Optional[int] = None
    tol: float = 1e-9

    def __post_init__(self) -> None:
        if not (self.beta >= 0 and math.isfinite(self.beta)):
            raise InvalidParametersError(f"beta must be >= 0, got {self.beta}")
        if not (self.gamma >= 0 and math.isfinite(self.gamma)):
            raise InvalidParametersError(f"gamma must be >= 0, got {self.gamma}")
        if not (self.lam > 0 and math.isfinite(self.lam)):
            raise InvalidParametersError(f"lam must be > 0, got {self.lam}")
        if self.delta is not None:
            if not isinstance(self.delta, int) or self.delta < 3:
                raise InvalidParametersError(
                    f"delta must be an integer >= 3 or None, got {self.delta}"
                )
        if not (self.tol > 0):
            raise InvalidParametersError(f"tol must be > 0, got {self.tol}")

    @property
    def is_antiferromagnetic(self) -> bool:
        return self.beta * self.gamma < 1.0

    @property
    def is_ferromagnetic(self) -> bool:
        return self.beta * self.gamma > 1.0

    @property
    def is_degenerate(self) -> bool:
        return abs(self.beta * self.gamma - 1.0) <= self.tol

    def require_delta(self) -> int:
        if self.delta is None:
            raise InvalidParametersError("this operation needs a finite delta")
        return self.delta

    def replace(self, **kw) -> "SpinParams":
        data = {
            "beta": self.beta,
            "gamma": self.gamma,
            "lam": self.lam,
            "delta": self.delta,
            "tol": self.tol,
        }
        data.update(kw)
        return SpinParams(**data)


@dataclass(frozen=True)
class BipartiteMultigraph:
    """Bipartite multigraph with optional activity subset and terminals.

    ``edges`` stores one entry per vertex pair with a multiplicity counter.
    ``field_subset is None`` means the activity acts on every vertex; an empty
    set means it acts nowhere.  Build instances through :func:`build_graph`,
    which validates all invariants.
    """

    vertices: tuple  # ((id, side), ...) sorted by id
    edges: tuple  # ((u, v, mult), ...), u on side L, sorted
    field_subset: Optional[frozenset] = None
    terminals: Optional[tuple] = None  # (frozenset plus, frozenset minus)

    @cached_property
    def side_of(self) -> Mapping[str, str]:
        return {v: s for v, s in self.vertices}

    @cached_property
    def vertex_ids(self) -> tuple:
        return tuple(v for v, _ in self.vertices)

    @cached_property
    def degrees(self) -> Mapping[str, int]:
        deg = {v: 0 for v, _ in self.vertices}
        for u, v, mult in self.edges:
            deg[u] += mult
            deg[v] += mult
        return deg

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_edges(self) -> int:
        """Edge count with multiplicity."""
        return sum(mult for _, _, mult in self.edges)

    def degree(self, v: str) -> int:
        return self.degrees[v]

    def to_json_dict(self) -> dict:
        out = {
            "vertices": [{"id": v, "side": s} for v, s in self.vertices],
            "edges": [{"u": u, "v": v, "mult": m} for u, v, m in self.edges],
        }
        if self.field_subset is not None:
            out["field_subset"] = sorted(self.field_subset)
        if self.terminals is not None:
            out["terminals"] = {
                "plus": sorted(self.terminals[0]),
                "minus": sorted(self.terminals[1]),
            }
        return out


def build_graph(
    vertex_specs: Iterable[tuple],
    edge_specs: Iterable[tuple],
    field_subset: Optional[Iterable[str]] = None,
    terminals: Optional[tuple] = None,
    degree_bound: Optional[int] = None,
) -> BipartiteMultigraph:
    """Validate and construct a :class:`BipartiteMultigraph`.

    ``vertex_specs`` yields (id, side) pairs; ``edge_specs`` yields (u, v) or
    (u, v, mult).  Duplicate vertex pairs accumulate multiplicity.  When
    ``degree_bound`` is given, every vertex must have degree <= bound and every
    terminal degree <= bound - 1.
    """
    sides = {}
    for spec in vertex_specs:
        vid, side = spec
        if not isinstance(vid, str) or not vid:
            raise InvalidParametersError(f"vertex id must be a non-empty string: {vid!r}")
        if side not in SIDES:
            raise InvalidParametersError(f"side must be 'L' or 'R', got {side!r}")
        if vid in sides:
            raise InvalidParametersError(f"duplicate vertex id {vid!r}")
        sides[vid] = side

    merged = {}
    for spec in edge_specs:
        if len(spec) == 2:
            u, v = spec
            mult = 1
        else:
            u, v, mult = spec
        for endpoint in (u, v):
            if endpoint not in sides:
                raise UnknownVertexError(f"edge endpoint {endpoint!r} is not a vertex")
        if sides[u] == sides[v]:
            raise NonBipartiteError(f"edge ({u!r}, {v!r}) joins two {sides[u]!r} vertices")
        if not isinstance(mult, int) or mult < 1:
            raise InvalidParametersError(f"multiplicity must be an integer >= 1, got {mult!r}")
        key = (u, v) if sides[u] == "L" else (v, u)
        merged[key] = merged.get(key, 0) + mult

    fs = None
    if field_subset is not None:
        fs = frozenset(field_subset)
        for vid in fs:
            if vid not in sides:
                raise UnknownVertexError(f"field vertex {vid!r} is not a vertex")

    terms = None
    if terminals is not None:
        plus, minus = frozenset(terminals[0]), frozenset(terminals[1])
        for vid in plus | minus:
            if vid not in sides:
                raise UnknownVertexError(f"terminal {vid!r} is not a vertex")
        if plus & minus:
            raise TerminalOverlapError(f"terminals overlap: {sorted(plus & minus)}")
        plus_sides = {sides[v] for v in plus}
        minus_sides = {sides[v] for v in minus}
        if len(plus_sides) > 1 or len(minus_sides) > 1 or (
            plus_sides and minus_sides and plus_sides == minus_sides
        ):
            raise NonBipartiteError("terminal sets must sit on opposite sides")
        terms = (plus, minus)

    graph = BipartiteMultigraph(
        vertices=tuple(sorted(sides.items())),
        edges=tuple(sorted((u, v, m) for (u, v), m in merged.items())),
        field_subset=fs,
        terminals=terms,
    )

    if degree_bound is not None:
        for vid in graph.vertex_ids:
            if graph.degree(vid) > degree_bound:
                raise DegreeBoundViolatedError(
                    f"degree({vid!r}) = {graph.degree(vid)} > {degree_bound}"
                )
        if terms is not None:
            for vid in terms[0] | terms[1]:
                if graph.degree(vid) > degree_bound - 1:
                    raise DegreeBoundViolatedError(
                        f"terminal {vid!r} has degree {graph.degree(vid)} > {degree_bound - 1}"
                    )
    return graph


def graph_from_json_dict(data: Mapping) -> BipartiteMultigraph:
    terminals = None
    if data.get("terminals") is not None:
        terminals = (tuple(data["terminals"]["plus"]), tuple(data["terminals"]["minus"]))
    return build_graph(
        vertex_specs=[(v["id"], v["side"]) for v in data["vertices"]],
        edge_specs=[(e["u"], e["v"], int(e.get("mult", 1))) for e in data["edges"]],
        field_subset=data.get("field_subset"),
        terminals=terminals,
    )


class WeightedNetwork:
    """Generalized weighted spin network in log space.

    Represents ``exp(log_scale) * sum_sigma prod_v w_v(sigma_v) *
    prod_e W_e(sigma_u, sigma_v)`` over the kept vertices.  ``vertex_log`` is
    a (k, 2) array of log vertex weights (column s = spin s); ``edge_log`` is
    an (m, 4) array of log edge weights flattened as index ``2*s_u + s_v``
    with u the first endpoint.  Treat instances as immutable; operations
    return fresh networks.
    """

    __slots__ = ("ids", "index", "vertex_log", "edges_u", "edges_v", "edge_log", "log_scale")

    def __init__(self, ids, vertex_log, edges_u, edges_v, edge_log, log_scale=0.0):
        self.ids = tuple(ids)
        self.index = {vid: i for i, vid in enumerate(self.ids)}
        self.vertex_log = np.asarray(vertex_log, dtype=np.float64).reshape(len(self.ids), 2)
        self.edges_u = np.asarray(edges_u, dtype=np.int32)
        self.edges_v = np.asarray(edges_v, dtype=np.int32)
        self.edge_log = np.asarray(edge_log, dtype=np.float64).reshape(len(self.edges_u), 4)
        self.log_scale = float(log_scale)
        if not math.isfinite(self.log_scale):
            raise InvalidParametersError("log_scale must be finite")

    @property
    def n_kept(self) -> int:
        return len(self.ids)

    @property
    def n_edges(self) -> int:
        return len(self.edges_u)

    @property
    def vertex_weights(self) -> np.ndarray:
        """Linear-space view of the vertex weight pairs."""
        return np.exp(self.vertex_log)

    def degree_map(self) -> dict:
        deg = {vid: 0 for vid in self.ids}
        for u, v in zip(self.edges_u, self.edges_v):
            deg[self.ids[u]] += 1
            deg[self.ids[v]] += 1
        return deg


def to_weighted_network(graph: BipartiteMultigraph, params: SpinParams) -> WeightedNetwork:
    """Transcribe a graph into its weighted network.

    Every vertex in the activity subset (all vertices when the subset is
    absent) gets weight pair (1, lam); the rest get (1, 1).  Every edge gets
    the table [[beta, 1], [1, gamma]] raised elementwise to its multiplicity.
    """
    ids = graph.vertex_ids
    index = {vid: i for i, vid in enumerate(ids)}
    log_lam = _log(params.lam)
    active = graph.field_subset if graph.field_subset is not None else set(ids)
    vertex_log = np.zeros((len(ids), 2))
    for vid in active:
        vertex_log[index[vid], 1] = log_lam

    base = np.array([_log(params.beta), 0.0, 0.0, _log(params.gamma)])
    edges_u, edges_v, edge_log = [], [], []
    for u, v, mult in graph.edges:
        edges_u.append(index[u])
        edges_v.append(index[v])
        edge_log.append(mult * base)
    if not edges_u:
        edge_log = np.zeros((0, 4))
    return WeightedNetwork(ids, vertex_log, edges_u, edges_v, edge_log, 0.0)
