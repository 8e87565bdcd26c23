"""Constructive reductions between counting problems, checkable at desk scale.

``bis_to_ising`` turns an independent-set instance into a symmetric two-spin
instance with a nonuniform activity subset: each original edge becomes t1
parallel edges, each endpoint grows t1*deg pendant attachment vertices, and
each of those grows t2 activity-carrying pendants.  The normalizing constant
C collapses the pendant layers in closed form, so exact evaluation after
pendant elimination certifies the sandwich inequality directly.

``ising_to_2spin`` wires one phase-gadget copy per vertex (and a unary
symmetry breaker per activity vertex) into a bounded-degree bipartite
instance; its derived parameters come from the 2x2 moment matrix of the
terminal measures.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from . import engine
from .errors import (
    DegenerateInstanceError,
    DegenerateParametersError,
    InvalidParametersError,
    NotEnoughTerminalsError,
)
from .gadgets import Gadget
from .model import BipartiteMultigraph, SpinParams, build_graph, to_weighted_network


def _rho_pair(alpha: float, lam: float) -> tuple:
    """Pendant collapse weights (alpha + lam, 1 + alpha*lam)."""
    return alpha + lam, 1.0 + alpha * lam


def choose_t1_t2(alpha: float, lam: float, n: int, m: int, epsilon: float) -> tuple:
    """Minimal layer counts for the independent-set embedding.

    t1 is the least positive integer with alpha**(2 t1) <= eps / (6 * 2**n);
    t2 the least with (rho0/rho1)**t2 <= alpha**(t1 m) * eps / (6 * 2**(2 t1 m + n)).
    Both predicates are evaluated in log space.
    """
    if not (0.0 < alpha < 1.0):
        raise InvalidParametersError(f"alpha must be in (0, 1), got {alpha}")
    if not (0.0 < lam < 1.0):
        raise InvalidParametersError(f"lam must be in (0, 1); reduce lam > 1 first")
    if not (0.0 < epsilon < 1.0):
        raise InvalidParametersError(f"epsilon must be in (0, 1), got {epsilon}")
    if m < 1:
        raise DegenerateInstanceError("construction needs at least one edge")
    log_alpha = math.log(alpha)
    log2 = math.log(2.0)
    rhs1 = math.log(epsilon) - math.log(6.0) - n * log2

    def ok1(t1: int) -> bool:
        return 2 * t1 * log_alpha <= rhs1

    t1 = max(1, math.ceil(rhs1 / (2.0 * log_alpha)))
    while not ok1(t1):
        t1 += 1
    while t1 > 1 and ok1(t1 - 1):
        t1 -= 1

    rho0, rho1 = _rho_pair(alpha, lam)
    log_ratio = math.log(rho0) - math.log(rho1)
    rhs2 = t1 * m * log_alpha + math.log(epsilon) - math.log(6.0) - (2 * t1 * m + n) * log2

    def ok2(t2: int) -> bool:
        return t2 * log_ratio <= rhs2

    t2 = max(1, math.ceil(rhs2 / log_ratio))
    while not ok2(t2):
        t2 += 1
    while t2 > 1 and ok2(t2 - 1):
        t2 -= 1
    return t1, t2


@dataclass(frozen=True)
class BisReductionPlan:
    """Embedding of an independent-set instance with its normalizing constant."""

    t1: int
    t2: int
    log_c: float
    b_prime: BipartiteMultigraph
    alpha: float
    lam_effective: float
    flipped: bool
    attachment_map: Mapping[str, tuple]  # v -> its attachment vertex ids
    activity_map: Mapping[tuple, tuple]  # (v, j) -> activity vertex ids

    @property
    def c(self) -> engine.LogValue:
        return engine.LogValue(self.log_c)

    def summary(self) -> dict:
        return {
            "t1": self.t1,
            "t2": self.t2,
            "log_c": self.log_c,
            "flipped": self.flipped,
            "n_vertices": self.b_prime.n_vertices,
            "n_edges": self.b_prime.n_edges,
            "n_activity": len(self.b_prime.field_subset or ()),
        }


def build_bis_instance(graph: BipartiteMultigraph, alpha: float, lam: float,
                       t1: int, t2: int) -> BisReductionPlan:
    """Assemble the layered instance for explicit (t1, t2); lam must be < 1."""
    other = {"L": "R", "R": "L"}
    vertices = list(graph.vertices)
    edges = [(u, v, mult * t1) for u, v, mult in graph.edges]
    attachment_map = {}
    activity_map = {}
    activity = []
    for v in graph.vertex_ids:
        w_side = other[graph.side_of[v]]
        w_ids = []
        for j in range(1, t1 * graph.degree(v) + 1):
            w = f"w.{v}.{j}"
            vertices.append((w, w_side))
            edges.append((v, w, 1))
            w_ids.append(w)
            u_ids = []
            for kk in range(1, t2 + 1):
                u = f"u.{v}.{j}.{kk}"
                vertices.append((u, graph.side_of[v]))
                edges.append((w, u, 1))
                u_ids.append(u)
                activity.append(u)
            activity_map[(v, j)] = tuple(u_ids)
        attachment_map[v] = tuple(w_ids)

    b_prime = build_graph(vertices, edges, field_subset=activity)
    rho0, rho1 = _rho_pair(alpha, lam)
    m = graph.n_edges
    log_c = 2 * t1 * t2 * m * math.log(rho1) + t1 * m * math.log(alpha)
    return BisReductionPlan(
        t1=t1, t2=t2, log_c=log_c, b_prime=b_prime, alpha=alpha,
        lam_effective=lam, flipped=False,
        attachment_map=attachment_map, activity_map=activity_map,
    )


def bis_to_ising(graph: BipartiteMultigraph, alpha: float, lam: float,
                 epsilon: float) -> BisReductionPlan:
    """Full reduction plan: minimal (t1, t2) plus the layered instance.

    An activity lam > 1 is replaced by 1/lam first (global spin flip leaves
    the symmetric model invariant up to the activity on the subset).
    """
    if not (lam > 0):
        raise InvalidParametersError(f"lam must be > 0, got {lam}")
    if abs(lam - 1.0) < 1e-15:
        raise DegenerateParametersError("lam = 1 makes the pendant layers inert")
    flipped = lam > 1.0
    lam_eff = 1.0 / lam if flipped else lam
    if graph.n_edges < 1:
        raise DegenerateInstanceError("construction needs at least one edge")
    t1, t2 = choose_t1_t2(alpha, lam_eff, graph.n_vertices, graph.n_edges, epsilon)
    plan = build_bis_instance(graph, alpha, lam_eff, t1, t2)
    if flipped:
        return BisReductionPlan(
            t1=plan.t1, t2=plan.t2, log_c=plan.log_c, b_prime=plan.b_prime,
            alpha=plan.alpha, lam_effective=lam_eff, flipped=True,
            attachment_map=plan.attachment_map, activity_map=plan.activity_map,
        )
    return plan


@dataclass(frozen=True)
class BisCertificate:
    """Exact evaluation of the sandwich inequality for one instance."""

    independent_sets: int
    log_z: float
    log_c: float
    log_ratio: float
    lower: float
    upper: float
    sandwich_ok: bool

    def to_json_dict(self) -> dict:
        return {
            "I_B": self.independent_sets,
            "log_Z": self.log_z,
            "log_C": self.log_c,
            "log_ratio": self.log_ratio,
            "lower": self.lower,
            "upper": self.upper,
            "ok": self.sandwich_ok,
        }


def verify_bis_reduction(graph: BipartiteMultigraph, alpha: float, lam: float,
                         epsilon: float, cap: int = engine.DEFAULT_ENUM_CAP):
    """Exactly check exp(-eps/2) I_B <= Z/C <= exp(eps/2) I_B.

    The pendant layers collapse via elimination, leaving the original
    vertices for enumeration.  Edgeless instances short-circuit to
    I_B = 2**n with a trivial certificate.
    """
    i_b = engine.count_independent_sets(graph, cap=cap)
    if graph.n_edges == 0:
        log_ib = graph.n_vertices * math.log(2.0)
        return BisCertificate(i_b, log_ib, 0.0, log_ib, log_ib, log_ib, True), None
    plan = bis_to_ising(graph, alpha, lam, epsilon)
    params = SpinParams(plan.alpha, plan.alpha, plan.lam_effective)
    network = to_weighted_network(plan.b_prime, params)
    reduced = engine.eliminate_pendants(network, protected_ids=graph.vertex_ids)
    log_z = engine.partition_function(reduced, cap=cap).log
    log_ratio = log_z - plan.log_c
    log_ib = math.log(i_b)
    lower, upper = log_ib - epsilon / 2.0, log_ib + epsilon / 2.0
    ok = lower <= log_ratio <= upper
    return BisCertificate(i_b, log_z, plan.log_c, log_ratio, lower, upper, ok), plan


@dataclass(frozen=True)
class IsingParams:
    """Derived symmetric-model parameters from terminal measures and a breaker."""

    n_matrix: np.ndarray  # indexed [-,+] x [-,+]
    det: float
    mu1: float  # N++ N--
    mu2: float  # N+- N-+
    alpha_out: float
    lambda_out: float
    rho_prime: tuple

    def summary(self) -> dict:
        return {
            "N": [[float(x) for x in row] for row in self.n_matrix],
            "det": self.det,
            "mu1": self.mu1,
            "mu2": self.mu2,
            "alpha_out": self.alpha_out,
            "lambda_out": self.lambda_out,
            "rho_prime": list(self.rho_prime),
        }


def derived_ising_params(params: SpinParams, q_minus: float, q_plus: float,
                         rho: Sequence[float]) -> IsingParams:
    """Compute N = M+ M M+^T and the induced (alpha', lambda').

    ``rho`` is the attachment-marginal pair (rho0, rho1) of a unary symmetry
    breaker, normalized to sum 1.  Degenerate interactions (det N = 0) and
    trivial breakers (lambda' = 1) are rejected.
    """
    if not (0.0 < q_minus < q_plus < 1.0):
        raise InvalidParametersError("need 0 < q- < q+ < 1")
    rho0, rho1 = float(rho[0]), float(rho[1])
    if abs(rho0 + rho1 - 1.0) > 1e-9:
        raise InvalidParametersError("rho must be normalized to sum 1")
    beta, gamma, lam = params.beta, params.gamma, params.lam
    if abs(beta * gamma - 1.0) <= params.tol:
        raise DegenerateParametersError("beta*gamma = 1 collapses the moment matrix")
    m_plus = np.array([[1.0 - q_minus, q_minus], [1.0 - q_plus, q_plus]])
    m = np.array([[beta, 1.0], [1.0, gamma]])
    n_matrix = m_plus @ m @ m_plus.T
    det = float(np.linalg.det(n_matrix))
    mu1 = float(n_matrix[1, 1] * n_matrix[0, 0])
    mu2 = float(n_matrix[1, 0] * n_matrix[0, 1])
    antiferro = beta * gamma < 1.0
    alpha_out = mu1 / mu2 if antiferro else mu2 / mu1
    rho_prime = m_plus @ np.array([rho0, rho1 / lam])
    if rho_prime[0] <= 0:
        raise DegenerateParametersError("rho' has no mass on spin 0")
    lambda_out = float(rho_prime[1] / rho_prime[0])
    if abs(lambda_out - 1.0) <= params.tol:
        raise DegenerateParametersError(
            "lambda' = 1: the breaker marginal equals lam/(1+lam)"
        )
    return IsingParams(
        n_matrix=n_matrix, det=det, mu1=mu1, mu2=mu2,
        alpha_out=alpha_out, lambda_out=lambda_out,
        rho_prime=(float(rho_prime[0]), float(rho_prime[1])),
    )


@dataclass(frozen=True)
class IsingReductionPlan:
    """Gadget-wired bounded-degree instance with its occupancy ledger."""

    b_prime: BipartiteMultigraph
    derived: IsingParams
    edge_ledger: tuple  # records of terminal pairs consumed per original edge
    field_ledger: tuple  # records of terminals identified with breaker copies
    occupied_terminals: frozenset

    def summary(self) -> dict:
        return {
            "n_vertices": self.b_prime.n_vertices,
            "n_edges": self.b_prime.n_edges,
            "edges_wired": len(self.edge_ledger),
            "fields_wired": len(self.field_ledger),
            "derived": self.derived.summary(),
        }


def ising_to_2spin(graph: BipartiteMultigraph, field_subset, params: SpinParams,
                   gadget: Gadget, breaker_graph: BipartiteMultigraph,
                   breaker_attachment: str, q_minus: float, q_plus: float,
                   rho: Sequence[float]) -> IsingReductionPlan:
    """Wire one gadget copy per vertex into a bounded-degree instance.

    For each original edge, one unoccupied positive terminal of each endpoint
    copy is joined, and likewise negative (opposite signs when the model is
    ferromagnetic).  Each activity vertex's copy donates one positive terminal,
    which is identified with the breaker's attachment vertex.  Terminals are
    consumed lexicographically-first and never reused.
    """
    delta = params.require_delta()
    derived = derived_ising_params(params, q_minus, q_plus, rho)
    antiferro = params.beta * params.gamma < 1.0
    field_set = frozenset(field_subset if field_subset is not None else graph.vertex_ids)
    for v in field_set:
        if v not in graph.side_of:
            raise InvalidParametersError(f"field vertex {v!r} not in instance")

    need = {v: graph.degree(v) for v in graph.vertex_ids}
    for v in graph.vertex_ids:
        plus_need = need[v] + (1 if v in field_set else 0)
        if len(gadget.unoccupied("+")) < plus_need or len(gadget.unoccupied("-")) < need[v]:
            raise NotEnoughTerminalsError(
                f"vertex {v!r} needs {plus_need} positive / {need[v]} negative terminals"
            )

    def gname(v: str, vid: str) -> str:
        return f"g[{v}].{vid}"

    def hname(v: str, vid: str) -> str:
        return f"h[{v}].{vid}"

    vertices = []
    edges = []
    # lay out gadget copies; in the antiferromagnetic case mirror copies on
    # side R so that matched like-sign terminals sit on opposite sides
    for v in graph.vertex_ids:
        mirror = antiferro and graph.side_of[v] == "R"
        for vid, side in gadget.graph.vertices:
            side2 = ("R" if side == "L" else "L") if mirror else side
            vertices.append((gname(v, vid), side2))
        for a, b, mult in gadget.graph.edges:
            edges.append((gname(v, a), gname(v, b), mult))

    cursor = {(v, s): 0 for v in graph.vertex_ids for s in "+-"}

    def take(v: str, sign: str) -> str:
        free = gadget.unoccupied(sign)
        i = cursor[(v, sign)]
        if i >= len(free):
            raise NotEnoughTerminalsError(f"vertex {v!r} ran out of {sign} terminals")
        cursor[(v, sign)] = i + 1
        return gname(v, free[i])

    edge_ledger = []
    for u, v, mult in graph.edges:
        for _ in range(mult):
            if antiferro:
                pair_plus = (take(u, "+"), take(v, "+"))
                pair_minus = (take(u, "-"), take(v, "-"))
            else:
                pair_plus = (take(u, "+"), take(v, "-"))
                pair_minus = (take(u, "-"), take(v, "+"))
            edges.append((pair_plus[0], pair_plus[1], 1))
            edges.append((pair_minus[0], pair_minus[1], 1))
            edge_ledger.append({"edge": (u, v), "plus_pair": pair_plus,
                                "minus_pair": pair_minus})

    side_lookup = dict(vertices)
    field_ledger = []
    breaker_sides = breaker_graph.side_of
    for v in sorted(field_set):
        terminal = take(v, "+")
        # the attachment vertex is replaced by the terminal, so the copy is
        # mirrored whenever their sides disagree
        flip = breaker_sides[breaker_attachment] != side_lookup[terminal]
        for vid, side in breaker_graph.vertices:
            if vid == breaker_attachment:
                continue
            side2 = ("R" if side == "L" else "L") if flip else side
            vertices.append((hname(v, vid), side2))
        for a, b, mult in breaker_graph.edges:
            a2 = terminal if a == breaker_attachment else hname(v, a)
            b2 = terminal if b == breaker_attachment else hname(v, b)
            edges.append((a2, b2, mult))
        field_ledger.append({"field_vertex": v, "terminal": terminal})

    b_prime = build_graph(vertices, edges, degree_bound=delta)
    occupied = frozenset(
        [t for rec in edge_ledger for t in rec["plus_pair"] + rec["minus_pair"]]
        + [rec["terminal"] for rec in field_ledger]
    )
    return IsingReductionPlan(
        b_prime=b_prime,
        derived=derived,
        edge_ledger=tuple(edge_ledger),
        field_ledger=tuple(field_ledger),
        occupied_terminals=occupied,
    )
