"""Gadget constructions: unary symmetry breakers, sampled phase gadgets,
and the two-copy balancing construction.

A gadget is a bipartite multigraph together with ordered terminal tuples
(T+, T-), the vertex partition (V+, V-) used by the majority phase rule, an
occupancy record for terminals already consumed by wiring, and free-form
metadata.  Sampling takes an explicit seed and is bit-reproducible.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import engine
from .errors import (
    InfeasibleSizesError,
    InvalidParametersError,
    NotEnoughTerminalsError,
    RejectionLimitExceededError,
)
from .model import BipartiteMultigraph, SpinParams, build_graph, to_weighted_network


@dataclass(frozen=True)
class Gadget:
    """A terminal-carrying graph plus the layout its phase rule uses."""

    graph: BipartiteMultigraph
    t_plus: tuple  # ordered positive terminals
    t_minus: tuple  # ordered negative terminals
    v_plus: tuple  # layout partition for the majority rule
    v_minus: tuple
    occupied: frozenset = frozenset()
    metadata: dict = field(default_factory=dict)

    def unoccupied(self, sign: str) -> tuple:
        terms = self.t_plus if sign == "+" else self.t_minus
        return tuple(t for t in terms if t not in self.occupied)

    def layout(self) -> engine.PhaseLayout:
        return engine.PhaseLayout(self.v_plus, self.v_minus, self.t_plus, self.t_minus)

    def to_json_dict(self) -> dict:
        out = self.graph.to_json_dict()
        out["metadata"] = dict(self.metadata)
        out["metadata"].update(
            {
                "t_plus_order": list(self.t_plus),
                "t_minus_order": list(self.t_minus),
                "layout": {"v_plus": list(self.v_plus), "v_minus": list(self.v_minus)},
                "occupied": sorted(self.occupied),
            }
        )
        return out


def gadget_from_json_dict(data: dict) -> Gadget:
    from .model import graph_from_json_dict

    meta = dict(data.get("metadata", {}))
    graph = graph_from_json_dict(data)
    t_plus = tuple(meta.pop("t_plus_order"))
    t_minus = tuple(meta.pop("t_minus_order"))
    layout = meta.pop("layout")
    occupied = frozenset(meta.pop("occupied", ()))
    return Gadget(
        graph=graph,
        t_plus=t_plus,
        t_minus=t_minus,
        v_plus=tuple(layout["v_plus"]),
        v_minus=tuple(layout["v_minus"]),
        occupied=occupied,
        metadata=meta,
    )


# ---------------------------------------------------------------------------
# unary symmetry breaking


@dataclass(frozen=True)
class SymmetryBreaker:
    """Attachment gadget whose free-vertex marginal differs from the trivial set."""

    graph: BipartiteMultigraph
    attachment: str
    k: int
    rho1: float


@dataclass(frozen=True)
class Unbreakable:
    reason: str


def _chain_gadget(k: int) -> BipartiteMultigraph:
    """Vertices u', v_1..v_k, u'', u with edges u'-v_i, v_i-u'', u''-u."""
    vertices = [("u_prime", "L"), ("u_dprime", "L"), ("u", "R")]
    vertices += [(f"v{i}", "R") for i in range(1, k + 1)]
    edges = [("u_dprime", "u")]
    edges += [("u_prime", f"v{i}") for i in range(1, k + 1)]
    edges += [(f"v{i}", "u_dprime") for i in range(1, k + 1)]
    return build_graph(vertices, edges)


def symmetry_breaking_search(params: SpinParams):
    """Find the smallest chain gadget whose attachment marginal is non-trivial.

    Tries k = 0, 1, 2 and returns a :class:`SymmetryBreaker` whose marginal
    rho1 = Pr(attachment = 1) avoids {0, lam/(1+lam), 1} by more than
    params.tol, computed by exact evaluation.  Returns :class:`Unbreakable`
    for the two exceptional families (degenerate interactions, or the
    symmetric model at unit activity), where no unary weight can be built.
    """
    beta, gamma, lam, tol = params.beta, params.gamma, params.lam, params.tol
    if abs(beta * gamma - 1.0) <= tol:
        return Unbreakable("degenerate interaction: beta*gamma = 1")
    if abs(beta - gamma) <= tol and abs(lam - 1.0) <= tol:
        return Unbreakable("symmetric model at unit activity: every marginal is 1/2")
    trivial = (0.0, lam / (1.0 + lam), 1.0)
    for k in (0, 1, 2):
        graph = _chain_gadget(k)
        rho1 = engine.marginal(to_weighted_network(graph, params), "u")
        if min(abs(rho1 - t) for t in trivial) > tol:
            return SymmetryBreaker(graph=graph, attachment="u", k=k, rho1=rho1)
    return Unbreakable("no chain gadget with k <= 2 broke the symmetry")


# ---------------------------------------------------------------------------
# product measures on terminals


@dataclass(frozen=True)
class QMeasure:
    """Product measure on terminal configurations with phase-dependent marginals.

    Under orientation '+', positive terminals take spin 1 with probability
    q_plus and negative terminals with probability q_minus; orientation '-'
    mirrors the two.
    """

    q_minus: float
    q_plus: float
    t_plus: tuple
    t_minus: tuple
    orientation: str

    def __post_init__(self) -> None:
        if not (0.0 < self.q_minus < self.q_plus < 1.0):
            raise InvalidParametersError("need 0 < q- < q+ < 1")
        if self.orientation not in ("+", "-"):
            raise InvalidParametersError("orientation must be '+' or '-'")

    def _marginal(self, position: int) -> float:
        on_plus = position < len(self.t_plus)
        if self.orientation == "+":
            return self.q_plus if on_plus else self.q_minus
        return self.q_minus if on_plus else self.q_plus

    def prob(self, tau: Sequence[int]) -> float:
        total = len(self.t_plus) + len(self.t_minus)
        if len(tau) != total:
            raise InvalidParametersError(f"tau must assign all {total} terminals")
        p = 1.0
        for pos, spin in enumerate(tau):
            q = self._marginal(pos)
            p *= q if spin else (1.0 - q)
        return p

    def items(self):
        total = len(self.t_plus) + len(self.t_minus)
        for tau in itertools.product((0, 1), repeat=total):
            yield tau, self.prob(tau)


def q_product_measure(q_minus: float, q_plus: float, t_plus: Sequence[str],
                      t_minus: Sequence[str], phase: str) -> QMeasure:
    return QMeasure(q_minus=q_minus, q_plus=q_plus, t_plus=tuple(t_plus),
                    t_minus=tuple(t_minus), orientation=phase)


# ---------------------------------------------------------------------------
# sampled phase gadget


def sample_phase_gadget(params: SpinParams, n_side: int, r: int, t: int,
                        tree_depth: int, seed: int,
                        max_rejects: int = 10_000) -> Gadget:
    """Sample the random regular phase gadget with attached terminal trees.

    The core has side sets U (degree delta) and W (degree delta - 1) with
    |U| = n_side and |W| = r per side, wired by delta - 1 perfect matchings
    between the full sides plus one between the U sets, resampled until the
    union is simple.  Each side then receives t disjoint (delta-1)-ary trees
    of even depth ``tree_depth`` whose leaves are exactly that side's W set;
    the tree roots are the terminals.
    """
    delta = params.require_delta()
    if tree_depth < 0 or tree_depth % 2 != 0:
        raise InfeasibleSizesError("tree_depth must be even and >= 0")
    if t < 1 or n_side < 1:
        raise InfeasibleSizesError("need t >= 1 and n_side >= 1")
    if r != t * (delta - 1) ** tree_depth:
        raise InfeasibleSizesError(
            f"r must equal t*(delta-1)**tree_depth = {t * (delta - 1) ** tree_depth}, got {r}"
        )
    if n_side < r:
        raise InfeasibleSizesError(f"need n_side >= r, got {n_side} < {r}")

    u_names = {s: [f"U{s}{i}" for i in range(n_side)] for s in "+-"}
    w_names = {s: [f"W{s}{i}" for i in range(r)] for s in "+-"}
    side_all = {s: u_names[s] + w_names[s] for s in "+-"}

    rng = np.random.default_rng(seed)
    side = n_side + r
    partners = np.empty((delta, side), dtype=np.int64)
    # pad the U-only matching with sentinel partners that never collide
    partners[delta - 1, n_side:] = side + np.arange(r)
    edges = None
    for _ in range(max_rejects):
        for row in range(delta - 1):
            partners[row] = rng.permutation(side)
        partners[delta - 1, :n_side] = rng.permutation(n_side)
        ordered = np.sort(partners, axis=0)
        if not np.any(ordered[1:] == ordered[:-1]):
            edges = [
                (side_all["+"][i], side_all["-"][int(partners[row, i])])
                for row in range(delta - 1)
                for i in range(side)
            ]
            edges += [
                (u_names["+"][i], u_names["-"][int(partners[delta - 1, i])])
                for i in range(n_side)
            ]
            break
    if edges is None:
        raise RejectionLimitExceededError(
            f"no simple graph within {max_rejects} resamples"
        )

    vertices = [(v, "L") for v in side_all["+"]] + [(v, "R") for v in side_all["-"]]
    terminals = {"+": [], "-": []}
    for s, base_side in (("+", "L"), ("-", "R")):
        other = "R" if base_side == "L" else "L"
        for i in range(t):
            if tree_depth == 0:
                terminals[s].append(w_names[s][i])
                continue
            # level 0 is the root; level tree_depth are the W leaves
            names_by_level = []
            for level in range(tree_depth + 1):
                width = (delta - 1) ** level
                if level == tree_depth:
                    names = w_names[s][i * width:(i + 1) * width]
                else:
                    names = [f"T{s}{i}.{level}.{j}" for j in range(width)]
                    side = base_side if (tree_depth - level) % 2 == 0 else other
                    vertices += [(v, side) for v in names]
                names_by_level.append(names)
            for level in range(tree_depth):
                for j, child in enumerate(names_by_level[level + 1]):
                    edges.append((names_by_level[level][j // (delta - 1)], child))
            terminals[s].append(names_by_level[0][0])

    graph = build_graph(
        vertices,
        edges,
        terminals=(tuple(terminals["+"]), tuple(terminals["-"])),
        degree_bound=delta,
    )
    v_plus = tuple(v for v, side in graph.vertices if side == "L")
    v_minus = tuple(v for v, side in graph.vertices if side == "R")
    return Gadget(
        graph=graph,
        t_plus=tuple(terminals["+"]),
        t_minus=tuple(terminals["-"]),
        v_plus=v_plus,
        v_minus=v_minus,
        metadata={
            "family": "phase",
            "seed": seed,
            "t": t,
            "t_prime": None,
            "tree_depth": tree_depth,
            "theta": None,
            "psi": None,
            "n_side": n_side,
            "r": r,
        },
    )


# ---------------------------------------------------------------------------
# balancing construction


def balance_gadget(gadget: Gadget, t_prime: int, params: SpinParams) -> Gadget:
    """Combine two copies of a gadget so the two phases occur near-evenly.

    The copies are joined by a perfect matching on t_prime terminal pairs per
    sign: like signs are matched in the antiferromagnetic regime and opposite
    signs in the ferromagnetic one.  The result keeps the first copy's
    unmatched terminals and inherits the first copy's layout, so its phase is
    the first copy's phase.
    """
    if t_prime < 1:
        raise InvalidParametersError("t_prime must be >= 1")
    antiferro = params.beta * params.gamma < 1.0
    for sign in "+-":
        free = gadget.unoccupied(sign)
        if len(free) < t_prime + 1:
            raise NotEnoughTerminalsError(
                f"need at least t_prime + 1 = {t_prime + 1} unoccupied {sign} terminals, "
                f"have {len(free)}"
            )

    def rename(copy: int, vid: str) -> str:
        return f"c{copy}.{vid}"

    flip2 = antiferro  # like-sign matching needs the second copy mirrored
    vertices = []
    for v, side in gadget.graph.vertices:
        vertices.append((rename(1, v), side))
    for v, side in gadget.graph.vertices:
        side2 = side if not flip2 else ("R" if side == "L" else "L")
        vertices.append((rename(2, v), side2))
    edges = []
    for copy in (1, 2):
        for u, v, mult in gadget.graph.edges:
            edges.append((rename(copy, u), rename(copy, v), mult))

    matched1 = []
    for sign in "+-":
        partner = sign if antiferro else ("-" if sign == "+" else "+")
        ours = gadget.unoccupied(sign)[:t_prime]
        theirs = gadget.unoccupied(partner)[:t_prime]
        matched1 += [(sign, v) for v in ours]
        edges += [(rename(1, a), rename(2, b)) for a, b in zip(ours, theirs)]

    matched_set = {v for _, v in matched1}
    t_plus = tuple(rename(1, v) for v in gadget.t_plus if v not in matched_set)
    t_minus = tuple(rename(1, v) for v in gadget.t_minus if v not in matched_set)
    occupied = frozenset(
        rename(1, v) for v in gadget.occupied
    ) | frozenset(rename(2, v) for v in gadget.occupied)

    delta = params.delta
    graph = build_graph(vertices, edges, terminals=(t_plus, t_minus),
                        degree_bound=delta)
    meta = dict(gadget.metadata)
    meta.update({"family": "balanced", "t_prime": t_prime,
                 "t": len(t_plus)})
    return Gadget(
        graph=graph,
        t_plus=t_plus,
        t_minus=t_minus,
        v_plus=tuple(rename(1, v) for v in gadget.v_plus),
        v_minus=tuple(rename(1, v) for v in gadget.v_minus),
        occupied=occupied,
        metadata=meta,
    )


# ---------------------------------------------------------------------------
# exact verification


@dataclass(frozen=True)
class GadgetVerdict:
    """Measured phase balance and conditional-terminal deviations."""

    phase_balance: tuple  # (Pr[Y=+], Pr[Y=-])
    max_ratio_deviation: dict  # per phase
    passed: bool
    epsilon: float

    def to_json_dict(self) -> dict:
        return {
            "phase_balance": list(self.phase_balance),
            "max_ratio_deviation": dict(self.max_ratio_deviation),
            "passed": self.passed,
            "epsilon": self.epsilon,
        }


def verify_gadget(gadget: Gadget, params: SpinParams, epsilon: float,
                  q_minus: float, q_plus: float,
                  cap: int = engine.DEFAULT_ENUM_CAP) -> GadgetVerdict:
    """Exactly measure phase balance and terminal-distribution deviations.

    Compares, per phase, the conditional law of the terminal spins against
    the product measure with marginals (q-, q+), reporting the worst ratio
    deviation.  ``passed`` requires both phase probabilities >= (1-eps)/2 and
    both deviations <= eps; at desk scale this is informational, not a claim
    about asymptotic behaviour.
    """
    network = to_weighted_network(gadget.graph, params)
    decomposition = engine.phase_decomposition(network, gadget.layout(), cap=cap)
    balance = decomposition.phase_probabilities()
    deviations = {}
    for phase in "+-":
        measure = q_product_measure(q_minus, q_plus, gadget.t_plus, gadget.t_minus, phase)
        table = decomposition.tables[phase]
        worst = 0.0
        for tau, q_prob in measure.items():
            observed = table.get(tau, 0.0)
            worst = max(worst, abs(observed / q_prob - 1.0))
        deviations[phase] = worst
    passed = (
        min(balance) >= (1.0 - epsilon) / 2.0
        and max(deviations.values()) <= epsilon
    )
    return GadgetVerdict(
        phase_balance=balance,
        max_ratio_deviation=deviations,
        passed=passed,
        epsilon=epsilon,
    )
