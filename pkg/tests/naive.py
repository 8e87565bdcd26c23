"""Definition-level brute-force oracles, independent of the package engine.

These evaluate the configuration sum directly from the weight definition in
linear space (vectorized over all assignments), with parallel edges passed as
repeated pairs.  They share no code with spinlab's log-space kernels.
"""

import numpy as np


def naive_z(vertex_ids, edge_list, beta, gamma, lam, field=None):
    """sum over assignments of beta^m0 * gamma^m1 * lam^n1.

    ``edge_list`` holds (u, v) pairs, repeated for parallel edges.
    ``field=None`` applies the activity to every vertex; otherwise only to the
    listed ones (an empty collection means no activity anywhere).
    """
    ids = sorted(vertex_ids)
    pos = {v: i for i, v in enumerate(ids)}
    n = len(ids)
    idx = np.arange(1 << n, dtype=np.uint64)
    spins = ((idx[:, None] >> np.arange(n, dtype=np.uint64)) & np.uint64(1)).astype(np.int64)
    m0 = np.zeros(1 << n, dtype=np.int64)
    m1 = np.zeros(1 << n, dtype=np.int64)
    for u, v in edge_list:
        su, sv = spins[:, pos[u]], spins[:, pos[v]]
        m0 += (1 - su) * (1 - sv)
        m1 += su * sv
    active = ids if field is None else [v for v in ids if v in set(field)]
    if active:
        n1 = spins[:, [pos[v] for v in active]].sum(axis=1)
    else:
        n1 = np.zeros(1 << n, dtype=np.int64)
    weights = (
        np.power(float(beta), m0.astype(np.float64))
        * np.power(float(gamma), m1.astype(np.float64))
        * np.power(float(lam), n1.astype(np.float64))
    )
    return float(weights.sum())


def naive_independent_sets(vertex_ids, edge_list):
    """Count subsets with no edge inside, by direct enumeration."""
    ids = sorted(vertex_ids)
    pos = {v: i for i, v in enumerate(ids)}
    n = len(ids)
    masks = [(1 << pos[u]) | (1 << pos[v]) for u, v in edge_list]
    count = 0
    for subset in range(1 << n):
        if all((subset & m) != m for m in masks):
            count += 1
    return count


def random_bipartite_multigraph(rng, max_n=14, max_mult=4, edge_density=1.2):
    """Random instance as (vertex_specs, edge_pairs_with_repeats)."""
    n = int(rng.integers(2, max_n + 1))
    n_left = int(rng.integers(1, n))
    vertex_specs = [(f"v{i}", "L" if i < n_left else "R") for i in range(n)]
    left = [v for v, s in vertex_specs if s == "L"]
    right = [v for v, s in vertex_specs if s == "R"]
    pairs = []
    target = int(rng.integers(0, max(1, int(edge_density * n)) + 1))
    chosen = {}
    for _ in range(target):
        u = left[int(rng.integers(0, len(left)))]
        v = right[int(rng.integers(0, len(right)))]
        chosen[(u, v)] = chosen.get((u, v), 0) + int(rng.integers(1, max_mult + 1))
    for (u, v), mult in chosen.items():
        mult = min(mult, max_mult)
        pairs.extend([(u, v)] * mult)
    return vertex_specs, pairs


def collapse_multiplicities(edge_pairs):
    """Repeated pairs -> (u, v, mult) triples."""
    merged = {}
    for u, v in edge_pairs:
        merged[(u, v)] = merged.get((u, v), 0) + 1
    return [(u, v, m) for (u, v), m in sorted(merged.items())]
