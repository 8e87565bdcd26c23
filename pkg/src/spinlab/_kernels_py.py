"""Pure-numpy enumeration kernel (fallback for the compiled extension).

Enumerates all 2**k spin configurations of a network in fixed index order and
accumulates per-bucket log-sum-exp totals.  Chunks are processed in a fixed
sequence (optionally computed by a thread pool, merged in submission order),
so results are deterministic for a given input.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

BACKEND = "python"

_CHUNK_BITS = 18

_PC16 = None


def _popcount(a: np.ndarray) -> np.ndarray:
    global _PC16
    if hasattr(np, "bitwise_count"):
        return np.bitwise_count(a)
    if _PC16 is None:
        _PC16 = np.array([bin(i).count("1") for i in range(1 << 16)], dtype=np.uint8)
    a = a.astype(np.uint64)
    out = _PC16[(a & np.uint64(0xFFFF)).astype(np.int64)].astype(np.int64)
    for shift in (16, 32, 48):
        out += _PC16[((a >> np.uint64(shift)) & np.uint64(0xFFFF)).astype(np.int64)]
    return out


def _num_threads() -> int:
    raw = os.environ.get("SPINLAB_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _chunk_buckets(start, stop, vertex_log, edges_u, edges_v, edge_flat, term_pos, mask_plus, mask_minus, use_phase, nbuckets):
    """Per-bucket (max, scaled-sum) over configurations start..stop-1."""
    k = vertex_log.shape[0]
    idx = np.arange(start, stop, dtype=np.uint64)
    bits = ((idx[:, None] >> np.arange(k, dtype=np.uint64)[None, :]) & np.uint64(1)).astype(bool)
    logw = np.where(bits, vertex_log[None, :, 1], vertex_log[None, :, 0]).sum(axis=1)
    m = len(edges_u)
    if m:
        code = bits[:, edges_u].astype(np.int64) * 2 + bits[:, edges_v].astype(np.int64)
        logw = logw + edge_flat[code + 4 * np.arange(m, dtype=np.int64)[None, :]].sum(axis=1)

    if nbuckets == 1:
        cmax = float(np.max(logw)) if logw.size else float("-inf")
        if not math.isfinite(cmax):
            return np.array([float("-inf")]), np.array([0.0])
        return np.array([cmax]), np.array([float(np.exp(logw - cmax).sum())])

    t = len(term_pos)
    bucket = np.zeros(len(idx), dtype=np.int64)
    for i, pos in enumerate(term_pos):
        bucket |= ((idx >> np.uint64(pos)) & np.uint64(1)).astype(np.int64) << i
    if use_phase:
        plus = _popcount(idx & np.uint64(mask_plus))
        minus = _popcount(idx & np.uint64(mask_minus))
        bucket |= (plus >= minus).astype(np.int64) << t

    cmax = np.full(nbuckets, float("-inf"))
    np.maximum.at(cmax, bucket, logw)
    shift = cmax[bucket]
    safe = np.isfinite(shift)
    contrib = np.zeros(len(idx))
    contrib[safe] = np.exp(logw[safe] - shift[safe])
    csum = np.bincount(bucket, weights=contrib, minlength=nbuckets)
    return cmax, csum


def _merge(m1, s1, m2, s2):
    out_m = np.maximum(m1, m2)
    fin = np.isfinite(out_m)
    with np.errstate(invalid="ignore"):
        a = np.where(np.isfinite(m1) & fin, np.exp(np.where(fin, m1 - out_m, 0.0)) * s1, 0.0)
        b = np.where(np.isfinite(m2) & fin, np.exp(np.where(fin, m2 - out_m, 0.0)) * s2, 0.0)
    return out_m, a + b


def bucketed_logz(vertex_log, edges_u, edges_v, edge_log, term_pos, mask_plus, mask_minus, use_phase):
    """Per-bucket log partition sums over all configurations.

    Bucket index = (phase_bit << t) | pattern, where pattern bit i is the spin
    of vertex ``term_pos[i]`` and phase_bit is 1 when the spin-1 count on
    ``mask_plus`` is >= the count on ``mask_minus`` (ties count as '+').
    Returns a float array of length (2 if use_phase else 1) << len(term_pos).
    """
    vertex_log = np.asarray(vertex_log, dtype=np.float64)
    k = vertex_log.shape[0]
    edges_u = np.asarray(edges_u, dtype=np.int64)
    edges_v = np.asarray(edges_v, dtype=np.int64)
    edge_flat = np.asarray(edge_log, dtype=np.float64).reshape(-1)
    term_pos = list(term_pos)
    nbuckets = (2 if use_phase else 1) << len(term_pos)

    total = 1 << k
    chunk = 1 << _CHUNK_BITS
    ranges = [(s, min(s + chunk, total)) for s in range(0, total, chunk)]

    args = (vertex_log, edges_u, edges_v, edge_flat, term_pos, mask_plus, mask_minus, use_phase, nbuckets)
    threads = _num_threads()
    if threads > 1 and len(ranges) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda r: _chunk_buckets(r[0], r[1], *args), ranges))
    else:
        parts = [_chunk_buckets(s, e, *args) for s, e in ranges]

    run_m = np.full(nbuckets, float("-inf"))
    run_s = np.zeros(nbuckets)
    for cm, cs in parts:  # fixed merge order => deterministic
        run_m, run_s = _merge(run_m, run_s, cm, cs)

    out = np.full(nbuckets, float("-inf"))
    ok = np.isfinite(run_m) & (run_s > 0)
    out[ok] = run_m[ok] + np.log(run_s[ok])
    return out
