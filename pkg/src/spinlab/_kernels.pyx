# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled enumeration kernel: per-bucket log-sum-exp over 2**k configurations.

Mirrors the semantics of ``_kernels_py.bucketed_logz`` (single-threaded; the
sequential online log-sum-exp is a fixed-order reduction, so results are
deterministic).
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, log, INFINITY

cnp.import_array()

cdef extern from *:
    int __builtin_popcountll(unsigned long long) nogil

BACKEND = "cython"


def bucketed_logz(vertex_log, edges_u, edges_v, edge_log, term_pos, mask_plus, mask_minus, use_phase):
    """See _kernels_py.bucketed_logz; identical contract."""
    cdef double[:, ::1] vlog = np.ascontiguousarray(vertex_log, dtype=np.float64)
    cdef long long[::1] eu = np.ascontiguousarray(edges_u, dtype=np.int64)
    cdef long long[::1] ev = np.ascontiguousarray(edges_v, dtype=np.int64)
    cdef double[::1] eflat = np.ascontiguousarray(np.asarray(edge_log, dtype=np.float64).reshape(-1))
    cdef long long[::1] tpos = np.ascontiguousarray(np.asarray(list(term_pos), dtype=np.int64))

    cdef int k = vlog.shape[0]
    cdef int m = eu.shape[0]
    cdef int t = tpos.shape[0]
    cdef bint phase = bool(use_phase)
    cdef unsigned long long mp = mask_plus
    cdef unsigned long long mm = mask_minus
    cdef int nb = (2 if phase else 1) << t

    cdef cnp.ndarray[cnp.float64_t, ndim=1] bmax = np.full(nb, -INFINITY)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] bsum = np.zeros(nb)
    cdef double[::1] bm = bmax
    cdef double[::1] bs = bsum

    cdef unsigned long long idx, total = (<unsigned long long>1) << k
    cdef unsigned long long one = 1
    cdef int v, e, i, b
    cdef double x
    cdef int su, sv

    with nogil:
        for idx in range(total):
            x = 0.0
            for v in range(k):
                x += vlog[v, (idx >> v) & one]
            for e in range(m):
                su = <int>((idx >> eu[e]) & one)
                sv = <int>((idx >> ev[e]) & one)
                x += eflat[4 * e + 2 * su + sv]
            if x == -INFINITY:
                continue
            b = 0
            for i in range(t):
                b |= (<int>((idx >> tpos[i]) & one)) << i
            if phase:
                if __builtin_popcountll(idx & mp) >= __builtin_popcountll(idx & mm):
                    b |= 1 << t
            if x <= bm[b]:
                bs[b] += exp(x - bm[b])
            elif bm[b] == -INFINITY:
                bm[b] = x
                bs[b] = 1.0
            else:
                bs[b] = bs[b] * exp(bm[b] - x) + 1.0
                bm[b] = x

    out = np.full(nb, -INFINITY)
    for b in range(nb):
        if bm[b] != -INFINITY and bs[b] > 0:
            out[b] = bm[b] + log(bs[b])
    return out
