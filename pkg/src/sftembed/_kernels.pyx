# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels; see ``_kernels_py`` for the reference semantics."""
import numpy as np
cimport numpy as cnp
from libc.stdint cimport uint64_t, int64_t

cnp.import_array()

cdef uint64_t _GAMMA = 0x9E3779B97F4A7C15ULL
cdef uint64_t _MIX1 = 0xBF58476D1CE4E5B9ULL
cdef uint64_t _MIX2 = 0x94D049BB133111EBULL
NO_GAP = np.iinfo(np.int64).max


def splitmix64_stream(state, Py_ssize_t n):
    cdef uint64_t s = <uint64_t>(int(state) & 0xFFFFFFFFFFFFFFFF)
    cdef uint64_t z
    cdef Py_ssize_t i
    if n <= 0:
        return np.zeros(0, dtype=np.uint64), int(s)
    out = np.empty(n, dtype=np.uint64)
    cdef uint64_t[::1] o = out
    for i in range(n):
        s += _GAMMA
        z = s
        z = (z ^ (z >> 30)) * _MIX1
        z = (z ^ (z >> 27)) * _MIX2
        o[i] = z ^ (z >> 31)
    return out, int(s)


def markov_walk(cum, Py_ssize_t start, uniforms):
    cdef const double[:, ::1] c = np.ascontiguousarray(cum, dtype=np.float64)
    cdef const double[::1] u = np.ascontiguousarray(uniforms, dtype=np.float64)
    cdef Py_ssize_t n = u.shape[0]
    cdef Py_ssize_t k = c.shape[1] - 1
    out = np.empty(n + 1, dtype=np.int64)
    cdef int64_t[::1] o = out
    cdef Py_ssize_t i, j, s = start
    cdef double x
    o[0] = s
    for i in range(n):
        x = u[i]
        j = 0
        while j < k and c[s, j] <= x:
            j += 1
        s = j
        o[i + 1] = s
    return out


def min_gap_by_group(gid, positions, Py_ssize_t ngroups):
    cdef const int64_t[::1] g = np.ascontiguousarray(gid, dtype=np.int64)
    cdef const int64_t[::1] p = np.ascontiguousarray(positions, dtype=np.int64)
    counts = np.zeros(ngroups, dtype=np.int64)
    mingap = np.full(ngroups, NO_GAP, dtype=np.int64)
    last = np.full(ngroups, -1, dtype=np.int64)
    cdef int64_t[::1] cn = counts
    cdef int64_t[::1] mg = mingap
    cdef int64_t[::1] ls = last
    cdef Py_ssize_t i, n = g.shape[0]
    cdef int64_t k, d
    for i in range(n):
        k = g[i]
        cn[k] += 1
        if ls[k] >= 0:
            d = p[i] - ls[k]
            if d < mg[k]:
                mg[k] = d
        ls[k] = p[i]
    return counts, mingap


def find_occurrences(seq, pattern):
    cdef const int64_t[::1] s = np.ascontiguousarray(seq, dtype=np.int64)
    cdef const int64_t[::1] w = np.ascontiguousarray(pattern, dtype=np.int64)
    cdef Py_ssize_t n = s.shape[0], m = w.shape[0]
    cdef Py_ssize_t i, q, cnt = 0
    if m == 0 or m > n:
        return np.zeros(0, dtype=np.int64)
    fail_arr = np.zeros(m, dtype=np.int64)
    cdef int64_t[::1] f = fail_arr
    q = 0
    for i in range(1, m):
        while q > 0 and w[i] != w[q]:
            q = f[q - 1]
        if w[i] == w[q]:
            q += 1
        f[i] = q
    out = np.empty(n, dtype=np.int64)
    cdef int64_t[::1] o = out
    q = 0
    for i in range(n):
        while q > 0 and s[i] != w[q]:
            q = f[q - 1]
        if s[i] == w[q]:
            q += 1
        if q == m:
            o[cnt] = i - m + 1
            cnt += 1
            q = f[q - 1]
    return out[:cnt].copy()
