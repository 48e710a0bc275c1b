"""Pure-Python/numpy implementations of the hot kernels.

Signatures and results are identical to the compiled ``_kernels`` module;
``sftembed.kernels`` picks whichever is importable.
"""
from bisect import bisect_right

import numpy as np

_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB
_MASK = (1 << 64) - 1
NO_GAP = np.iinfo(np.int64).max


def splitmix64_stream(state, n):
    """Return ``n`` consecutive splitmix64 outputs and the advanced state."""
    state = int(state) & _MASK
    if n <= 0:
        return np.zeros(0, dtype=np.uint64), state
    with np.errstate(over="ignore"):
        steps = np.arange(1, n + 1, dtype=np.uint64)
        z = np.uint64(state) + steps * np.uint64(_GAMMA)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
        z = z ^ (z >> np.uint64(31))
    return z, (state + n * _GAMMA) & _MASK


def markov_walk(cum, start, uniforms):
    cum = np.asarray(cum, dtype=np.float64)
    rows = [list(r[:-1]) for r in cum]
    out = np.empty(len(uniforms) + 1, dtype=np.int64)
    s = int(start)
    out[0] = s
    for k, u in enumerate(np.asarray(uniforms, dtype=np.float64).tolist()):
        s = bisect_right(rows[s], u)
        out[k + 1] = s
    return out


def min_gap_by_group(gid, positions, ngroups):
    """Occurrence count and minimal gap between consecutive positions per group.

    ``positions`` must be increasing; groups with fewer than two members get
    ``NO_GAP``.
    """
    gid = np.asarray(gid, dtype=np.int64)
    positions = np.asarray(positions, dtype=np.int64)
    counts = np.bincount(gid, minlength=ngroups).astype(np.int64)
    mingap = np.full(ngroups, NO_GAP, dtype=np.int64)
    if len(gid) < 2:
        return counts, mingap
    order = np.argsort(gid, kind="stable")
    g = gid[order]
    p = positions[order]
    same = g[1:] == g[:-1]
    gaps = (p[1:] - p[:-1])[same]
    np.minimum.at(mingap, g[1:][same], gaps)
    return counts, mingap


def find_occurrences(seq, pattern):
    """Start indices of every (possibly overlapping) occurrence of ``pattern``."""
    seq = np.asarray(seq, dtype=np.int64)
    pattern = np.asarray(pattern, dtype=np.int64)
    m = len(pattern)
    n = len(seq)
    if m == 0 or m > n:
        return np.zeros(0, dtype=np.int64)
    cand = np.flatnonzero(seq[: n - m + 1] == pattern[0])
    for d in range(1, m):
        if not len(cand):
            break
        cand = cand[seq[cand + d] == pattern[d]]
    return cand.astype(np.int64)
