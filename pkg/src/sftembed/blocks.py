"""Exact lexicographic ranking of fixed-width blocks of an integer sequence.

Ranks are built by refining one column at a time, so rank order equals the
lexicographic order of the blocks. No hashing is involved.
"""
import numpy as np


def dense_symbols(symbols):
    """Map symbols to ``0..q-1`` preserving order; returns ``(codes, q)``."""
    s = np.asarray(symbols, dtype=np.int64)
    if not len(s):
        return s, 1
    lo, hi = int(s.min()), int(s.max())
    if lo >= 0 and hi < (1 << 20):
        return s, hi + 1
    u, inv = np.unique(s, return_inverse=True)
    return inv.astype(np.int64), len(u)


def compress(keys, bound):
    """Dense ranks of integer ``keys`` in ``[0, bound)``; returns ``(ranks, n_distinct)``."""
    keys = np.asarray(keys, dtype=np.int64)
    if not len(keys):
        return keys, 0
    if bound <= 4 * len(keys) + 4096:
        present = np.zeros(bound, dtype=bool)
        present[keys] = True
        rank = np.cumsum(present, dtype=np.int64) - 1
        return rank[keys], int(rank[-1] + 1)
    u, inv = np.unique(keys, return_inverse=True)
    return inv.astype(np.int64).reshape(-1), len(u)


def lex_rank(symbols, starts, width, dense=None):
    """Lexicographic rank of ``symbols[s:s+width]`` for every ``s`` in ``starts``."""
    sym, q = dense if dense is not None else dense_symbols(symbols)
    starts = np.asarray(starts, dtype=np.int64)
    r, g = compress(sym[starts], q)
    for d in range(1, width):
        r, g = compress(r * q + sym[starts + d], g * q)
    return r, g


def iter_all_widths(symbols, k_max):
    """Yield ``(k, ranks, n_distinct)`` for widths ``1..k_max`` over all start positions."""
    sym, q = dense_symbols(symbols)
    n = len(sym)
    r, g = compress(sym, q)
    yield 1, r, g
    for k in range(2, k_max + 1):
        m = n - k + 1
        r, g = compress(r[:m] * q + sym[k - 1:k - 1 + m], g * q)
        yield k, r, g


def first_positions(ranks, n_distinct, starts=None):
    """Earliest start position realizing each rank."""
    ranks = np.asarray(ranks, dtype=np.int64)
    if starts is None:
        starts = np.arange(len(ranks), dtype=np.int64)
    rep = np.empty(n_distinct, dtype=np.int64)
    rep[ranks[::-1]] = starts[::-1]
    return rep


def block_rows(symbols, positions, width):
    """2-D array whose rows are ``symbols[p:p+width]``."""
    s = np.asarray(symbols, dtype=np.int64)
    positions = np.asarray(positions, dtype=np.int64)
    if width == 0 or not len(positions):
        return np.zeros((len(positions), width), dtype=np.int64)
    return s[positions[:, None] + np.arange(width)[None, :]]
