"""Index machinery around marker anchors: the gap bound N, the anchor block ``a``,
occurrence set ``I1``, protected-window complement ``I2`` and itineraries.

A protected window around an anchor occurrence ``i`` is
``[i - M, i + len_w + 3M]`` (width ``len_w + 4M + 1``); ``I2`` is the part of
the index range outside every protected window.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import kernels
from .blocks import block_rows, compress, dense_symbols, first_positions, lex_rank
from .errors import (BoundaryError, CorruptionError, InputError, NoMarkerAnchorError,
                     PreconditionError, WindowsCollideError)
from .measures import SymbolicSample, empirical_measure, estimate_entropy, source_sample


def window_width(len_w: int, M: int) -> int:
    return len_w + 4 * M + 1


def compute_N(h_prime: float, t: float, len_w: int, M: int) -> int:
    """Smallest integer strictly above ``h'/(h'-t) * (len_w + 4M + 1)``.

    Evaluated in exact rational arithmetic on the binary values of the floats.
    """
    if not 0 < t < h_prime:
        raise PreconditionError(f"need 0 < t < h' (t={t}, h'={h_prime})")
    h, tt = Fraction(h_prime), Fraction(t)
    rhs = h / (h - tt) * window_width(len_w, M)
    return math.floor(rhs) + 1


def occurrences(sample: SymbolicSample, a) -> np.ndarray:
    """Absolute start indices of every occurrence of ``a`` (overlaps included)."""
    a = np.asarray(a, dtype=np.int64)
    return kernels.find_occurrences(sample.symbols, a) + sample.base_index


def choose_block_a(sample: SymbolicSample, N: int, max_len: int, min_count: int = 1) -> tuple:
    """First word in length-then-lexicographic order whose occurrences are ``>= N`` apart.

    Only words occurring at least ``min_count`` times are eligible (``1`` is
    plain positive frequency). Words are refined one symbol at a time over the
    positions still carrying an eligible prefix.
    """
    x = sample.symbols
    n = len(x)
    sym, q = dense_symbols(x)
    active = np.arange(n, dtype=np.int64)
    r = g = None
    for m in range(1, min(max_len, n) + 1):
        if m == 1:
            r, g = compress(sym, q)
        else:
            r, g = compress(r * q + sym[active + m - 1], g * q)
        counts, mingap = kernels.min_gap_by_group(r, active, g)
        ok = np.flatnonzero((counts >= min_count) & (mingap >= N))
        if len(ok):
            first = active[np.flatnonzero(r == ok[0])[0]]
            return tuple(int(s) for s in x[first:first + m])
        keep = (counts[r] >= min_count) & (active + m < n)
        active, r = active[keep], r[keep]
        if not len(active):
            break
    raise NoMarkerAnchorError(
        f"no block up to length {max_len} with occurrence gaps >= {N} "
        f"and at least {min_count} occurrences")


@dataclass(frozen=True, eq=False)
class IndexSets:
    """Anchor occurrences ``I1`` and the unprotected indices ``I2`` of ``span``."""

    I1: np.ndarray
    I2: np.ndarray
    span: range
    len_w: int
    M: int

    @property
    def W(self) -> int:
        return window_width(self.len_w, self.M)

    def n_of(self, j):
        """Rank of ``j`` inside ``I2`` (the induced-map time of index ``j``)."""
        j = np.asarray(j, dtype=np.int64)
        k = np.searchsorted(self.I2, j)
        bad = (k >= len(self.I2)) | (self.I2[np.minimum(k, len(self.I2) - 1)] != j)
        if np.any(bad):
            raise InputError("index not in I2")
        return k if k.ndim else int(k)

    def protected(self, i):
        return range(i - self.M, i + self.len_w + 3 * self.M + 1)

    @property
    def mu_A(self) -> float:
        return len(self.I2) / len(self.span) if len(self.span) else 0.0

    def __eq__(self, other):
        return (isinstance(other, IndexSets) and self.span == other.span
                and self.len_w == other.len_w and self.M == other.M
                and np.array_equal(self.I1, other.I1))


def index_sets(I1, span: range, len_w: int, M: int) -> IndexSets:
    """``I2 = {j in span : j < i - M or j > i + len_w + 3M for every i in I1}``."""
    I1 = np.asarray(sorted(int(i) for i in I1), dtype=np.int64)
    W = window_width(len_w, M)
    if len(I1) > 1:
        gaps = np.diff(I1)
        if (gaps < W).any():
            k = int(np.flatnonzero(gaps < W)[0])
            raise WindowsCollideError(
                f"anchors {I1[k]} and {I1[k + 1]} are closer than the window width {W}")
    lo, n = span.start, len(span)
    diff = np.zeros(n + 1, dtype=np.int64)
    a = np.clip(I1 - M - lo, 0, n)
    b = np.clip(I1 + len_w + 3 * M + 1 - lo, 0, n)
    np.add.at(diff, a, 1)
    np.add.at(diff, b, -1)
    covered = np.cumsum(diff[:n]) > 0
    I2 = np.flatnonzero(~covered).astype(np.int64) + lo
    return IndexSets(I1, I2, span, len_w, M)


def itinerary(sample: SymbolicSample, idx: IndexSets, W: int):
    """Code the ``W``-block starting at each ``j`` in ``I2``.

    Codes are lexicographic ranks among the blocks that occur; the second
    return value is the code table (row ``c`` is the block with code ``c``).
    """
    if not len(idx.I2):
        return source_sample([]), np.zeros((0, W), dtype=np.int64)
    local = idx.I2 - sample.base_index
    over = np.flatnonzero((local < 0) | (local + W > len(sample)))
    if len(over):
        bad = int(idx.I2[over[0]])
        raise BoundaryError(f"block at index {bad} runs outside the sample window", index=bad)
    ranks, g = lex_rank(sample.symbols, local, W)
    table = block_rows(sample.symbols, first_positions(ranks, g, local), W)
    return source_sample(ranks), table


def reconstruct_from_itinerary(x_prime: SymbolicSample, table: np.ndarray, idx: IndexSets, W: int):
    """Rebuild the symbols on the union of the blocks ``[j, j + W - 1]``, ``j`` in ``I2``.

    Returns ``(sample, covered)``: the sample spans the first to the last
    covered index, ``covered`` flags which of its positions some block
    determines (uncovered positions hold 0). Overlapping blocks that disagree
    raise :class:`CorruptionError` at the first offending index.
    """
    I2 = idx.I2
    codes = np.asarray(x_prime.symbols, dtype=np.int64)
    if len(codes) != len(I2):
        raise InputError(f"itinerary length {len(codes)} != |I2| = {len(I2)}")
    if not len(I2):
        return source_sample([]), np.zeros(0, dtype=bool)
    if codes.max() >= len(table):
        k = int(np.flatnonzero(codes >= len(table))[0])
        raise CorruptionError(f"itinerary code outside the table at index {int(I2[k])}",
                              offset=int(I2[k]))
    # overlapping neighbours must agree
    d = np.diff(I2)
    for gap in np.unique(d[d < W]).tolist():
        sel = np.flatnonzero(d == gap)
        left, right = codes[sel], codes[sel + 1]
        for c in range(gap, W):
            bad = table[left, c] != table[right, c - gap]
            if bad.any():
                k = int(sel[np.flatnonzero(bad)[0]])
                off = int(I2[k] + c)
                raise CorruptionError(f"itinerary blocks disagree at index {off}", offset=off)
    lo, hi = int(I2[0]), int(I2[-1]) + W
    pos = np.arange(lo, hi, dtype=np.int64)
    k = np.searchsorted(I2, pos, side="right") - 1
    off = pos - I2[k]
    covered = off < W
    out = np.zeros(hi - lo, dtype=np.int64)
    out[covered] = table[codes[k[covered]], off[covered]]
    return source_sample(out, lo), covered


@dataclass(frozen=True)
class AbramovReport:
    h_itinerary: float
    h_sample: float
    mu_A: float
    predicted: float
    relative_gap: float


def abramov_check(sample: SymbolicSample, idx: IndexSets, k: int = 3, W: int | None = None,
                  x_prime: SymbolicSample | None = None, estimator: str = "plugin") -> AbramovReport:
    """Compare the itinerary's entropy with ``h(sample) / mu(A)``.

    ``mu(A)`` is estimated by ``|I2| / |span|``; the gap is relative to
    ``h(sample)`` (0 when both sides vanish). Both entropies use the same
    ``estimator`` (see :meth:`EmpiricalMeasure.block_entropy`).
    """
    W = idx.W if W is None else W
    if x_prime is None:
        x_prime, _ = itinerary(sample, idx, W)
    h_it = estimate_entropy(empirical_measure(x_prime, k + 1), k, estimator)
    h_x = estimate_entropy(empirical_measure(sample, k + 1), k, estimator)
    mu = idx.mu_A
    pred = h_x / mu if mu > 0 else math.inf
    if h_x == 0:
        gap = 0.0 if h_it == 0 else math.inf
    else:
        gap = abs(h_it - pred) / h_x
    return AbramovReport(h_it, h_x, mu, pred, gap)


def block_frequencies(x_prime: SymbolicSample, L: int):
    """Distinct aligned ``L``-blocks of ``x_prime`` with their counts, and each block's id.

    Returns ``(blocks, counts, block_ids)``; ``blocks`` rows are in
    lexicographic order. ``len(x_prime)`` must be a multiple of ``L``.
    """
    s = x_prime.symbols
    if len(s) % L:
        raise InputError("length is not a multiple of the block length")
    starts = np.arange(0, len(s), L, dtype=np.int64)
    if not len(starts):
        return np.zeros((0, L), dtype=np.int64), np.zeros(0, dtype=np.int64), starts
    ranks, g = lex_rank(s, starts, L)
    blocks = block_rows(s, first_positions(ranks, g, starts), L)
    return blocks, np.bincount(ranks, minlength=g).astype(np.int64), ranks
