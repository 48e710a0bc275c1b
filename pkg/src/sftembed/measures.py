"""Finite-sample symbolic measures: samples, cylinder frequencies, Markov sources.

Frequencies are kept as exact counts over per-length denominators; floats
appear only in entropy values and diagnostics.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.special import digamma

from . import kernels
from .blocks import block_rows, first_positions, iter_all_widths
from .errors import InputError, ParseError

SOURCE = "source"
EDGE = "edge"
PLUGIN = "plugin"
MILLER_MADOW = "miller-madow"
GRASSBERGER = "grassberger"
ESTIMATORS = (PLUGIN, MILLER_MADOW, GRASSBERGER)


class SplitMix64:
    """splitmix64 generator; the state is an explicit value.

    ``state += 0x9E3779B97F4A7C15``; output ``z = state``,
    ``z = (z ^ z>>30) * 0xBF58476D1CE4E5B9``, ``z = (z ^ z>>27) * 0x94D049BB133111EB``,
    ``z ^ z>>31`` (all mod 2**64). Uniform doubles are ``(z >> 11) * 2**-53``.
    Seed 0 yields 0xE220A8397B1DCDAF, 0x6E789E6AA1B965F4, 0x06C45D188009454F.
    """

    def __init__(self, seed: int):
        self.state = int(seed) & (2**64 - 1)

    def raw(self, n: int) -> np.ndarray:
        out, self.state = kernels.splitmix64_stream(self.state, n)
        return out

    def uniforms(self, n: int) -> np.ndarray:
        return (self.raw(n) >> np.uint64(11)).astype(np.float64) * (2.0 ** -53)


@dataclass(frozen=True, eq=False)
class SymbolicSample:
    """A finite window of a bi-infinite sequence starting at ``base_index``.

    ``alphabet_kind`` is ``"source"`` (nonnegative integer symbols) or
    ``"edge"`` (indices into ``alphabet``, the edge ids of a shift).
    """

    symbols: np.ndarray
    base_index: int = 0
    alphabet_kind: str = SOURCE
    alphabet: tuple = ()

    def __post_init__(self):
        s = np.ascontiguousarray(self.symbols, dtype=np.int64)
        s.setflags(write=False)
        object.__setattr__(self, "symbols", s)
        if self.alphabet_kind not in (SOURCE, EDGE):
            raise InputError(f"unknown alphabet kind {self.alphabet_kind!r}")
        if len(s) and s.min() < 0:
            raise InputError("symbols must be nonnegative")
        if self.alphabet_kind == EDGE and len(s) and self.alphabet and s.max() >= len(self.alphabet):
            raise InputError("edge symbol outside the declared alphabet")

    def __len__(self):
        return len(self.symbols)

    def __eq__(self, other):
        if not isinstance(other, SymbolicSample):
            return NotImplemented
        return (self.base_index == other.base_index and self.alphabet_kind == other.alphabet_kind
                and tuple(self.alphabet) == tuple(other.alphabet)
                and np.array_equal(self.symbols, other.symbols))

    def __hash__(self):
        return hash((self.base_index, self.alphabet_kind, self.symbols.tobytes()))

    def window(self, start: int, stop: int) -> "SymbolicSample":
        """Sub-window by absolute indices ``[start, stop)``."""
        lo, hi = start - self.base_index, stop - self.base_index
        if lo < 0 or hi > len(self) or lo > hi:
            raise InputError("window outside the sample")
        return SymbolicSample(self.symbols[lo:hi], start, self.alphabet_kind, self.alphabet)

    def tokens(self):
        if self.alphabet_kind == EDGE and self.alphabet:
            return [self.alphabet[i] for i in self.symbols.tolist()]
        return [str(i) for i in self.symbols.tolist()]


def source_sample(symbols, base_index=0) -> SymbolicSample:
    return SymbolicSample(np.asarray(symbols, dtype=np.int64), base_index, SOURCE)


@dataclass(eq=False)
class EmpiricalMeasure:
    """Sliding-window cylinder counts for word lengths ``1..k_max``.

    For length ``k`` the ``n_k`` distinct words are the rows of ``words[k]``
    (lexicographic order) with counts ``counts[k]``; frequencies are
    ``count / (sample_length - k + 1)``.
    """

    k_max: int
    sample_length: int
    words: dict = field(default_factory=dict)
    counts: dict = field(default_factory=dict)
    _lookup: dict = field(default_factory=dict, repr=False)

    def denominator(self, k: int) -> int:
        return self.sample_length - k + 1

    def count(self, word) -> int:
        word = tuple(int(s) for s in word)
        k = len(word)
        if not 1 <= k <= self.k_max:
            raise InputError(f"word length {k} outside 1..{self.k_max}")
        if k not in self._lookup:
            self._lookup[k] = {tuple(r): int(c) for r, c in
                               zip(self.words[k].tolist(), self.counts[k].tolist())}
        return self._lookup[k].get(word, 0)

    def freq(self, word) -> Fraction:
        return Fraction(self.count(word), self.denominator(len(word)))

    def freqs(self, k: int) -> dict:
        d = self.denominator(k)
        return {tuple(r): Fraction(c, d) for r, c in zip(self.words[k].tolist(), self.counts[k].tolist())}

    def block_entropy(self, k: int, estimator: str = PLUGIN) -> float:
        """Block entropy ``H_k`` of the length-``k`` words (``H_0 = 0``).

        ``"plugin"`` is ``-sum p log p`` over observed frequencies;
        ``"miller-madow"`` adds ``(n_k - 1) / (2 D)``; ``"grassberger"`` is the
        digamma-corrected estimator of Grassberger (2003).
        """
        if k == 0:
            return 0.0
        c = self.counts[k]
        d = self.denominator(k)
        if estimator == PLUGIN:
            p = c / d
            return float(-(p * np.log(p)).sum())
        if estimator == MILLER_MADOW:
            p = c / d
            return float(-(p * np.log(p)).sum() + (len(c) - 1) / (2 * d))
        if estimator == GRASSBERGER:
            cf = c.astype(np.float64)
            odd = np.where(c % 2 == 1, -1.0, 1.0)
            g = digamma(cf) + 0.5 * odd * (digamma((cf + 1) / 2) - digamma(cf / 2))
            return float(math.log(d) - (cf * g).sum() / d)
        raise InputError(f"unknown entropy estimator {estimator!r}")

    def extension_counts(self, prefix, ext_len: int) -> dict:
        """Counts of ``prefix + s`` keyed by the extension block ``s``."""
        prefix = tuple(int(s) for s in prefix)
        k = len(prefix) + ext_len
        if k > self.k_max:
            raise InputError(f"need k_max >= {k}")
        rows = self.words[k]
        if not len(rows):
            return {}
        mask = np.all(rows[:, :len(prefix)] == np.array(prefix, dtype=np.int64), axis=1)
        return {tuple(r[len(prefix):]): int(c)
                for r, c in zip(rows[mask].tolist(), self.counts[k][mask].tolist())}


def empirical_measure(sample: SymbolicSample, k_max: int) -> EmpiricalMeasure:
    """Sliding-window cylinder counts of ``sample`` up to length ``k_max``."""
    if k_max < 1:
        raise InputError("k_max must be >= 1")
    n = len(sample)
    if n < k_max:
        raise InputError(f"sample length {n} < k_max {k_max}")
    em = EmpiricalMeasure(k_max, n)
    for k, ranks, g in iter_all_widths(sample.symbols, k_max):
        em.counts[k] = np.bincount(ranks, minlength=g).astype(np.int64)
        em.words[k] = block_rows(sample.symbols, first_positions(ranks, g), k)
    return em


@dataclass(frozen=True)
class ContextCounts:
    """Counts of fixed-length extension blocks following a prefix at chosen positions.

    Duck-types the ``extension_counts`` query of :class:`EmpiricalMeasure` for
    prefixes too long to tabulate every cylinder.
    """

    prefix: tuple
    ext_len: int
    table: dict

    def extension_counts(self, prefix, ext_len):
        if tuple(prefix) != self.prefix or ext_len != self.ext_len:
            raise InputError("context table built for a different prefix/extension length")
        return dict(self.table)


def truncate(sample: SymbolicSample, K: int) -> SymbolicSample:
    """Replace every symbol ``i`` by ``min(i, K)``."""
    if K < 1:
        raise InputError("K must be >= 1")
    return SymbolicSample(np.minimum(sample.symbols, K), sample.base_index,
                          sample.alphabet_kind, sample.alphabet)


def estimate_entropy(em: EmpiricalMeasure, k: int = 3, estimator: str = PLUGIN) -> float:
    """Conditional block-entropy estimate ``H_{k+1} - H_k`` (nats per symbol)."""
    if not 0 <= k < em.k_max:
        raise InputError(f"need 0 <= k < k_max = {em.k_max}")
    return max(0.0, em.block_entropy(k + 1, estimator) - em.block_entropy(k, estimator))


def sample_entropy(sample: SymbolicSample, k: int = 3, estimator: str = PLUGIN) -> float:
    return estimate_entropy(empirical_measure(sample, k + 1), k, estimator)


@dataclass(frozen=True)
class GenericityReport:
    k: int
    discrepancy: float
    two_sided_discrepancy: float
    escape_mass: dict


def _max_discrepancy(a: EmpiricalMeasure, b: EmpiricalMeasure, k: int) -> float:
    fa, fb = a.freqs(k), b.freqs(k)
    return float(max(abs(fa.get(w, 0) - fb.get(w, 0)) for w in set(fa) | set(fb)))


def genericity_check(sample: SymbolicSample, k: int, ladder=None) -> GenericityReport:
    """Half-window consistency of length-``k`` frequencies plus escape masses.

    ``discrepancy`` compares the first and second halves (one-sided averages);
    ``two_sided_discrepancy`` compares the centred half-window with the whole
    window. ``escape_mass[K]`` is the frequency of symbols ``>= K``.
    """
    n = len(sample)
    if n < 4 * k:
        raise InputError(f"sample length {n} < 4k = {4 * k}")
    s = sample.symbols
    half = n // 2
    first = empirical_measure(source_sample(s[:half]), k)
    second = empirical_measure(source_sample(s[half:2 * half]), k)
    centre = empirical_measure(source_sample(s[n // 4:n // 4 + half]), k)
    whole = empirical_measure(source_sample(s), k)
    if ladder is None:
        top = int(s.max()) + 1 if n else 1
        ladder = [1 << j for j in range(max(1, top.bit_length()) + 1)]
    escape = {K: float(np.count_nonzero(s >= K)) / n for K in ladder}
    return GenericityReport(k, _max_discrepancy(first, second, k),
                            _max_discrepancy(centre, whole, k), escape)


@dataclass(frozen=True, eq=False)
class MarkovSource:
    """Finite-state Markov chain emitting its state sequence."""

    P: np.ndarray
    initial: np.ndarray = None

    def __post_init__(self):
        P = np.array(self.P, dtype=np.float64)
        if P.ndim != 2 or P.shape[0] != P.shape[1] or not P.shape[0]:
            raise InputError("transition matrix must be square and nonempty")
        if (P < 0).any() or np.abs(P.sum(axis=1) - 1).max() > 1e-12:
            raise InputError("transition rows must be stochastic within 1e-12")
        object.__setattr__(self, "P", P)
        pi = stationary_distribution(P) if self.initial is None else np.asarray(self.initial, float)
        object.__setattr__(self, "initial", pi)

    @property
    def n(self):
        return self.P.shape[0]

    def __eq__(self, other):
        return isinstance(other, MarkovSource) and np.array_equal(self.P, other.P) \
            and np.array_equal(self.initial, other.initial)

    def __hash__(self):
        return hash(self.P.tobytes())


def stationary_distribution(P) -> np.ndarray:
    """Minimum-norm probability vector with ``pi P = pi``."""
    P = np.asarray(P, dtype=np.float64)
    n = P.shape[0]
    a = np.vstack([P.T - np.eye(n), np.ones((1, n))])
    b = np.zeros(n + 1)
    b[-1] = 1.0
    pi = np.linalg.lstsq(a, b, rcond=None)[0]
    pi = np.clip(pi, 0, None)
    return pi / pi.sum()


def _cumulative(p):
    c = np.cumsum(p)
    c[-1] = 1.0
    return c


def markov_sample(source: MarkovSource, length: int, seed: int) -> SymbolicSample:
    """Seeded sample path; the initial state is drawn from ``source.initial``.

    Step rule: with uniform ``u`` and cumulative row ``c``, the next state is
    the number of ``j < n-1`` with ``c[j] <= u``.
    """
    if length < 1:
        raise InputError("length must be >= 1")
    rng = SplitMix64(seed)
    u = rng.uniforms(length)
    c0 = _cumulative(source.initial)
    start = int(np.count_nonzero(c0[:-1] <= u[0]))
    cum = np.array([_cumulative(r) for r in source.P])
    return source_sample(kernels.markov_walk(cum, start, u[1:]))


def markov_entropy(source: MarkovSource) -> float:
    """Entropy rate ``-sum_i pi_i sum_j p_ij log p_ij`` (nats), ``0 log 0 = 0``."""
    P = source.P
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(P > 0, P * np.log(np.where(P > 0, P, 1.0)), 0.0)
    pi = stationary_distribution(P)
    return float(-(pi[:, None] * terms).sum())


def t_slice_filter(samples, t: float, k: int = 3):
    """Split ``samples`` into those with estimated entropy below ``t`` and the rest."""
    kept, discarded = [], []
    for s in samples:
        (kept if sample_entropy(s, k) < t else discarded).append(s)
    return kept, discarded


# -- file formats ---------------------------------------------------------------
def format_sample(sample: SymbolicSample) -> str:
    return (f"sample {sample.base_index} {len(sample)} {sample.alphabet_kind}\n"
            + " ".join(sample.tokens()) + "\n")


def parse_sample(text: str, alphabet=None) -> SymbolicSample:
    """Parse ``sample <base> <length> <kind>`` followed by the symbol line."""
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ParseError("empty sample file")
    head = lines[0].split()
    if len(head) != 4 or head[0] != "sample":
        raise ParseError("expected header 'sample <base_index> <length> <alphabet_kind>'")
    try:
        base, length = int(head[1]), int(head[2])
    except ValueError:
        raise ParseError("sample header fields must be integers") from None
    kind = head[3]
    toks = " ".join(lines[1:]).split()
    if len(toks) != length:
        raise ParseError(f"header declares {length} symbols, found {len(toks)}")
    if kind == SOURCE:
        try:
            vals = [int(t) for t in toks]
        except ValueError:
            raise ParseError("source symbols must be integers") from None
        if any(v < 0 for v in vals):
            raise ParseError("source symbols must be nonnegative")
        return SymbolicSample(np.array(vals, dtype=np.int64), base, SOURCE)
    if kind == EDGE:
        if alphabet is None:
            raise ParseError("edge samples need the shift's alphabet")
        pos = {a: i for i, a in enumerate(alphabet)}
        try:
            vals = [pos[t] for t in toks]
        except KeyError as exc:
            raise ParseError(f"unknown edge id {exc.args[0]!r}") from None
        return SymbolicSample(np.array(vals, dtype=np.int64), base, EDGE, tuple(alphabet))
    raise ParseError(f"unknown alphabet kind {kind!r}")


def format_markov(source: MarkovSource) -> str:
    rows = [" ".join(repr(float(p)) for p in row) for row in source.P]
    return f"markov {source.n}\n" + "\n".join(rows) + "\n"


def parse_markov(text: str) -> MarkovSource:
    lines = [ln.split("#", 1)[0].strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln]
    if not lines or lines[0].split()[0] != "markov" or len(lines[0].split()) != 2:
        raise ParseError("expected header 'markov <n>'")
    try:
        n = int(lines[0].split()[1])
        rows = [[float(v) for v in ln.split()] for ln in lines[1:]]
    except ValueError:
        raise ParseError("markov rows must be numbers") from None
    if len(rows) != n or any(len(r) != n for r in rows):
        raise ParseError(f"expected {n} rows of {n} probabilities")
    try:
        return MarkovSource(np.array(rows))
    except InputError as exc:
        raise ParseError(str(exc.args[0])) from None

