"""Side channel carrying a few bits in the density of ``u`` slots after marker anchors.

Each anchor occurrence ``i`` of the block ``a`` is followed by an extension
block ``s`` (the ``ext_len`` source symbols after ``a``). The extension blocks
are partitioned into disjoint families ``U_1, ..., U_n_max`` whose relative
frequencies ``r_n`` sit near ``2**-(n*n)``. Bit ``sigma_n`` is written by
putting ``u`` in the slot of every occurrence whose context lies in ``U_n``
exactly when ``sigma_n = 1``; the decoder sees only the slot density
``f = sum_n sigma_n r_n`` and picks the nearest nominal codeword.
"""
from __future__ import annotations

import io
import itertools
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import AmbiguousDensityError, GranularityError, InputError, LayoutError, ParseError
from .finitary import read_bytes, read_ints, read_varint, write_bytes, write_ints, write_varint

TOL_FACTOR = Fraction(1, 4)


def nominal_weights(n_max: int) -> tuple:
    """``(2**-1, 2**-4, 2**-9, ...)`` as exact fractions."""
    if not 1 <= n_max <= 6:
        raise InputError("n_max must lie in 1..6")
    return tuple(Fraction(1, 2 ** (n * n)) for n in range(1, n_max + 1))


@dataclass(frozen=True)
class SigmaBits:
    bits: tuple

    def __post_init__(self):
        bits = tuple(int(b) for b in self.bits)
        if any(b not in (0, 1) for b in bits):
            raise InputError("sigma bits must be 0 or 1")
        object.__setattr__(self, "bits", bits)

    def __len__(self):
        return len(self.bits)

    def __str__(self):
        return "".join(map(str, self.bits))


@dataclass(frozen=True, eq=False)
class MarkerScheme:
    """Every parameter of the marker layout.

    ``w``, ``u``, ``v`` and ``a`` are symbol-index tuples (labels of the
    target shift for ``w``, ``u``, ``v``; source symbols for ``a``).
    ``U_family[n-1]`` is the sorted tuple of extension blocks forming ``U_n``.
    ``ratios`` are the realized relative frequencies at build time.
    """

    w: tuple
    u: tuple
    v: tuple
    M: int
    a: tuple = ()
    N: int = 0
    h_prime: float = 0.0
    t: float = 0.0
    U_family: tuple = ()
    ext_len: int = 0
    n_max: int = 1
    ratios: tuple = ()
    marker_max_len: int = 0

    def __post_init__(self):
        if len(self.u) != self.M or len(self.v) != self.M:
            raise InputError("u and v must have length M")
        if tuple(self.u) == tuple(self.v):
            raise InputError("u and v must differ")

    @property
    def len_w(self) -> int:
        return len(self.w)

    @property
    def r_nominal(self) -> tuple:
        return nominal_weights(self.n_max)

    def slot_offset(self) -> int:
        """Slot start relative to the anchor occurrence: ``len_w + M``."""
        return self.len_w + self.M

    def membership(self, contexts) -> np.ndarray:
        """For each context block, the 1-based family index holding it, or 0."""
        lookup = {s: n for n, fam in enumerate(self.U_family, 1) for s in fam}
        return np.array([lookup.get(tuple(c), 0) for c in contexts], dtype=np.int64)

    def __eq__(self, other):
        return isinstance(other, MarkerScheme) and self.to_bytes() == other.to_bytes()

    def __hash__(self):
        return hash(self.to_bytes())

    def to_bytes(self) -> bytes:
        buf = io.BytesIO()
        for word in (self.w, self.u, self.v, self.a):
            write_ints(buf, word)
        for value in (self.M, self.N, self.ext_len, self.n_max, self.marker_max_len):
            write_varint(buf, value)
        write_bytes(buf, repr(float(self.h_prime)).encode())
        write_bytes(buf, repr(float(self.t)).encode())
        write_varint(buf, len(self.U_family))
        for fam in self.U_family:
            write_varint(buf, len(fam))
            for s in fam:
                write_ints(buf, s)
        write_varint(buf, len(self.ratios))
        for r in self.ratios:
            write_varint(buf, r.numerator)
            write_varint(buf, r.denominator)
        return buf.getvalue()

    @classmethod
    def from_bytes(cls, data):
        buf = io.BytesIO(bytes(data)) if isinstance(data, (bytes, bytearray, memoryview)) else data
        w, u, v, a = (read_ints(buf) for _ in range(4))
        M, N, ext_len, n_max, mml = (read_varint(buf) for _ in range(5))
        try:
            h_prime = float(read_bytes(buf).decode())
            t = float(read_bytes(buf).decode())
        except ValueError:
            raise ParseError("malformed scheme reals") from None
        fams = []
        for _ in range(read_varint(buf)):
            fams.append(tuple(read_ints(buf) for _ in range(read_varint(buf))))
        ratios = []
        for _ in range(read_varint(buf)):
            num = read_varint(buf)
            den = read_varint(buf)
            if den == 0:
                raise ParseError("zero denominator in scheme ratios")
            ratios.append(Fraction(num, den))
        return cls(w, u, v, M, a, N, h_prime, t, tuple(fams), ext_len, n_max, tuple(ratios), mml)


def _ordered_extensions(counts: dict):
    """Most frequent first, ties in length-then-lex order."""
    return sorted(counts, key=lambda s: (-counts[s], len(s), s))


def choose_U_family(em, a, n_max: int, ext_len: int, weights=None, tol_factor=TOL_FACTOR):
    """Greedy disjoint families ``U_1..U_n_max`` with ``r_n`` near ``weights[n-1]``.

    For each ``n``, unused extension blocks are scanned by decreasing count
    (ties in length-then-lex order) twice: the first pass adds every block
    that keeps ``acc`` at or below the goal, the second adds any block that
    strictly reduces ``|acc - goal|``. Rare blocks fill the remainder finely. A family
    is accepted when its ratio lies strictly within ``tol_factor * target``.
    ``em`` only needs ``extension_counts(a, ext_len)``. Returns
    ``(U_family, ratios)`` with exact fractional ratios.
    """
    weights = nominal_weights(n_max) if weights is None else tuple(Fraction(w) for w in weights)
    counts = em.extension_counts(tuple(a), ext_len)
    total = sum(counts.values())
    if total == 0:
        raise InputError("the block a has no observed extensions")
    order = _ordered_extensions(counts)
    used = set()
    fams, ratios = [], []
    for n, target in enumerate(weights, 1):
        goal = target * total
        acc = 0
        fam = []
        for fits in (lambda c: acc + c <= goal, lambda c: abs(acc + c - goal) < abs(acc - goal)):
            for s in order:
                if s in used or s in fam:
                    continue
                if fits(counts[s]):
                    acc += counts[s]
                    fam.append(s)
        r = Fraction(acc, total)
        if not abs(r - target) < tol_factor * target:
            raise GranularityError(
                f"U_{n}: best ratio {float(r):.6g} misses {float(target):.6g} by more than "
                f"{float(tol_factor)} of it; use a larger ext_len (now {ext_len})")
        used.update(fam)
        fams.append(tuple(sorted(fam)))
        ratios.append(r)
    return tuple(fams), tuple(ratios)


def codeword_sums(weights) -> dict:
    """``sigma -> sum sigma_n weights[n]`` for every ``sigma``."""
    n = len(weights)
    return {bits: sum((w for b, w in zip(bits, weights) if b), Fraction(0))
            for bits in itertools.product((0, 1), repeat=n)}


def nearest_codeword(f, n_max: int):
    """Brute-force nearest nominal sum; returns ``(sigma, distance, runner_up_distance)``."""
    f = Fraction(f)
    ranked = sorted(((abs(f - s), bits) for bits, s in codeword_sums(nominal_weights(n_max)).items()))
    (d1, best), (d2, _) = ranked[0], ranked[1] if len(ranked) > 1 else (math.inf, None)
    return best, d1, d2


@dataclass(frozen=True)
class SeparationReport:
    ok: bool
    min_pair_gap: Fraction
    min_decode_margin: Fraction
    worst: tuple
    bounds: tuple


def separation_bound(n: int, n_max: int) -> Fraction:
    """``(3/4) 2**-(n*n) - (5/4) sum_{n<k<=n_max} 2**-(k*k)``."""
    w = nominal_weights(n_max)
    return Fraction(3, 4) * w[n - 1] - Fraction(5, 4) * sum(w[n:], Fraction(0))


def separation_check(ratios, n_max: int, tol=Fraction(0)) -> SeparationReport:
    """Brute-force checks on the realized weights ``ratios``.

    Every pair of codewords with first difference at ``n`` must be farther
    apart than ``separation_bound(n)``, and every realized sum must decode to
    its own ``sigma`` under nearest-nominal decoding with a margin (runner-up
    distance minus best distance) of at least ``2 * tol``.
    """
    ratios = tuple(Fraction(r) for r in ratios)
    if len(ratios) != n_max:
        raise InputError("need one ratio per bit")
    real = codeword_sums(ratios)
    bounds = tuple(separation_bound(n, n_max) for n in range(1, n_max + 1))
    ok = all(b > 0 for b in bounds)
    min_gap = None
    for s1, s2 in itertools.combinations(real, 2):
        n = next(k for k in range(n_max) if s1[k] != s2[k])
        gap = abs(real[s1] - real[s2])
        if min_gap is None or gap < min_gap:
            min_gap = gap
        if not gap > bounds[n]:
            ok = False
    min_margin, worst = None, ()
    for bits, f in real.items():
        got, d1, d2 = nearest_codeword(f, n_max)
        margin = d2 - d1
        if got != bits:
            margin = -margin
        if min_margin is None or margin < min_margin:
            min_margin, worst = margin, bits
    ok = ok and min_margin >= 2 * Fraction(tol)
    return SeparationReport(ok, min_gap if min_gap is not None else Fraction(0),
                            min_margin, worst, bounds)


def default_tolerance(n_markers: int) -> Fraction:
    """Density quantization step ``1 / |I1|`` used for decoding margins."""
    return Fraction(1, max(1, n_markers))


def encode_sigma(y_draft: np.ndarray, I1, membership, sigma: SigmaBits, scheme: MarkerScheme):
    """Write ``u`` or ``v`` into the slot of each occurrence in ``I1`` (in place).

    ``y_draft`` is indexed by absolute position with ``-1`` marking unwritten
    symbols. The slot of ``i`` is ``[i + len_w + M, i + len_w + 2M)``.
    """
    I1 = np.asarray(I1, dtype=np.int64)
    membership = np.asarray(membership, dtype=np.int64)
    if len(sigma) != scheme.n_max:
        raise InputError("sigma length differs from n_max")
    if len(membership) != len(I1):
        raise InputError("one membership entry per occurrence")
    if not len(I1):
        return y_draft
    bits = np.array((0,) + sigma.bits, dtype=np.int64)
    put_u = bits[membership] == 1
    starts = I1 + scheme.slot_offset()
    cols = starts[:, None] + np.arange(scheme.M)
    if cols.min() < 0 or cols.max() >= len(y_draft):
        raise LayoutError("slot outside the output window")
    if (y_draft[cols] != -1).any():
        raise LayoutError("slot collision: slot already written")
    y_draft[cols] = np.where(put_u[:, None], np.array(scheme.u), np.array(scheme.v))
    return y_draft


@dataclass(frozen=True)
class SigmaRecovery:
    sigma: SigmaBits
    f_hat: Fraction
    distance: Fraction
    margin: Fraction
    tolerance: Fraction
    u_slots: int
    markers: int


def recover_sigma(y, I1, scheme: MarkerScheme, tol=None) -> SigmaRecovery:
    """Nearest-codeword decoding of the observed ``u`` density.

    ``tol`` defaults to :func:`default_tolerance`; a margin below ``2 * tol``
    raises :class:`AmbiguousDensityError`.
    """
    y = np.asarray(y, dtype=np.int64)
    I1 = np.asarray(I1, dtype=np.int64)
    if not len(I1):
        raise InputError("no marker occurrences")
    cols = (I1 + scheme.slot_offset())[:, None] + np.arange(scheme.M)
    if cols.min() < 0 or cols.max() >= len(y):
        raise InputError("slot outside the sample")
    rows = y[cols]
    n_u = int(np.all(rows == np.array(scheme.u), axis=1).sum())
    f_hat = Fraction(n_u, len(I1))
    tol = default_tolerance(len(I1)) if tol is None else Fraction(tol)
    bits, d1, d2 = nearest_codeword(f_hat, scheme.n_max)
    margin = d2 - d1
    if margin < 2 * tol:
        raise AmbiguousDensityError(
            f"density {float(f_hat):.6g} is ambiguous: margin {float(margin):.3g} < "
            f"2 x tolerance {float(tol):.3g}")
    return SigmaRecovery(SigmaBits(bits), f_hat, d1, margin, tol, n_u, len(I1))


@dataclass(frozen=True)
class SweepCase:
    sigma: SigmaBits
    recovered: SigmaBits
    f_hat: Fraction
    margin: Fraction


def synthetic_scheme(n_max: int, markers: int, M: int = 2, seed: int = 0):
    """A marker layout with ``markers`` anchors and families at their nominal sizes.

    Occurrence ``k`` sits at ``k * stride``; family ``n`` receives
    ``round(2**-(n*n) * markers)`` occurrences chosen by a seeded shuffle.
    Returns ``(scheme, I1, membership, length)``.
    """
    from .measures import SplitMix64
    weights = nominal_weights(n_max)
    sizes = [round(w * markers) for w in weights]
    if sum(sizes) > markers:
        raise InputError("too few markers for the nominal families")
    w = (0,) * 3
    u, v = (1,) * M, (2,) * M
    stride = len(w) + 4 * M + 1
    I1 = np.arange(markers, dtype=np.int64) * stride + M
    order = np.argsort(SplitMix64(seed).raw(markers), kind="stable")
    membership = np.zeros(markers, dtype=np.int64)
    pos = 0
    for n, size in enumerate(sizes, 1):
        membership[order[pos:pos + size]] = n
        pos += size
    ratios = tuple(Fraction(s, markers) for s in sizes)
    fams = tuple(((n,),) for n in range(1, n_max + 1))
    scheme = MarkerScheme(w, u, v, M, (0,), 0, 1.0, 0.5, fams, 1, n_max, ratios)
    return scheme, I1, membership, markers * stride


def sigma_sweep(n_max: int, markers: int = 10_000, seed: int = 0):
    """Encode and recover every ``sigma`` in ``{0,1}**n_max`` on a synthetic layout."""
    scheme, I1, membership, length = synthetic_scheme(n_max, markers, seed=seed)
    cases = []
    for bits in itertools.product((0, 1), repeat=n_max):
        y = np.full(length, -1, dtype=np.int64)
        sigma = SigmaBits(bits)
        encode_sigma(y, I1, membership, sigma, scheme)
        rec = recover_sigma(y, I1, scheme)
        cases.append(SweepCase(sigma, rec.sigma, rec.f_hat, rec.margin))
    return scheme, cases
