"""Marker embedding of a low-entropy sample into a mixing SFT, and its decoder.

Layout around every anchor occurrence ``i`` (all lengths in symbols)::

    [i-M, i-1]            pre-fill   (Y' path into a vertex above source(w[0]))
    [i, i+len_w-1]        the marker w
    [i+len_w, +M-1]       mid-fill   (Y' path from a vertex above target(w[-1]) to v0)
    [i+len_w+M, +M-1]     u/v slot   (anchored v0 -> v0 paths)
    [i+len_w+2M, +M]      trailing fill (v0 back into the codeword stream)

Every other index carries the codeword stream ``y'``. Between two markers
the output is one continuous path of ``Y' = Y_w``, so ``w`` occurs exactly at
the anchors.
"""
from __future__ import annotations

import io
import math
from contextlib import contextmanager
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .channel import (MarkerScheme, SigmaBits, choose_U_family, default_tolerance,
                      encode_sigma, recover_sigma, separation_check)
from .errors import (CorruptionError, EmbeddingError, EntropyGapError, EntropyOverflowError,
                     GranularityError,
                     InputError, LayoutError, NoConnectorError, NoMarkerAnchorError,
                     PreconditionError, PsiMismatchError)
from .finitary import (FinitaryCode, ParseError, build_code, code_digest, deserialize_psi,
                       digest_bits, pack_varints, read_ints, read_varint, serialize_psi,
                       unpack_varints, unzigzag,
                       write_ints, write_varint, zigzag)
from .induced import (abramov_check, block_frequencies, choose_block_a, compute_N, index_sets,
                      itinerary, occurrences, reconstruct_from_itinerary, window_width)
from .measures import (EDGE, PLUGIN, ContextCounts, SymbolicSample,
                       markov_sample, sample_entropy, source_sample)
from .sft import (Sft, connecting_path, count_paths, entropy, find_marker, is_mixing,
                  iter_paths, transition_length)


@dataclass(frozen=True)
class Config:
    """Pipeline parameters. ``L=None`` picks the smallest block length that fits."""

    t: float = 0.35
    k: int = 3
    n_max: int = 3
    K: int | None = None
    L: int | None = None
    L_max: int = 64
    min_markers: int = 2000
    seed: int = 1
    marker_max_len: int = 8
    a_max_len: int = 256
    ext_lens: tuple = (8, 12, 16, 24, 32)
    sigma_tol: float | None = None
    estimator: str = PLUGIN
    psi_path: str | None = None
    out_path: str | None = None

    def __post_init__(self):
        if not self.t > 0:
            raise InputError("t must be positive")
        if not 1 <= self.n_max <= 3:
            raise InputError("n_max must lie in 1..3")
        if self.k < 0 or self.min_markers < 1:
            raise InputError("k must be >= 0 and min_markers >= 1")
        if not self.ext_lens or min(self.ext_lens) < 1:
            raise InputError("ext_lens must be positive")
        paths = [p for p in (self.psi_path, self.out_path) if p is not None]
        if len(set(paths)) != len(paths):
            raise InputError("all paths must be distinct")


@contextmanager
def _stage(name):
    try:
        yield
    except EmbeddingError as exc:
        if exc.stage is None:
            exc.stage = name
        raise


def base_shift(Y: Sft) -> Sft:
    """``Y`` with labels dropped, so edge indices double as output symbols."""
    if Y.alphabet == tuple(e.id for e in Y.edges):
        return Y
    key = "base"
    if key not in Y._cache:
        Y._cache[key] = Sft(Y.vertices, [(e.id, e.source, e.target) for e in Y.edges])
    return Y._cache[key]


# -- geometry: everything derived from (Y, t) alone ------------------------------
@dataclass(frozen=True, eq=False)
class Geometry:
    Y: Sft
    Yp: Sft
    w: tuple
    h_prime: float
    M: int
    u_path: tuple
    v_path: tuple
    pre_anchor: int
    post_anchor: int
    v0: int = 0

    @property
    def u(self):
        return tuple(self.Yp.labels[list(self.u_path)].tolist())

    @property
    def v(self):
        return tuple(self.Yp.labels[list(self.v_path)].tolist())

    def conn(self, s: int, t: int, m: int) -> np.ndarray:
        return self.Yp.labels[list(connecting_path(self.Yp, s, t, m))]


def geometry(Y: Sft, t: float, marker_max_len: int = 8) -> Geometry:
    """Marker ``w``, ``Y' = Y_w``, ``M``, slot words ``u, v`` and the fill anchors."""
    Y = base_shift(Y)
    key = ("geometry", float(t), marker_max_len)
    if key in Y._cache:
        return Y._cache[key]
    if Y.is_empty or not is_mixing(Y):
        raise PreconditionError("target shift must be nonempty and mixing")
    word, Yp = find_marker(Y, t, marker_max_len)
    w = tuple(int(i) for i in Y.indices(word.symbols))
    M = transition_length(Yp)
    slots = iter_paths(Yp, 0, 0, M)
    uv = [p for _, p in zip(range(2), slots)]
    if len(uv) < 2:
        raise NoConnectorError(f"fewer than two anchored paths of length M={M} in Y_w")
    src_w = Y.vertices[Y.src[w[0]]]
    dst_w = Y.vertices[Y.dst[w[-1]]]
    try:
        pre = Yp.parent_vertex.index(src_w)
        post = Yp.parent_vertex.index(dst_w)
    except ValueError:
        raise NoConnectorError("Y_w has no vertex above an endpoint of w") from None
    g = Geometry(Y, Yp, w, entropy(Yp), M, uv[0], uv[1], pre, post)
    Y._cache[key] = g
    return g


# -- artifact scheme blob ----------------------------------------------------------
@dataclass(frozen=True, eq=False)
class Layout:
    """Pipeline bookkeeping stored alongside the code in the psi artifact."""

    scheme: MarkerScheme
    W_it: int
    table: np.ndarray
    n_x: int
    base_index: int
    interior: range
    tail: tuple

    def to_bytes(self) -> bytes:
        buf = io.BytesIO()
        blob = self.scheme.to_bytes()
        write_varint(buf, len(blob))
        buf.write(blob)
        for v in (self.W_it, self.n_x):
            write_varint(buf, v)
        write_varint(buf, len(self.table))
        buf.write(pack_varints(self.table))
        for v in (self.base_index, self.interior.start, self.interior.stop):
            write_varint(buf, zigzag(v))
        write_ints(buf, self.tail)
        return buf.getvalue()

    @classmethod
    def from_bytes(cls, data: bytes):
        buf = io.BytesIO(data)
        n = read_varint(buf)
        scheme = MarkerScheme.from_bytes(io.BytesIO(buf.read(n)))
        W_it, n_x = read_varint(buf), read_varint(buf)
        rows = read_varint(buf)
        table = unpack_varints(buf, rows * W_it).reshape(rows, W_it)
        base, lo, hi = (unzigzag(read_varint(buf)) for _ in range(3))
        tail = read_ints(buf)
        if buf.read(1):
            raise ParseError("trailing bytes in layout section")
        return cls(scheme, W_it, table, n_x, base, range(lo, hi), tail)


@dataclass(frozen=True, eq=False)
class EmbeddingResult:
    y: SymbolicSample
    psi_artifact: bytes
    scheme: MarkerScheme
    idx: object
    interior: range
    code: FinitaryCode = None
    sigma: SigmaBits = None
    diagnostics: dict = field(default_factory=dict)


# -- layout ----------------------------------------------------------------------
def _retained_anchors(x: SymbolicSample, a, g: Geometry, W_it: int, ext_max: int) -> np.ndarray:
    n = len(x)
    R = n - W_it + 1
    ell, M = len(g.w), g.M
    i = occurrences(x, a) - x.base_index
    keep = (i - M - 1 >= 0) & (i + ell + 3 * M <= R - 2) & (i + len(a) + ext_max <= n)
    return i[keep]


def _contexts(x: np.ndarray, I1: np.ndarray, a_len: int, e: int) -> np.ndarray:
    return x[(I1 + a_len)[:, None] + np.arange(e)]


def _context_table(ctx: np.ndarray, a, e: int) -> ContextCounts:
    rows, counts = np.unique(ctx, axis=0, return_counts=True) if len(ctx) else ([], [])
    return ContextCounts(tuple(a), e, {tuple(r): int(c) for r, c in
                                       zip(np.asarray(rows).tolist(), np.asarray(counts).tolist())})


def _pad(codes: np.ndarray, L: int) -> np.ndarray:
    r = (-len(codes)) % L
    return np.concatenate([codes, np.zeros(r, dtype=np.int64)]) if r else codes


def _layout(g: Geometry, code: FinitaryCode, scheme: MarkerScheme, idx, R: int,
            padded: np.ndarray, membership: np.ndarray, sigma: SigmaBits) -> np.ndarray:
    """Write every output symbol; see the module docstring for the offsets."""
    L = code.L
    ell, M = len(g.w), g.M
    I1, I2 = idx.I1, idx.I2
    y = np.full(R, -1, dtype=np.int64)
    blocks = padded.reshape(-1, L)
    ci = np.array([code._enc[tuple(b)] for b in blocks.tolist()], dtype=np.int64)
    cw = np.array(code.codewords, dtype=np.int64).reshape(len(code), L)
    stream = cw[ci].ravel()
    y[I2] = stream[:len(I2)]
    if len(I1):
        starts = np.array([code.path_vertices(k)[:-1] for k in range(len(code))],
                          dtype=np.int64).reshape(len(code), L)
        vert = np.append(starts[ci].ravel(), code.anchor)
        c = vert[np.searchsorted(I2, I1)]
        nv = g.Yp.num_vertices
        pre = np.zeros((nv, M), dtype=np.int64)
        trail = np.zeros((nv, M + 1), dtype=np.int64)
        for vtx in np.unique(c).tolist():
            pre[vtx] = g.conn(vtx, g.pre_anchor, M)
            trail[vtx] = g.conn(g.v0, vtx, M + 1)
        mid = g.conn(g.post_anchor, g.v0, M)

        def put(offset, width, values):
            cols = (I1 + offset)[:, None] + np.arange(width)
            if cols.min() < 0 or cols.max() >= R or (y[cols] != -1).any():
                raise LayoutError("layout regions overlap or leave the window")
            y[cols] = values

        put(-M, M, pre[c])
        put(0, ell, np.array(g.w))
        put(ell, M, mid)
        encode_sigma(y, I1, membership, sigma, scheme)
        put(ell + 2 * M, M + 1, trail[c])
    if (y == -1).any():
        raise LayoutError(f"unfilled output index {int(np.flatnonzero(y == -1)[0])}")
    return y


def _choose_L(g: Geometry, codes: np.ndarray, config: Config):
    lo = max(2 * g.M, 1)
    cands = [config.L] if config.L else range(lo, config.L_max + 1)
    last = None
    for L in cands:
        padded = _pad(codes, L)
        blocks, counts, _ = block_frequencies(source_sample(padded), L)
        cap = count_paths(g.Yp, g.v0, g.v0, L)
        if len(blocks) <= cap:
            return L, padded, {tuple(b): int(c) for b, c in zip(blocks.tolist(), counts.tolist())}
        last = (len(blocks), cap)
    raise EntropyOverflowError(
        f"no block length up to {config.L_max} fits: {last[0]} blocks, {last[1]} codewords",
        needed=last[0], available=last[1])


def encode(x: SymbolicSample, Y: Sft, t: float, config: Config | None = None) -> EmbeddingResult:
    """Embed ``x`` into ``Y``; see the module docstring for the output layout."""
    config = config or Config(t=t)
    if x.alphabet_kind != "source":
        raise InputError("encode expects a source-alphabet sample")
    Y = base_shift(Y)
    with _stage("entropy"):
        if Y.is_empty or not is_mixing(Y):
            raise PreconditionError("target shift must be nonempty and mixing")
        h_x = sample_entropy(x, config.k) if len(x) > config.k else 0.0
        h_Y = entropy(Y)
        if not h_x < t < h_Y:
            raise EntropyGapError(f"need h(x) < t < h(Y): {h_x:.6f}, {t}, {h_Y:.6f}")
    with _stage("marker"):
        g = geometry(Y, t, config.marker_max_len)
    ell, M = len(g.w), g.M
    W = window_width(ell, M)
    W_it = W + 1
    n = len(x)
    R = n - W_it + 1
    with _stage("anchor"):
        N = compute_N(g.h_prime, t, ell, M)
        if R < 1:
            raise NoMarkerAnchorError(f"sample length {n} is shorter than the block width {W_it}")
        a = choose_block_a(x, N, config.a_max_len, min_count=config.min_markers)
        I1 = _retained_anchors(x, a, g, W_it, max(config.ext_lens))
        if len(I1) < config.min_markers:
            raise NoMarkerAnchorError(
                f"only {len(I1)} usable anchors of a, need {config.min_markers}")
        idx = index_sets(I1 + x.base_index, range(x.base_index, x.base_index + R), ell, M)
        idx_local = index_sets(I1, range(R), ell, M)
    with _stage("itinerary"):
        xp, table = itinerary(source_sample(x.symbols), idx_local, W_it)
        codes = xp.symbols
    with _stage("code"):
        L, padded, freq = _choose_L(g, codes, config)
        code = build_code(g.Yp, freq, L)
        sigma = SigmaBits(digest_bits(code_digest(code), config.n_max))
    with _stage("channel"):
        tol = default_tolerance(len(I1)) if config.sigma_tol is None else config.sigma_tol
        fams = ratios = ctx = None
        last_err = None
        for e in config.ext_lens:
            ctx = _contexts(x.symbols, I1, len(a), e)
            try:
                fams, ratios = choose_U_family(_context_table(ctx, a, e), a, config.n_max, e)
            except GranularityError as exc:
                last_err = exc
                continue
            if separation_check(ratios, config.n_max, tol).ok:
                break
            last_err = GranularityError(f"realized weights at ext_len={e} are not separable")
            fams = None
        if fams is None:
            raise last_err
        scheme = MarkerScheme(g.w, g.u, g.v, M, tuple(a), N, g.h_prime, float(t), fams, e,
                              config.n_max, ratios, config.marker_max_len)
        membership = scheme.membership(ctx.tolist())
    with _stage("layout"):
        y = _layout(g, code, scheme, idx_local, R, padded, membership, sigma)
    margin = N + W
    interior = range(x.base_index + margin, x.base_index + max(margin, n - margin))
    q = len(codes) // L
    layout = Layout(scheme, W_it, table, n, x.base_index, interior,
                    tuple(padded[q * L:].tolist()) if len(codes) % L else ())
    psi = serialize_psi(code, idx, layout.to_bytes())
    out = SymbolicSample(y, x.base_index, EDGE, Y.alphabet)
    diag = {"h_x": h_x, "h_Y": h_Y, "h_prime": g.h_prime, "L": L, "markers": len(I1),
            "mu_A": idx.mu_A, "codes": len(table), "blocks": len(code), "ext_len": e,
            "R": R, "W": W}
    return EmbeddingResult(out, psi, scheme, idx, interior, code, sigma, diag)


# -- decoding ----------------------------------------------------------------------
@dataclass(frozen=True, eq=False)
class DecodeReport:
    x_hat: SymbolicSample
    interior: range
    sigma: SigmaBits
    recovery: object
    I1: np.ndarray
    scheme: MarkerScheme


def _first_inadmissible(Y: Sft, y: np.ndarray) -> int:
    if len(y) and (y.max() >= Y.num_edges):
        return int(np.flatnonzero(y >= Y.num_edges)[0])
    bad = np.flatnonzero(Y.dst[y[:-1]] != Y.src[y[1:]])
    return int(bad[0]) + 1 if len(bad) else -1


def decode_report(y: SymbolicSample, Y: Sft, t: float, psi_artifact: bytes,
                  config: Config | None = None) -> DecodeReport:
    """Full decoder with intermediate results; :func:`decode` returns only ``x_hat``."""
    config = config or Config(t=t)
    Y = base_shift(Y)
    ys = y.symbols
    with _stage("marker"):
        g = geometry(Y, t, config.marker_max_len)
    with _stage("artifact"):
        code0, idx0, blob = deserialize_psi(psi_artifact, g.Yp)
        lay = Layout.from_bytes(blob)
        sch = lay.scheme
        if (g.w, g.u, g.v, g.M) != (sch.w, sch.u, sch.v, sch.M):
            raise PsiMismatchError("artifact was built for a different marker scheme")
    R = lay.n_x - lay.W_it + 1
    if len(ys) != R or y.base_index != lay.base_index:
        raise PsiMismatchError(f"output window (len {len(ys)}) differs from the artifact's ({R})")
    with _stage("scan"):
        bad = _first_inadmissible(Y, ys)
        if bad >= 0:
            raise CorruptionError(f"inadmissible transition at offset {y.base_index + bad}",
                                  offset=y.base_index + bad)
        I1 = kernels.find_occurrences(ys, np.array(sch.w, dtype=np.int64))
        if len(I1) > 1 and (np.diff(I1) < len(sch.w)).any():
            k = int(np.flatnonzero(np.diff(I1) < len(sch.w))[0])
            raise CorruptionError("overlapping marker occurrences", offset=y.base_index + int(I1[k + 1]))
    with _stage("sigma"):
        rec = recover_sigma(ys, I1, sch, config.sigma_tol)
        expect = digest_bits(code_digest(code0), sch.n_max)
        if rec.sigma.bits != expect:
            raise PsiMismatchError(f"recovered digest bits {rec.sigma} != artifact {''.join(map(str, expect))}")
    with _stage("index"):
        stored = idx0.I1 - lay.base_index
        if not np.array_equal(I1, stored):
            diff = np.setxor1d(I1, stored)
            if len(diff) <= 2:
                raise CorruptionError("marker set differs from the artifact",
                                      offset=y.base_index + int(diff[0]))
            raise PsiMismatchError("marker set differs from the artifact")
        idx = index_sets(I1, range(R), len(sch.w), sch.M)
    with _stage("blocks"):
        L = code0.L
        seg = ys[idx.I2]
        q = len(seg) // L
        out = np.empty(len(seg), dtype=np.int64)
        for k, row in enumerate(seg[:q * L].reshape(-1, L).tolist()):
            j = code0._dec.get(tuple(row))
            if j is None:
                off = y.base_index + int(idx.I2[k * L])
                raise CorruptionError(f"unknown codeword at offset {off}", offset=off)
            out[k * L:(k + 1) * L] = code0.inputs[j]
        r = len(seg) - q * L
        if r:
            cw = code0.codeword_of(lay.tail)
            if tuple(seg[q * L:].tolist()) != cw[:r]:
                off = y.base_index + int(idx.I2[q * L])
                raise CorruptionError(f"final partial codeword mismatch at offset {off}", offset=off)
            out[q * L:] = lay.tail[:r]
    with _stage("reconstruct"):
        try:
            xh, covered = reconstruct_from_itinerary(source_sample(out), lay.table, idx, lay.W_it)
        except CorruptionError as exc:
            off = y.base_index + exc.offset
            raise CorruptionError(f"itinerary blocks disagree at index {off}", offset=off) from None
        if xh.base_index != 0 or len(xh) != lay.n_x or not covered.all():
            raise CorruptionError("reconstruction does not cover the window", offset=y.base_index)
    with _stage("verify"):
        ctx = _contexts(xh.symbols, I1, len(sch.a), sch.ext_len)
        membership = sch.membership(ctx.tolist())
        padded = np.concatenate([out[:q * L], lay.tail]) if r else out
        y2 = _layout(g, code0, sch, idx, R, padded, membership, rec.sigma)
        diff = np.flatnonzero(y2 != ys)
        if len(diff):
            off = y.base_index + int(diff[0])
            raise CorruptionError(f"re-encoding disagrees at offset {off}", offset=off)
    x_hat = source_sample(xh.symbols, lay.base_index)
    return DecodeReport(x_hat, lay.interior, rec.sigma, rec, I1 + y.base_index, sch)


def decode(y: SymbolicSample, Y: Sft, t: float, psi_artifact: bytes,
           config: Config | None = None) -> SymbolicSample:
    """Recover the source symbols on the interior window."""
    rep = decode_report(y, Y, t, psi_artifact, config)
    return rep.x_hat.window(rep.interior.start, rep.interior.stop)


# -- separation experiment ---------------------------------------------------------
@dataclass(frozen=True)
class SeparationTrial:
    seed: int
    a: tuple
    mu_a: tuple
    digest: tuple
    identified_apart: bool
    own_ok: tuple
    cross_rejected: tuple


@dataclass(frozen=True)
class SeparationReport:
    trials: tuple

    @property
    def ok(self):
        return all(tr.identified_apart and all(tr.own_ok) and all(tr.cross_rejected)
                   for tr in self.trials)


def _exact_on_interior(x: SymbolicSample, xh: SymbolicSample) -> bool:
    lo, hi = xh.base_index, xh.base_index + len(xh)
    return np.array_equal(x.window(lo, hi).symbols, xh.symbols)


def separation_experiment(sources, Y: Sft, t: float, length: int, seeds,
                          config: Config | None = None) -> SeparationReport:
    """Encode samples of two sources and check that their images stay apart."""
    config = config or Config(t=t)
    A, B = sources
    rows = []
    for seed in seeds:
        xs = [markov_sample(A, length, seed), markov_sample(B, length, seed)]
        res = [encode(x, Y, t, config) for x in xs]
        mu = tuple(len(occurrences(x, r.scheme.a)) / (len(x) - len(r.scheme.a) + 1)
                   for x, r in zip(xs, res))
        dig = tuple(code_digest(r.code).hex() for r in res)
        apart = (res[0].scheme.a != res[1].scheme.a or abs(mu[0] - mu[1]) > 3 / math.sqrt(length)
                 or dig[0] != dig[1])
        own = tuple(_exact_on_interior(x, decode(r.y, Y, t, r.psi_artifact, config))
                    for x, r in zip(xs, res))
        cross = []
        for j in (0, 1):
            x, other = xs[j], res[1 - j]
            try:
                xh = decode(res[j].y, Y, t, other.psi_artifact, config)
                cross.append(not _exact_on_interior(x, xh))
            except EmbeddingError:
                cross.append(True)
        rows.append(SeparationTrial(int(seed), tuple(r.scheme.a for r in res), mu, dig,
                                    bool(apart), own, tuple(cross)))
    return SeparationReport(tuple(rows))


def roundtrip(x: SymbolicSample, Y: Sft, t: float, config: Config | None = None):
    """Encode then decode; returns ``(result, decode_report, mismatches)`` on the interior."""
    res = encode(x, Y, t, config)
    rep = decode_report(res.y, Y, t, res.psi_artifact, config)
    lo, hi = rep.interior.start, rep.interior.stop
    mism = int(np.count_nonzero(x.window(lo, hi).symbols != rep.x_hat.window(lo, hi).symbols))
    return res, rep, mism


# -- independent checks used by reports ----------------------------------------------
def marker_purity(y: SymbolicSample, w, I1, interior: range) -> bool:
    """Occurrences of ``w`` inside ``interior`` are exactly the anchors there."""
    occ = kernels.find_occurrences(y.symbols, np.asarray(w, dtype=np.int64)) + y.base_index
    lo, hi = interior.start, interior.stop
    inside = occ[(occ >= lo) & (occ + len(w) <= hi)]
    I1 = np.asarray(I1, dtype=np.int64)
    return np.array_equal(inside, I1[(I1 >= lo) & (I1 + len(w) <= hi)])


def admissible_on(y: SymbolicSample, Y: Sft, interior: range) -> bool:
    Y = base_shift(Y)
    lo = max(interior.start, y.base_index) - y.base_index
    hi = min(interior.stop, y.base_index + len(y)) - y.base_index
    return _first_inadmissible(Y, y.symbols[lo:hi]) < 0


def abramov_for(x: SymbolicSample, result: EmbeddingResult, k: int = 3, estimator: str = PLUGIN):
    """Abramov comparison on the itinerary the encoder actually used."""
    idx = result.idx
    local = index_sets(idx.I1 - x.base_index, range(len(idx.span)), idx.len_w, idx.M)
    return abramov_check(source_sample(x.symbols), local, k, W=idx.W + 1, estimator=estimator)
