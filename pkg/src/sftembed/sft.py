"""Shifts of finite type presented as edge shifts on finite directed multigraphs.

An :class:`Sft` is the set of bi-infinite edge paths through its graph. Every
edge carries a *label*, an edge id of a base shift: for a shift parsed from a
file the label is the edge itself, for a restriction ``Y_w`` (built on the
higher-block presentation) it is the last base edge of the window the edge
stands for. Label sequences of paths are therefore words of the base shift.

Edges and vertices are kept in a canonical order; every "lexicographic"
statement below refers to that order (natural order of ids for parsed
shifts, window order for derived ones).
"""
from __future__ import annotations

import hashlib
import itertools
import math
import re
from dataclasses import dataclass
from functools import reduce

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .errors import (InputError, MarkerNotFoundError, NoConnectorError,
                     ParseError, PreconditionError)

POWER_TOL = 1e-14
POWER_MAX_ITER = 10**6


def natural_key(token: str):
    """Sort key comparing runs of digits numerically, so ``e2`` sorts before ``e10``."""
    parts = re.split(r"(\d+)", token)
    return tuple((0, int(p), p) if p.isdigit() else (1, 0, p) for p in parts if p), token


@dataclass(frozen=True)
class Edge:
    id: str
    source: str
    target: str
    label: str


@dataclass(frozen=True)
class Word:
    """A finite block of edge ids, with admissibility cached at creation."""

    symbols: tuple
    admissible: bool = True

    def __len__(self):
        return len(self.symbols)

    def __iter__(self):
        return iter(self.symbols)

    def __str__(self):
        if all(len(s) == 1 for s in self.symbols):
            return "".join(self.symbols)
        return " ".join(self.symbols)


class Sft:
    """Edge shift of a finite directed multigraph, trimmed to its essential part.

    ``edges`` is an iterable of ``(id, source, target)`` or
    ``(id, source, target, label)`` tuples. ``alphabet`` is the label
    alphabet; it defaults to the edge ids, which makes the shift its own base.
    Construction removes, repeatedly, every vertex without incoming or
    outgoing edges; the result may be empty.
    """

    def __init__(self, vertices, edges, alphabet=None, parent_vertex=None):
        vertices = list(vertices)
        if len(set(vertices)) != len(vertices):
            raise InputError("duplicate vertex ids")
        vset = set(vertices)
        recs = []
        seen = set()
        for e in edges:
            if len(e) == 3:
                eid, s, t = e
                lab = eid
            else:
                eid, s, t, lab = e
            if eid in seen:
                raise InputError(f"duplicate edge id {eid!r}")
            if s not in vset or t not in vset:
                raise InputError(f"edge {eid!r} references an unknown vertex")
            seen.add(eid)
            recs.append(Edge(eid, s, t, lab))
        if alphabet is None:
            alphabet = tuple(r.id for r in recs)
        self.alphabet = tuple(alphabet)
        self._label_pos = {a: i for i, a in enumerate(self.alphabet)}
        for r in recs:
            if r.label not in self._label_pos:
                raise InputError(f"edge {r.id!r} has label {r.label!r} outside the alphabet")

        # trim to the essential part
        alive_v = set(vertices)
        alive_e = list(recs)
        while True:
            outs = {r.source for r in alive_e}
            ins = {r.target for r in alive_e}
            keep = {v for v in alive_v if v in outs and v in ins}
            kept_e = [r for r in alive_e if r.source in keep and r.target in keep]
            if keep == alive_v and len(kept_e) == len(alive_e):
                break
            alive_v, alive_e = keep, kept_e

        self.vertices = tuple(v for v in vertices if v in alive_v)
        self.edges = tuple(alive_e)
        self.vertex_index = {v: i for i, v in enumerate(self.vertices)}
        self.edge_index = {r.id: i for i, r in enumerate(self.edges)}
        self.src = np.array([self.vertex_index[r.source] for r in self.edges], dtype=np.int64)
        self.dst = np.array([self.vertex_index[r.target] for r in self.edges], dtype=np.int64)
        self.labels = np.array([self._label_pos[r.label] for r in self.edges], dtype=np.int64)
        pv = parent_vertex or {}
        self.parent_vertex = tuple(pv.get(v, v) for v in self.vertices)
        n = len(self.vertices)
        self.out_edges = [[] for _ in range(n)]
        for i, r in enumerate(self.edges):
            self.out_edges[self.src[i]].append(i)
        self._cache = {}

    # -- basic views ------------------------------------------------------
    @property
    def is_empty(self):
        return not self.vertices

    @property
    def num_vertices(self):
        return len(self.vertices)

    @property
    def num_edges(self):
        return len(self.edges)

    def adjacency(self):
        """Vertex adjacency matrix counting parallel edges."""
        n = self.num_vertices
        a = np.zeros((n, n), dtype=np.int64)
        np.add.at(a, (self.src, self.dst), 1)
        return a

    def word(self, spec) -> Word:
        """Coerce ``spec`` to a :class:`Word` of this shift's edge ids.

        Accepts a Word, a sequence of ids, or a string: whitespace-separated
        ids, a single id, or (when every id is one character) a run of ids.
        """
        syms = _split_word(self, spec)
        idx = self.indices(syms)
        ok = bool(np.all(self.dst[idx[:-1]] == self.src[idx[1:]])) if len(idx) else True
        return Word(tuple(syms), ok)

    def indices(self, symbols):
        try:
            return np.array([self.edge_index[s] for s in symbols], dtype=np.int64)
        except KeyError as exc:
            raise InputError(f"unknown edge id {exc.args[0]!r}") from None

    def labels_of(self, edge_indices):
        return self.labels[np.asarray(edge_indices, dtype=np.int64)]

    def digest(self) -> bytes:
        return hashlib.sha256(format_sft(self, labels=True).encode()).digest()

    def __repr__(self):
        return f"Sft({self.num_vertices} vertices, {self.num_edges} edges)"


def _split_word(sft, spec):
    if isinstance(spec, Word):
        return list(spec.symbols)
    if isinstance(spec, str):
        if any(c.isspace() for c in spec):
            return spec.split()
        if spec in sft.edge_index:
            return [spec]
        return list(spec)
    return [str(s) for s in spec]


# -- construction helpers ---------------------------------------------------
def full_shift(k: int) -> Sft:
    """One vertex with ``k`` self-loops labelled ``0..k-1``."""
    return Sft(["0"], [(str(i), "0", "0") for i in range(k)])


def golden_mean() -> Sft:
    """Vertices p, q; edges e0: p->p, e1: p->q, e2: q->p."""
    return Sft(["p", "q"], [("e0", "p", "p"), ("e1", "p", "q"), ("e2", "q", "p")])


def parse_sft(text: str) -> Sft:
    """Parse the line format ``sft <nv> <ne>`` / ``edge <id> <src> <dst> [label]``."""
    lines = [ln.split("#", 1)[0].strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln]
    if not lines:
        raise ParseError("empty SFT file")
    head = lines[0].split()
    if len(head) != 3 or head[0] != "sft":
        raise ParseError("expected header 'sft <num_vertices> <num_edges>'")
    try:
        nv, ne = int(head[1]), int(head[2])
    except ValueError:
        raise ParseError("header counts must be integers") from None
    edges = []
    ids = set()
    for ln in lines[1:]:
        tok = ln.split()
        if tok[0] != "edge" or len(tok) not in (4, 5):
            raise ParseError(f"bad edge line: {ln!r}")
        if tok[1] in ids:
            raise ParseError(f"duplicate edge id {tok[1]!r}")
        ids.add(tok[1])
        edges.append(tuple(tok[1:]))
    if len(edges) != ne:
        raise ParseError(f"header declares {ne} edges, found {len(edges)}")
    verts = sorted({e[1] for e in edges} | {e[2] for e in edges}, key=natural_key)
    if len(verts) != nv:
        raise ParseError(f"header declares {nv} vertices, edges mention {len(verts)} (dangling vertex)")
    edges.sort(key=lambda e: natural_key(e[0]))
    alphabet = None
    if any(len(e) == 4 for e in edges):
        alphabet = sorted({e[3] if len(e) == 4 else e[0] for e in edges}, key=natural_key)
    try:
        return Sft(verts, edges, alphabet=alphabet)
    except InputError as exc:
        raise ParseError(str(exc.args[0])) from None


def format_sft(sft: Sft, labels: bool = False) -> str:
    out = [f"sft {sft.num_vertices} {sft.num_edges}"]
    for r in sft.edges:
        extra = f" {r.label}" if labels and r.label != r.id else ""
        out.append(f"edge {r.id} {r.source} {r.target}{extra}")
    return "\n".join(out) + "\n"


# -- operations ---------------------------------------------------------------
def is_admissible(sft: Sft, word) -> bool:
    """True iff consecutive edges of ``word`` compose."""
    syms = _split_word(sft, word)
    if not syms:
        raise InputError("word must be nonempty")
    idx = sft.indices(syms)
    return bool(np.all(sft.dst[idx[:-1]] == sft.src[idx[1:]]))


def _require_nonempty(sft):
    if sft.is_empty:
        raise InputError("empty shift")


def _components(sft):
    if "scc" not in sft._cache:
        n = sft.num_vertices
        g = csr_matrix((np.ones(sft.num_edges), (sft.src, sft.dst)), shape=(n, n))
        sft._cache["scc"] = connected_components(g, directed=True, connection="strong")
    return sft._cache["scc"]


def period(sft: Sft) -> int:
    """gcd of cycle lengths of a strongly connected shift."""
    n = sft.num_vertices
    level = [-1] * n
    level[0] = 0
    frontier = [0]
    while frontier:
        nxt = []
        for v in frontier:
            for e in sft.out_edges[v]:
                u = sft.dst[e]
                if level[u] < 0:
                    level[u] = level[v] + 1
                    nxt.append(u)
        frontier = nxt
    diffs = (abs(level[sft.src[e]] + 1 - level[sft.dst[e]]) for e in range(sft.num_edges))
    return reduce(math.gcd, diffs, 0)


def is_mixing(sft: Sft) -> bool:
    """Strongly connected and aperiodic."""
    _require_nonempty(sft)
    ncomp, _ = _components(sft)
    return ncomp == 1 and period(sft) == 1


def _perron_root(a: np.ndarray) -> float:
    """Spectral radius of an irreducible nonnegative matrix.

    Power iteration on ``a + I`` (aperiodic, same Perron vector) stopped by
    the Collatz-Wielandt bracket ``min (Ax)_i/x_i <= rho <= max (Ax)_i/x_i``.
    """
    n = a.shape[0]
    if n == 1:
        return float(a[0, 0])
    m = csr_matrix(a.astype(np.float64))
    x = np.ones(n)
    for _ in range(POWER_MAX_ITER):
        ax = m @ x
        r = ax / x
        lo, hi = r.min(), r.max()
        if hi - lo <= POWER_TOL * hi:
            return float(0.5 * (lo + hi))
        x = ax + x
        x /= x.max()
    return float(np.max(np.abs(np.linalg.eigvals(a.astype(np.float64)))))


def spectral_radius(sft: Sft) -> float:
    _require_nonempty(sft)
    if "rho" not in sft._cache:
        ncomp, lab = _components(sft)
        a = sft.adjacency()
        rho = 0.0
        for c in range(ncomp):
            idx = np.flatnonzero(lab == c)
            sub = a[np.ix_(idx, idx)]
            if sub.sum() == 0:
                continue
            rho = max(rho, _perron_root(sub))
        sft._cache["rho"] = rho
    return sft._cache["rho"]


def entropy(sft: Sft) -> float:
    """Topological entropy in nats: log of the adjacency spectral radius."""
    rho = spectral_radius(sft)
    return math.log(rho) if rho > 0 else 0.0


def border_table(symbols) -> list:
    """KMP failure function: ``f[i]`` is the longest proper border of ``symbols[:i+1]``."""
    f = [0] * len(symbols)
    q = 0
    for i in range(1, len(symbols)):
        while q and symbols[i] != symbols[q]:
            q = f[q - 1]
        if symbols[i] == symbols[q]:
            q += 1
        f[i] = q
    return f


def is_border_free(symbols) -> bool:
    symbols = list(symbols)
    return not symbols or border_table(symbols)[-1] == 0


def is_marker(sft: Sft, w) -> bool:
    """Admissible and border-free, hence no two occurrences can overlap."""
    word = sft.word(w)
    if not len(word) or not word.admissible:
        raise InputError(f"{word} is not an admissible word")
    return is_border_free(word.symbols)


def _paths_from(sft, v, length):
    """All edge-index paths of ``length`` starting at vertex index ``v``, in order."""
    if length == 0:
        yield ()
        return
    for e in sft.out_edges[v]:
        for rest in _paths_from(sft, sft.dst[e], length - 1):
            yield (e,) + rest


def _all_paths(sft, length):
    """Every path of ``length`` edges, in lexicographic edge order."""
    for e in range(sft.num_edges):
        for rest in _paths_from(sft, sft.dst[e], length - 1):
            yield (e,) + rest


def restrict_forbidden(sft: Sft, w) -> Sft:
    """The shift of points avoiding ``w``, on the order-``len(w)`` block presentation.

    Vertices are the admissible ``len(w)-1`` blocks (the original vertices
    when ``len(w) == 1``), edges are the admissible ``len(w)`` blocks other
    than ``w``, labelled with the label of their last edge. The result is
    trimmed and may be empty.
    """
    syms = _split_word(sft, w)
    if not syms:
        raise InputError("forbidden word must be nonempty")
    widx = tuple(int(i) for i in sft.indices(syms))
    ell = len(widx)
    alphabet = sft.alphabet
    if ell == 1:
        edges = [(r.id, r.source, r.target, r.label)
                 for i, r in enumerate(sft.edges) if i != widx[0]]
        pv = {v: pvv for v, pvv in zip(sft.vertices, sft.parent_vertex)}
        return Sft(sft.vertices, edges, alphabet=alphabet, parent_vertex=pv)

    def name(path):
        return ".".join(sft.edges[e].id for e in path)

    vpaths = list(_all_paths(sft, ell - 1))
    names = [name(p) for p in vpaths]
    if len(set(names)) != len(names):
        names = [f"b{i}" for i in range(len(vpaths))]
    vname = dict(zip(vpaths, names))
    edges = []
    used = set()
    for p in _all_paths(sft, ell):
        if p == widx:
            continue
        eid = name(p)
        if eid in used:
            eid = f"x{len(edges)}"
        used.add(eid)
        edges.append((eid, vname[p[:-1]], vname[p[1:]], sft.edges[p[-1]].label))
    pv = {vname[p]: sft.parent_vertex[sft.dst[p[-1]]] for p in vpaths}
    return Sft(names, edges, alphabet=alphabet, parent_vertex=pv)


def _bool_matrix(sft):
    return (sft.adjacency() > 0).astype(np.float64)


def transition_length(sft: Sft) -> int:
    """Least ``M`` with a path of every length ``m >= M`` between every vertex pair."""
    _require_nonempty(sft)
    if not is_mixing(sft):
        raise PreconditionError("transition length needs a mixing shift")
    if "M" in sft._cache:
        return sft._cache["M"]
    a = _bool_matrix(sft)
    n = a.shape[0]
    p = a.copy()
    m = 1
    bound = (n - 1) ** 2 + 1
    while not p.all():
        if m >= bound:  # unreachable for mixing shifts (Wielandt)
            raise PreconditionError("adjacency matrix is not primitive")
        p = ((p @ a) > 0).astype(np.float64)
        m += 1
    sft._cache["M"] = m
    return m


def _reach_table(sft, t, m):
    """``reach[k][v]``: some path of exactly ``k`` edges leads from ``v`` to ``t``."""
    a = _bool_matrix(sft)
    r = np.zeros(sft.num_vertices)
    r[t] = 1.0
    table = [r > 0]
    for _ in range(m):
        r = ((a @ r) > 0).astype(np.float64)
        table.append(r > 0)
    return table


def connecting_path(sft: Sft, s: int, t: int, m: int) -> tuple:
    """Lexicographically least edge-index path of ``m`` edges from ``s`` to ``t``."""
    if m < 1:
        raise InputError("connector length must be >= 1")
    key = ("conn", s, t, m)
    if key in sft._cache:
        return sft._cache[key]
    reach = _reach_table(sft, t, m)
    if not reach[m][s]:
        raise NoConnectorError(
            f"no path of length {m} from {sft.vertices[s]} to {sft.vertices[t]}")
    path = []
    v = s
    for step in range(m):
        left = m - step - 1
        for e in sft.out_edges[v]:
            if reach[left][sft.dst[e]]:
                path.append(e)
                v = sft.dst[e]
                break
    sft._cache[key] = tuple(path)
    return sft._cache[key]


def connecting_block(sft: Sft, s, t, m: int) -> Word:
    """Lexicographically least path of length ``m`` from vertex ``s`` to ``t``."""
    try:
        si, ti = sft.vertex_index[s], sft.vertex_index[t]
    except KeyError as exc:
        raise InputError(f"unknown vertex {exc.args[0]!r}") from None
    path = connecting_path(sft, si, ti, m)
    return Word(tuple(sft.edges[e].id for e in path), True)


def count_paths(sft: Sft, s: int, t: int, m: int) -> int:
    """Exact number of paths of ``m`` edges from vertex index ``s`` to ``t``."""
    cnt = [0] * sft.num_vertices
    cnt[t] = 1
    for _ in range(m):
        nxt = [0] * sft.num_vertices
        for e in range(sft.num_edges):
            nxt[sft.src[e]] += cnt[sft.dst[e]]
        cnt = nxt
    return cnt[s]


def iter_paths(sft: Sft, s: int, t: int, m: int):
    """Paths of ``m`` edges from ``s`` to ``t`` in lexicographic order (lazy)."""
    reach = _reach_table(sft, t, m)
    if not reach[m][s]:
        return
    path = []

    def rec(v, left):
        if left == 0:
            yield tuple(path)
            return
        for e in sft.out_edges[v]:
            if reach[left - 1][sft.dst[e]]:
                path.append(e)
                yield from rec(sft.dst[e], left - 1)
                path.pop()

    yield from rec(s, m)


def find_marker(sft: Sft, t: float, max_len: int):
    """First qualifying marker ``w`` in length-then-lexicographic order.

    ``w`` must be admissible and border-free, and ``Y_w`` must be mixing, have
    entropy above ``t`` and still use every label of ``sft``. Returns
    ``(w, Y_w)``.
    """
    _require_nonempty(sft)
    if not is_mixing(sft):
        raise PreconditionError("marker search needs a mixing shift")
    h = entropy(sft)
    if not 0 < t < h:
        raise PreconditionError(f"need 0 < t < h(Y) = {h:.6f}, got t = {t}")
    all_labels = set(sft.labels.tolist())
    best = -math.inf
    for ell in range(1, max_len + 1):
        for path in _all_paths(sft, ell):
            if not is_border_free(path):
                continue
            word = Word(tuple(sft.edges[e].id for e in path), True)
            yw = restrict_forbidden(sft, word)
            if yw.is_empty:
                continue
            hw = entropy(yw)
            best = max(best, hw)
            if hw <= t or set(yw.labels.tolist()) != all_labels:
                continue
            if is_mixing(yw):
                return word, yw
    raise MarkerNotFoundError(
        f"no marker up to length {max_len}; best entropy {best:.6f} <= t = {t}",
        best_entropy=best)


def enumerate_words(sft: Sft, max_len: int):
    """All admissible words up to ``max_len`` in length-then-lexicographic order."""
    return itertools.chain.from_iterable(
        (Word(tuple(sft.edges[e].id for e in p), True) for p in _all_paths(sft, ell))
        for ell in range(1, max_len + 1))
