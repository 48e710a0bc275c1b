"""Rate-1 anchored block code into a mixing SFT, and its serialized inverse.

Each input ``L``-block is mapped to a distinct path of ``L`` edges from the
anchor vertex ``v0`` back to ``v0`` in the target shift, so any concatenation
of codewords is a path. The code is written out as a self-delimiting byte
string (the "psi artifact"):

=========  ============================================================
magic      ``b"PSI"``
version    varint (currently 1)
L          varint
anchor     varint byte length + UTF-8 vertex id
target     32-byte SHA-256 of the target shift's canonical text
entries    varint count K, varint input length n, varint codeword length m,
           then K*n varints (input blocks, row by row) and K*m varints
           (codewords as target edge indices, row by row)
index      varint flag; when 1: zigzag span start, varint span length,
           varint len_w, varint M, varint |I1|, then |I1| zigzag deltas
           (the first relative to the span start)
scheme     varint byte length + opaque bytes
=========  ============================================================

Varints are unsigned LEB128 (little-endian base 128).
"""
from __future__ import annotations

import hashlib
import io
from dataclasses import dataclass, field

import numpy as np

from .errors import (CorruptionError, DictionaryMissError, EntropyOverflowError,
                     InputError, ParseError, PreconditionError, PsiMismatchError)
from .induced import IndexSets, index_sets
from .measures import EDGE, SOURCE, SymbolicSample
from .sft import Sft, count_paths, is_mixing, iter_paths, transition_length

MAGIC = b"PSI"
VERSION = 1


@dataclass(eq=False)
class FinitaryCode:
    target: Sft
    anchor: int
    L: int
    inputs: list
    paths: list
    _enc: dict = field(default_factory=dict, repr=False)
    _dec: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.inputs = [tuple(int(s) for s in b) for b in self.inputs]
        self.paths = [tuple(int(e) for e in p) for p in self.paths]
        self.codewords = [tuple(self.target.labels[list(p)].tolist()) for p in self.paths]
        self._enc = {b: i for i, b in enumerate(self.inputs)}
        self._dec = {c: i for i, c in enumerate(self.codewords)}
        if len(self._enc) != len(self.inputs):
            raise InputError("duplicate dictionary inputs")
        if len(self._dec) != len(self.codewords):
            raise InputError("codewords are not distinct as label sequences")

    @property
    def anchor_id(self) -> str:
        return self.target.vertices[self.anchor]

    def __len__(self):
        return len(self.inputs)

    def __eq__(self, other):
        return (isinstance(other, FinitaryCode) and self.L == other.L
                and self.anchor == other.anchor and self.inputs == other.inputs
                and self.paths == other.paths
                and self.target.digest() == other.target.digest())

    def codeword_of(self, block) -> tuple:
        try:
            return self.codewords[self._enc[tuple(int(s) for s in block)]]
        except KeyError:
            raise DictionaryMissError(f"block {tuple(block)} is not in the dictionary") from None

    def path_vertices(self, k: int) -> np.ndarray:
        """Vertices visited by codeword ``k``: ``L + 1`` entries from ``v0`` to ``v0``."""
        p = np.array(self.paths[k], dtype=np.int64)
        return np.concatenate([[self.anchor], self.target.dst[p]])


def _as_block_counts(observed):
    if isinstance(observed, dict):
        items = list(observed.items())
    else:
        items = [(o, 1) if not (isinstance(o, tuple) and len(o) == 2 and isinstance(o[0], tuple))
                 else o for o in observed]
    return [(tuple(int(s) for s in b), int(c)) for b, c in items]


def build_code(Yp: Sft, observed_blocks, L: int) -> FinitaryCode:
    """Assign anchored codewords to ``observed_blocks``, most frequent first.

    ``observed_blocks`` is a dict ``block -> frequency``, a list of
    ``(block, frequency)`` pairs, or a list of blocks (frequency 1 each).
    Codewords are the anchor-to-anchor paths of length ``L`` in lexicographic
    order, anchor = first vertex of ``Yp``.
    """
    if Yp.is_empty or not is_mixing(Yp):
        raise PreconditionError("target shift must be mixing")
    M = transition_length(Yp)
    if L < 2 * M:
        raise PreconditionError(f"block length {L} < 2 * transition length {M}")
    items = _as_block_counts(observed_blocks)
    if any(len(b) != L for b, _ in items):
        raise InputError(f"every observed block must have length {L}")
    items.sort(key=lambda bc: (-bc[1], bc[0]))
    v0 = 0
    available = count_paths(Yp, v0, v0, L)
    if len(items) > available:
        raise EntropyOverflowError(
            f"{len(items)} blocks but only {available} anchored paths of length {L}",
            needed=len(items), available=available)
    paths = []
    gen = iter_paths(Yp, v0, v0, L)
    for _ in items:
        paths.append(next(gen))
    return FinitaryCode(Yp, v0, L, [b for b, _ in items], paths)


def encode_blocks(code: FinitaryCode, x_prime: SymbolicSample) -> SymbolicSample:
    """Concatenate the codewords of the consecutive ``L``-blocks of ``x_prime``."""
    s = x_prime.symbols
    L = code.L
    if len(s) % L:
        raise InputError(f"input length {len(s)} is not a multiple of L = {L}")
    out = np.empty(len(s), dtype=np.int64)
    for k, row in enumerate(s.reshape(-1, L).tolist()):
        out[k * L:(k + 1) * L] = code.codeword_of(row)
    return SymbolicSample(out, x_prime.base_index, EDGE, code.target.alphabet)


def decode_blocks(code: FinitaryCode, y_prime: SymbolicSample) -> SymbolicSample:
    """Exact inverse of :func:`encode_blocks`."""
    s = y_prime.symbols
    L = code.L
    if len(s) % L:
        raise InputError(f"input length {len(s)} is not a multiple of L = {L}")
    out = np.empty(len(s), dtype=np.int64)
    for k, row in enumerate(s.reshape(-1, L).tolist()):
        i = code._dec.get(tuple(row))
        if i is None:
            off = y_prime.base_index + k * L
            raise CorruptionError(f"unknown codeword at offset {off}", offset=off)
        out[k * L:(k + 1) * L] = code.inputs[i]
    return SymbolicSample(out, y_prime.base_index, SOURCE)


# -- byte format ------------------------------------------------------------------
def write_varint(buf, value: int):
    if value < 0:
        raise InputError("varint values are unsigned")
    while True:
        b = value & 0x7F
        value >>= 7
        if value:
            buf.write(bytes([b | 0x80]))
        else:
            buf.write(bytes([b]))
            return


def read_varint(buf) -> int:
    shift = result = 0
    while True:
        c = buf.read(1)
        if not c:
            raise ParseError("truncated varint")
        b = c[0]
        result |= (b & 0x7F) << shift
        if not b & 0x80:
            return result
        shift += 7


def zigzag(v: int) -> int:
    return (v << 1) if v >= 0 else ((-v) << 1) - 1


def unzigzag(z: int) -> int:
    return (z >> 1) if not z & 1 else -((z + 1) >> 1)


def write_bytes(buf, data: bytes):
    write_varint(buf, len(data))
    buf.write(data)


def read_bytes(buf) -> bytes:
    n = read_varint(buf)
    data = buf.read(n)
    if len(data) != n:
        raise ParseError("truncated field")
    return data


def write_ints(buf, values):
    values = np.asarray(list(values) if not isinstance(values, np.ndarray) else values,
                        dtype=np.uint64)
    write_varint(buf, len(values))
    buf.write(pack_varints(values))


def read_ints(buf) -> tuple:
    return tuple(unpack_varints(buf, read_varint(buf)).tolist())


def pack_varints(values) -> bytes:
    """LEB128-encode a whole array of nonnegative integers at once."""
    v = np.asarray(values)
    if v.size and v.min() < 0:
        raise InputError("varint values are unsigned")
    v = v.astype(np.uint64).ravel()
    if not v.size:
        return b""
    nb = np.ones(len(v), dtype=np.int64)
    for k in range(1, 10):
        nb += (v >> np.uint64(7 * k)) > 0
    starts = np.cumsum(nb) - nb
    out = np.empty(int(nb.sum()), dtype=np.uint8)
    for k in range(int(nb.max())):
        sel = nb > k
        chunk = ((v[sel] >> np.uint64(7 * k)) & np.uint64(0x7F)).astype(np.uint8)
        out[starts[sel] + k] = chunk | np.where(nb[sel] > k + 1, 0x80, 0).astype(np.uint8)
    return out.tobytes()


def unpack_varints(buf, count: int) -> np.ndarray:
    """Read ``count`` varints from the current position of ``buf`` (vectorized)."""
    if count == 0:
        return np.zeros(0, dtype=np.int64)
    pos = buf.tell()
    arr = np.frombuffer(buf.getbuffer(), dtype=np.uint8)[pos:]
    ends = np.flatnonzero(arr < 0x80)[:count]
    if len(ends) < count:
        raise ParseError("truncated varint array")
    seg = arr[:ends[-1] + 1]
    vid = np.zeros(len(seg), dtype=np.int64)
    vid[1:] = np.cumsum(seg[:-1] < 0x80)
    first = np.concatenate([[0], ends[:-1] + 1])
    k = np.arange(len(seg)) - first[vid]
    if k.max() > 9:
        raise ParseError("varint too long")
    vals = np.zeros(count, dtype=np.uint64)
    np.bitwise_or.at(vals, vid, (seg & 0x7F).astype(np.uint64) << (7 * k).astype(np.uint64))
    buf.seek(pos + len(seg))
    if vals.size and vals.max() >= 2**63:
        raise ParseError("varint exceeds the signed 64-bit range")
    return vals.astype(np.int64)


def zigzag_array(v) -> np.ndarray:
    v = np.asarray(v, dtype=np.int64)
    return ((v << 1) ^ (v >> 63)).astype(np.uint64)


def unzigzag_array(z) -> np.ndarray:
    z = np.asarray(z, dtype=np.int64)
    return (z >> 1) ^ -(z & 1)


def _dictionary_section(code: FinitaryCode) -> bytes:
    buf = io.BytesIO()
    K = len(code)
    n = len(code.inputs[0]) if K else 0
    m = len(code.paths[0]) if K else 0
    for value in (K, n, m):
        write_varint(buf, value)
    if K:
        buf.write(pack_varints(np.array(code.inputs, dtype=np.int64)))
        buf.write(pack_varints(np.array(code.paths, dtype=np.int64)))
    return buf.getvalue()


def code_digest(code: FinitaryCode) -> bytes:
    """SHA-256 over (version, L, dictionary entries)."""
    buf = io.BytesIO()
    write_varint(buf, VERSION)
    write_varint(buf, code.L)
    buf.write(_dictionary_section(code))
    return hashlib.sha256(buf.getvalue()).digest()


def digest_bits(digest: bytes, n: int) -> tuple:
    """The first ``n`` bits of ``digest``, most significant first."""
    return tuple((digest[k // 8] >> (7 - k % 8)) & 1 for k in range(n))


def serialize_psi(code: FinitaryCode, idx: IndexSets | None = None, scheme: bytes = b"") -> bytes:
    buf = io.BytesIO()
    buf.write(MAGIC)
    write_varint(buf, VERSION)
    write_varint(buf, code.L)
    write_bytes(buf, code.anchor_id.encode())
    buf.write(code.target.digest())
    buf.write(_dictionary_section(code))
    if idx is None:
        write_varint(buf, 0)
    else:
        write_varint(buf, 1)
        write_varint(buf, zigzag(idx.span.start))
        write_varint(buf, len(idx.span))
        write_varint(buf, idx.len_w)
        write_varint(buf, idx.M)
        write_varint(buf, len(idx.I1))
        buf.write(pack_varints(zigzag_array(np.diff(idx.I1, prepend=idx.span.start))))
    write_bytes(buf, scheme)
    return buf.getvalue()


def deserialize_psi(data: bytes, target: Sft):
    """Inverse of :func:`serialize_psi`; returns ``(code, idx_or_None, scheme)``.

    Raises :class:`PsiMismatchError` when the artifact was built for a
    different target shift.
    """
    buf = io.BytesIO(data)
    if buf.read(3) != MAGIC:
        raise ParseError("not a psi artifact")
    version = read_varint(buf)
    if version != VERSION:
        raise ParseError(f"unsupported psi version {version}")
    L = read_varint(buf)
    anchor = read_bytes(buf).decode()
    h = buf.read(32)
    if h != target.digest():
        raise PsiMismatchError("artifact was built for a different target shift")
    if anchor not in target.vertex_index:
        raise PsiMismatchError(f"anchor {anchor!r} is not a vertex of the target")
    K, n, m = read_varint(buf), read_varint(buf), read_varint(buf)
    inputs = unpack_varints(buf, K * n).reshape(K, n)
    paths = unpack_varints(buf, K * m).reshape(K, m)
    if paths.size and paths.max() >= target.num_edges:
        raise ParseError("codeword edge index out of range")
    inputs, paths = [tuple(r) for r in inputs.tolist()], [tuple(r) for r in paths.tolist()]
    code = FinitaryCode(target, target.vertex_index[anchor], L, inputs, paths)
    idx = None
    if read_varint(buf):
        start = unzigzag(read_varint(buf))
        span = range(start, start + read_varint(buf))
        len_w, M = read_varint(buf), read_varint(buf)
        I1 = start + np.cumsum(unzigzag_array(unpack_varints(buf, read_varint(buf))))
        idx = index_sets(I1, span, len_w, M)
    scheme = read_bytes(buf)
    if buf.read(1):
        raise ParseError("trailing bytes after psi artifact")
    return code, idx, scheme


def hexdump(data: bytes, width: int = 16) -> str:
    """Debug text dump: offset, hex bytes, printable ASCII."""
    lines = []
    for off in range(0, len(data), width):
        chunk = data[off:off + width]
        hx = " ".join(f"{b:02x}" for b in chunk)
        asc = "".join(chr(b) if 32 <= b < 127 else "." for b in chunk)
        lines.append(f"{off:08x}  {hx:<{3 * width}} {asc}")
    return "\n".join(lines) + "\n"
