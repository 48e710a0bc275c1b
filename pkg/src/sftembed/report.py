"""Line-based ``key: value`` reports closed by a content hash."""
from __future__ import annotations

import hashlib

HASH_KEY = "content-sha256"


def fmt(value) -> str:
    """Deterministic text for report values."""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return f"{value:.12g}"
    if isinstance(value, (tuple, list)):
        return " ".join(fmt(v) for v in value)
    return str(value)


def format_report(pairs) -> str:
    """Render ``pairs`` and append the SHA-256 of everything above the last line."""
    body = "".join(f"{k}: {fmt(v)}\n" for k, v in pairs)
    digest = hashlib.sha256(body.encode()).hexdigest()
    return body + f"{HASH_KEY}: {digest}\n"


def parse_report(text: str) -> dict:
    """Inverse of :func:`format_report`; verifies the trailing hash."""
    lines = text.splitlines(keepends=True)
    if not lines or not lines[-1].startswith(HASH_KEY + ": "):
        raise ValueError("report has no content hash")
    body = "".join(lines[:-1])
    if hashlib.sha256(body.encode()).hexdigest() != lines[-1].split(": ", 1)[1].strip():
        raise ValueError("report content hash mismatch")
    out = {}
    for ln in lines[:-1]:
        k, _, v = ln.rstrip("\n").partition(": ")
        out[k] = v
    return out
