"""Kernel dispatch: the compiled extension when built, numpy/pure Python otherwise.

Set ``SFTEMBED_PURE=1`` to force the fallback.
"""
import os

from . import _kernels_py as pure

BACKEND = "python"
if os.environ.get("SFTEMBED_PURE", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _impl
        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = pure
else:
    _impl = pure

NO_GAP = pure.NO_GAP
splitmix64_stream = _impl.splitmix64_stream
markov_walk = _impl.markov_walk
min_gap_by_group = _impl.min_gap_by_group
find_occurrences = _impl.find_occurrences

__all__ = [
    "BACKEND", "NO_GAP", "pure", "splitmix64_stream", "markov_walk",
    "min_gap_by_group", "find_occurrences",
]
