"""The compiled kernels and the pure fallback must agree bit for bit."""
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sftembed import kernels
from sftembed import _kernels_py as pure

from oracles import occurrences as oracle_occurrences, splitmix64 as oracle_splitmix

try:
    from sftembed import _kernels as compiled
except ImportError:  # extension not built in this environment
    compiled = None

BACKENDS = [pure] + ([compiled] if compiled is not None else [])
backend = pytest.mark.parametrize("impl", BACKENDS, ids=lambda m: m.__name__.rsplit(".", 1)[-1])

SEED0 = [0xE220A8397B1DCDAF, 0x6E789E6AA1B965F4, 0x06C45D188009454F]


def test_dispatch_reports_backend():
    assert kernels.BACKEND in ("cython", "python")
    if compiled is None:
        assert kernels.BACKEND == "python"


@backend
def test_splitmix_vectors(impl):
    out, state = impl.splitmix64_stream(0, 3)
    assert out.tolist() == SEED0
    assert state == (3 * 0x9E3779B97F4A7C15) & (2**64 - 1)


@backend
@given(seed=st.integers(0, 2**64 - 1), n=st.integers(0, 40))
def test_splitmix_matches_reference(impl, seed, n):
    out, _ = impl.splitmix64_stream(seed, n)
    assert out.tolist() == oracle_splitmix(seed, n)


@backend
def test_splitmix_state_threads_through_calls(impl):
    a, s = impl.splitmix64_stream(12345, 5)
    b, _ = impl.splitmix64_stream(s, 5)
    whole, _ = impl.splitmix64_stream(12345, 10)
    assert np.concatenate([a, b]).tolist() == whole.tolist()


@backend
def test_markov_walk_step_rule(impl):
    cum = np.array([[0.25, 1.0], [0.5, 1.0]])
    u = np.array([0.1, 0.25, 0.49, 0.5, 0.99])
    # from state 0: u=0.1 < 0.25 -> 0; then 0.25 >= 0.25 -> 1; from 1: 0.49 < 0.5 -> 0; ...
    assert impl.markov_walk(cum, 0, u).tolist() == [0, 0, 1, 0, 1, 1]


@given(seq=st.lists(st.integers(0, 2), max_size=200),
       pattern=st.lists(st.integers(0, 2), min_size=1, max_size=5))
@settings(max_examples=200)
def test_find_occurrences_against_oracle(seq, pattern):
    expect = oracle_occurrences(np.array(seq, dtype=np.int64), np.array(pattern))
    for impl in BACKENDS:
        assert impl.find_occurrences(np.array(seq, dtype=np.int64), np.array(pattern)).tolist() == expect


@given(groups=st.lists(st.integers(0, 4), max_size=80))
def test_min_gap_by_group_backends_agree(groups):
    gid = np.array(groups, dtype=np.int64)
    pos = np.cumsum(np.arange(1, len(gid) + 1)) if len(gid) else np.zeros(0, dtype=np.int64)
    ref_counts = np.bincount(gid, minlength=5) if len(gid) else np.zeros(5, dtype=np.int64)
    ref_gap = np.full(5, kernels.NO_GAP, dtype=np.int64)
    last = {}
    for g, p in zip(gid.tolist(), pos.tolist()):
        if g in last:
            ref_gap[g] = min(ref_gap[g], p - last[g])
        last[g] = p
    for impl in BACKENDS:
        c, m = impl.min_gap_by_group(gid, pos, 5)
        assert c.tolist() == ref_counts.tolist()
        assert m.tolist() == ref_gap.tolist()


def test_readonly_inputs_accepted():
    seq = np.array([0, 1, 0, 1], dtype=np.int64)
    seq.setflags(write=False)
    for impl in BACKENDS:
        assert impl.find_occurrences(seq, np.array([0, 1])).tolist() == [0, 2]
