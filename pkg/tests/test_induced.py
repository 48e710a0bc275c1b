import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sftembed.errors import (BoundaryError, CorruptionError, InputError, NoMarkerAnchorError,
                             PreconditionError, WindowsCollideError)
from sftembed.induced import (abramov_check, block_frequencies, choose_block_a, compute_N,
                              index_sets, itinerary, occurrences, reconstruct_from_itinerary,
                              window_width)
from sftembed.measures import MarkovSource, markov_sample, source_sample

from conftest import DEMO_P
from oracles import conditional_entropy, occurrences as oracle_occ, strict_n_bound


def oracle_block_a(seq, N, max_len, min_count=1):
    for m in range(1, max_len + 1):
        words = sorted({tuple(seq[i:i + m]) for i in range(len(seq) - m + 1)})
        for w in words:
            occ = oracle_occ(seq, w)
            if len(occ) >= min_count and all(b - a >= N for a, b in zip(occ, occ[1:])):
                return w
    return None


def oracle_I2(I1, span, len_w, M):
    prot = set()
    for i in I1:
        prot.update(range(i - M, i + len_w + 3 * M + 1))
    return [j for j in span if j not in prot]


def test_window_width():
    assert window_width(4, 5) == 25


def test_compute_N_example():
    # h'=0.6094, t=0.35, len_w=4, M=5: 0.6094/0.2594*25 = 58.73...
    assert compute_N(0.609377863435871, 0.35, 4, 5) == 59


def test_compute_N_grid():
    rng = random.Random(4)
    for _ in range(200):
        h = rng.uniform(0.05, 2.0)
        t = rng.uniform(0.01, h * 0.99)
        ell, M = rng.randint(1, 12), rng.randint(1, 10)
        N = compute_N(h, t, ell, M)
        ok = strict_n_bound(h, t, ell, M)
        assert ok(N) and not ok(N - 1)


def test_compute_N_exact_boundary():
    # h/(h-t) * W is an exact integer here: 1/(1-0.5) * 9 = 18, strictly above -> 19
    assert compute_N(1.0, 0.5, 4, 1) == 19


def test_compute_N_precondition():
    with pytest.raises(PreconditionError):
        compute_N(0.3, 0.35, 4, 5)


@given(st.lists(st.integers(0, 2), min_size=1, max_size=60), st.integers(1, 8),
       st.integers(1, 3))
@settings(max_examples=150)
def test_choose_block_a_matches_oracle(seq, N, min_count):
    expect = oracle_block_a(seq, N, 6, min_count)
    if expect is None:
        with pytest.raises(NoMarkerAnchorError):
            choose_block_a(source_sample(seq), N, 6, min_count)
    else:
        assert choose_block_a(source_sample(seq), N, 6, min_count) == expect


def test_occurrences_absolute():
    s = source_sample([1, 0, 1, 0, 1], base_index=100)
    assert occurrences(s, (1, 0, 1)).tolist() == [100, 102]


@given(st.lists(st.integers(0, 200), max_size=12, unique=True), st.integers(1, 4),
       st.integers(1, 3))
def test_index_sets_match_oracle(raw, len_w, M):
    W = window_width(len_w, M)
    I1 = sorted(i * W for i in raw)
    span = range(-5, max(I1, default=0) + 40)
    idx = index_sets(I1, span, len_w, M)
    assert idx.I2.tolist() == oracle_I2(I1, span, len_w, M)
    assert idx.mu_A == pytest.approx(len(idx.I2) / len(span))
    if len(idx.I2):
        j = idx.I2[len(idx.I2) // 2]
        assert idx.n_of(j) == len(idx.I2) // 2


def test_index_sets_collision():
    with pytest.raises(WindowsCollideError):
        index_sets([0, 5], range(30), 2, 1)
    idx = index_sets([0, 8], range(30), 2, 1)
    with pytest.raises(InputError):
        idx.n_of(0)


def test_itinerary_codes_and_reconstruction():
    x = markov_sample(MarkovSource(DEMO_P), 3000, 9)
    idx = index_sets([100, 900, 1500], range(3000 - 13 + 1), 3, 2)
    W = idx.W + 1
    xp, table = itinerary(x, idx, W)
    blocks = sorted({tuple(x.symbols[j:j + W]) for j in idx.I2})
    assert [tuple(r) for r in table.tolist()] == blocks
    for j, c in zip(idx.I2[:50].tolist(), xp.symbols[:50].tolist()):
        assert tuple(table[c]) == tuple(x.symbols[j:j + W])
    xh, covered = reconstruct_from_itinerary(xp, table, idx, W)
    assert covered.all() and xh.base_index == 0
    assert np.array_equal(xh.symbols, x.symbols[:len(xh)])


def test_itinerary_boundary():
    x = source_sample([0] * 20)
    idx = index_sets([], range(20), 2, 1)
    with pytest.raises(BoundaryError) as exc:
        itinerary(x, idx, 5)
    assert exc.value.index == 16


def test_reconstruct_detects_disagreement():
    x = source_sample([0, 1, 1, 0, 1, 0, 0, 1, 1, 1, 0, 0])
    idx = index_sets([], range(9), 1, 1)
    xp, table = itinerary(x, idx, 4)
    codes = xp.symbols.copy()
    codes[3] = (codes[3] + 1) % len(table)
    with pytest.raises(CorruptionError):
        reconstruct_from_itinerary(source_sample(codes), table, idx, 4)
    codes = codes.copy()
    codes[3] = len(table)
    with pytest.raises(CorruptionError):
        reconstruct_from_itinerary(source_sample(codes), table, idx, 4)


def test_abramov_check_fields():
    x = markov_sample(MarkovSource(DEMO_P), 50_000, 1)
    I1 = list(range(500, 49_000, 400))
    idx = index_sets(I1, range(len(x) - 20), 3, 2)
    rep = abramov_check(x, idx, 3, W=idx.W + 1)
    xp, _ = itinerary(x, idx, idx.W + 1)
    assert rep.h_itinerary == pytest.approx(conditional_entropy(xp.symbols, 3), abs=1e-12)
    assert rep.h_sample == pytest.approx(conditional_entropy(x.symbols, 3), abs=1e-12)
    assert rep.predicted == pytest.approx(rep.h_sample / rep.mu_A)
    assert rep.relative_gap == pytest.approx(abs(rep.h_itinerary - rep.predicted) / rep.h_sample)


def test_block_frequencies():
    xp = source_sample([1, 2, 0, 0, 1, 2, 3, 3])
    blocks, counts, ids = block_frequencies(xp, 2)
    assert blocks.tolist() == [[0, 0], [1, 2], [3, 3]]
    assert counts.tolist() == [1, 2, 1] and ids.tolist() == [1, 0, 1, 2]
    with pytest.raises(InputError):
        block_frequencies(xp, 3)


def test_choose_block_a_respects_min_count():
    seq = [0, 1] * 5 + [2] + [0, 1] * 5 + [2] + [0] * 3 + [2]
    # the 2s at 21 and 25 are too close; (0, 2) occurs once, (1, 2) twice 11 apart
    assert choose_block_a(source_sample(seq), 8, 4) == (0, 2)
    assert choose_block_a(source_sample(seq), 8, 4, min_count=2) == (1, 2)
    with pytest.raises(NoMarkerAnchorError):
        choose_block_a(source_sample(seq), 8, 4, min_count=4)
