import itertools
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sftembed.channel import (MarkerScheme, SigmaBits, choose_U_family, codeword_sums,
                              default_tolerance, encode_sigma, nearest_codeword, nominal_weights,
                              recover_sigma, separation_bound, separation_check, sigma_sweep,
                              synthetic_scheme)
from sftembed.errors import AmbiguousDensityError, GranularityError, InputError, LayoutError
from sftembed.measures import (ContextCounts, MarkovSource, empirical_measure, markov_sample,
                               source_sample)

from oracles import block_counts, nearest_sigma, occurrences


def scheme(n_max=1, M=2, fams=((),), ratios=(Fraction(1, 2),)):
    return MarkerScheme((0, 0, 0), (1,) * M, (2,) * M, M, (0,), 0, 1.0, 0.5,
                        fams, 1, n_max, ratios)


def test_nominal_weights():
    assert nominal_weights(3) == (Fraction(1, 2), Fraction(1, 16), Fraction(1, 512))
    with pytest.raises(InputError):
        nominal_weights(0)


def test_uniform_source_half_of_extensions():
    # every length-9 binary word once on a de Bruijn-like count table: a = 000, ext 6
    counts = {tuple(int(b) for b in f"{i:06b}"): 1 for i in range(64)}
    table = ContextCounts((0, 0, 0), 6, counts)
    fams, ratios = choose_U_family(table, (0, 0, 0), 1, 6)
    assert len(fams[0]) == 32 and ratios == (Fraction(1, 2),)


def test_fair_coin_three_families_recount():
    x = markov_sample(MarkovSource(np.full((2, 2), 0.5)), 1_000_000, 3)
    a = (0, 0, 0)
    occ = np.array(occurrences(x.symbols, a))
    occ = occ[occ + 3 + 12 <= len(x)]
    ctx = x.symbols[(occ + 3)[:, None] + np.arange(12)]
    rows, cnt = np.unique(ctx, axis=0, return_counts=True)
    table = ContextCounts(a, 12, {tuple(r): int(c) for r, c in zip(rows.tolist(), cnt.tolist())})
    fams, ratios = choose_U_family(table, a, 3, 12)
    # recount membership directly from the contexts
    keys = [tuple(r) for r in ctx.tolist()]
    for fam, r, w in zip(fams, ratios, nominal_weights(3)):
        members = set(fam)
        assert Fraction(sum(k in members for k in keys), len(keys)) == r
        assert abs(r - w) < w / 4
    assert not set(fams[0]) & set(fams[1]) and not set(fams[1]) & set(fams[2])


def test_constant_sample_granularity():
    em = empirical_measure(source_sample([0] * 50), 10)
    with pytest.raises(GranularityError):
        choose_U_family(em, (0,), 1, 4)


def test_choose_U_family_needs_extensions():
    em = empirical_measure(source_sample([1] * 20), 5)
    with pytest.raises(InputError):
        choose_U_family(em, (0,), 1, 2)


@pytest.mark.parametrize("f,bits", [(0, (0, 0, 0)), (Fraction("0.501953125"), (1, 0, 1)),
                                    (Fraction(9, 16), (1, 1, 0)), (1, (1, 1, 1))])
def test_nearest_codeword_examples(f, bits):
    assert nearest_codeword(f, 3)[0] == bits
    assert nearest_sigma(f, 3) == bits


@given(st.fractions(0, 1), st.integers(1, 3))
def test_nearest_codeword_matches_oracle(f, n_max):
    got, d1, d2 = nearest_codeword(f, n_max)
    sums = sorted(abs(f - s) for s in codeword_sums(nominal_weights(n_max)).values())
    assert (d1, d2) == (sums[0], sums[1])
    if d2 > d1:
        assert got == nearest_sigma(f, n_max)


@pytest.mark.parametrize("markers,ambiguous", [(25, True), (100, False)])
def test_ambiguous_density_example(markers, ambiguous):
    # f = 0.28 with n_max = 1: margin 0.06 against 2 / markers
    sch = scheme()
    I1 = np.arange(markers) * 20 + 2
    y = np.zeros(markers * 20 + 20, dtype=np.int64)
    u_count = round(0.28 * markers)
    for i in I1[:u_count]:
        y[i + 5:i + 7] = 1
    if ambiguous:
        with pytest.raises(AmbiguousDensityError):
            recover_sigma(y, I1, sch)
    else:
        rec = recover_sigma(y, I1, sch)
        assert rec.sigma.bits == (1,) and rec.f_hat == Fraction(28, 100)
        assert rec.margin == Fraction(6, 100)


def test_encode_sigma_slot_pattern():
    sch = scheme(n_max=2, fams=((), ()), ratios=(Fraction(1, 2), Fraction(1, 16)))
    I1 = np.array([0, 20, 40, 60])
    membership = [1, 2, 0, 1]
    y = np.full(80, -1, dtype=np.int64)
    encode_sigma(y, I1, membership, SigmaBits((0, 1)), sch)
    # slots start at i + len_w + M = i + 5, width 2
    slots = [tuple(y[i + 5:i + 7]) for i in I1]
    assert slots == [(2, 2), (1, 1), (2, 2), (2, 2)]
    assert (np.delete(y, [i + k for i in I1 for k in (5, 6)]) == -1).all()
    with pytest.raises(LayoutError):
        encode_sigma(y, I1, membership, SigmaBits((0, 1)), sch)


def test_encode_sigma_all_zero_and_all_one():
    sch = scheme(n_max=2, fams=((), ()), ratios=(Fraction(1, 2), Fraction(1, 16)))
    I1 = np.arange(6) * 10
    memb = np.array([0, 1, 2, 1, 0, 2])
    y0 = encode_sigma(np.full(70, -1, dtype=np.int64), I1, memb, SigmaBits((0, 0)), sch)
    assert all(tuple(y0[i + 5:i + 7]) == (2, 2) for i in I1)
    y1 = encode_sigma(np.full(70, -1, dtype=np.int64), I1, memb, SigmaBits((1, 1)), sch)
    assert [tuple(y1[i + 5:i + 7]) == (1, 1) for i in I1] == (memb > 0).tolist()


def test_separation_bound_values():
    assert separation_bound(1, 3) == Fraction(3, 8) - Fraction(5, 4) * (Fraction(1, 16) + Fraction(1, 512))
    assert separation_bound(3, 3) == Fraction(3, 4 * 512)
    assert all(separation_bound(n, 3) > 0 for n in (1, 2, 3))


def test_separation_check_nominal_and_broken():
    assert separation_check(nominal_weights(3), 3).ok
    # r_1 pushed to the edge of its tolerance collides with sigma_1 = 0 codewords
    bad = (Fraction(1, 8) + Fraction(1, 1000), Fraction(1, 16), Fraction(1, 512))
    assert not separation_check(bad, 3).ok
    assert not separation_check(nominal_weights(3), 3, tol=Fraction(1, 100)).ok


@pytest.mark.parametrize("n_max", [1, 2, 3])
def test_sigma_sweep_recovers_every_pattern(n_max):
    sch, cases = sigma_sweep(n_max, 10_000)
    assert len(cases) == 2 ** n_max
    weights = nominal_weights(n_max)
    for c in cases:
        assert c.recovered == c.sigma
        assert nearest_sigma(c.f_hat, n_max) == c.sigma.bits
        assert c.f_hat == sum((r for b, r in zip(c.sigma.bits, sch.ratios) if b), Fraction(0))
    assert separation_check(sch.ratios, n_max, default_tolerance(10_000)).ok
    assert sch.ratios == weights[:n_max] or all(abs(r - w) < w / 4 for r, w in zip(sch.ratios, weights))


def test_synthetic_scheme_membership_sizes():
    sch, I1, memb, length = synthetic_scheme(3, 10_000)
    assert np.bincount(memb, minlength=4).tolist()[1:] == [5000, 625, 20]
    assert length == 10_000 * 12 and I1[0] == 2


def test_scheme_bytes_roundtrip():
    sch, *_ = synthetic_scheme(2, 1000)
    again = MarkerScheme.from_bytes(sch.to_bytes())
    assert again == sch and again.to_bytes() == sch.to_bytes()
    assert sch.membership([(1,), (2,), (3,)]).tolist() == [1, 2, 0]


def test_scheme_validation():
    with pytest.raises(InputError):
        MarkerScheme((0,), (1,), (1,), 1)
    with pytest.raises(InputError):
        MarkerScheme((0,), (1, 1), (2,), 1)
    with pytest.raises(InputError):
        SigmaBits((0, 2))


def test_codeword_sums_complete():
    sums = codeword_sums(nominal_weights(2))
    assert set(sums) == set(itertools.product((0, 1), repeat=2))
    assert sums[(1, 1)] == Fraction(9, 16)


def test_extension_counts_recount_small():
    seq = [0, 1, 1, 0, 1, 0, 0, 1, 1, 1, 0, 1]
    em = empirical_measure(source_sample(seq), 3)
    ref = {w[1:]: c for w, c in block_counts(seq, 3).items() if w[0] == 0}
    assert em.extension_counts((0,), 2) == ref
