import numpy as np
import pytest

from sftembed.errors import (CorruptionError, EmbeddingError, EntropyGapError, InputError,
                             NoMarkerAnchorError, PsiMismatchError)
from sftembed.finitary import code_digest, deserialize_psi, digest_bits
from sftembed.measures import MarkovSource, SymbolicSample, markov_sample, source_sample
from sftembed.pipeline import (Config, Layout, abramov_for, admissible_on, base_shift, decode,
                               decode_report, encode, geometry, marker_purity, roundtrip)
from sftembed.sft import full_shift, golden_mean, parse_sft

from conftest import DEMO_P, OTHER_P
from oracles import admissible_scan, occurrences

LENGTH = 200_000
CFG = Config(t=0.35, n_max=1, min_markers=300)


@pytest.fixture(scope="module")
def FULL2():
    return full_shift(2)


@pytest.fixture(scope="module")
def x():
    # shifted window: absolute indices start at 1000
    s = markov_sample(MarkovSource(DEMO_P), LENGTH, 1)
    return source_sample(s.symbols, base_index=1000)


@pytest.fixture(scope="module")
def res(x, FULL2):
    return encode(x, FULL2, 0.35, CFG)


def test_geometry_full2(FULL2):
    g = geometry(FULL2, 0.35)
    assert g.w == (0, 0, 1, 1) and g.M == 5
    assert g.u != g.v and len(g.u) == len(g.v) == 5


def test_roundtrip_exact_on_interior(x, res, FULL2):
    xh = decode(res.y, FULL2, 0.35, res.psi_artifact, CFG)
    assert (xh.base_index, len(xh)) == (res.interior.start, len(res.interior))
    assert np.array_equal(xh.symbols, x.window(res.interior.start, res.interior.stop).symbols)
    assert len(res.interior) / LENGTH > 0.9


def test_full_window_recovered(x, res, FULL2):
    rep = decode_report(res.y, FULL2, 0.35, res.psi_artifact, CFG)
    assert rep.x_hat == x


def test_output_structure(res, FULL2):
    y = res.y.symbols
    assert res.y.base_index == 1000 and res.y.alphabet_kind == "edge"
    assert admissible_scan(FULL2, y.tolist()) == -1
    occ = np.array(occurrences(y, res.scheme.w)) + 1000
    assert np.array_equal(occ, res.idx.I1)
    assert marker_purity(res.y, res.scheme.w, res.idx.I1, res.interior)
    assert admissible_on(res.y, FULL2, res.interior)


def test_sigma_carries_digest(res, FULL2):
    assert res.sigma.bits == digest_bits(code_digest(res.code), 1)
    rep = decode_report(res.y, FULL2, 0.35, res.psi_artifact, CFG)
    assert rep.sigma == res.sigma


def test_artifact_contents(res, FULL2):
    code, idx, blob = deserialize_psi(res.psi_artifact, res.code.target)
    lay = Layout.from_bytes(blob)
    assert code == res.code and idx == res.idx
    assert lay.scheme == res.scheme and lay.interior == res.interior
    assert Layout.from_bytes(lay.to_bytes()).to_bytes() == blob


def test_encode_deterministic(x, res, FULL2):
    again = encode(x, FULL2, 0.35, CFG)
    assert again.psi_artifact == res.psi_artifact
    assert np.array_equal(again.y.symbols, res.y.symbols)


def test_abramov_for(x, res):
    ab = abramov_for(x, res)
    assert ab.mu_A == pytest.approx(res.diagnostics["mu_A"])
    assert ab.predicted == pytest.approx(ab.h_sample / ab.mu_A)


@pytest.mark.parametrize("offset", [10, 5_000, 77_777, 150_001, LENGTH - 40])
@pytest.mark.parametrize("delta", [1])
def test_single_symbol_fault_detected(res, FULL2, offset, delta):
    y = res.y.symbols.copy()
    y[offset] = (y[offset] + delta) % 2
    bad = SymbolicSample(y, res.y.base_index, "edge", res.y.alphabet)
    with pytest.raises((CorruptionError, PsiMismatchError)):
        decode(bad, FULL2, 0.35, res.psi_artifact, CFG)


def test_fault_inside_codeword_reports_offset(res, FULL2):
    k = int(res.idx.I2[50_000] - 1000)
    y = res.y.symbols.copy()
    y[k] ^= 1
    bad = SymbolicSample(y, 1000, "edge", res.y.alphabet)
    with pytest.raises(CorruptionError) as exc:
        decode(bad, FULL2, 0.35, res.psi_artifact, CFG)
    assert exc.value.offset is not None and abs(exc.value.offset - (k + 1000)) < 64


def test_truncated_output_rejected(res, FULL2):
    short = SymbolicSample(res.y.symbols[:-1], 1000, "edge", res.y.alphabet)
    with pytest.raises(PsiMismatchError):
        decode(short, FULL2, 0.35, res.psi_artifact, CFG)


def test_foreign_artifact_rejected(res, FULL2):
    other = encode(markov_sample(MarkovSource(OTHER_P), LENGTH, 1), FULL2, 0.35, CFG)
    moved = SymbolicSample(other.y.symbols, 1000, "edge", other.y.alphabet)
    with pytest.raises(EmbeddingError):
        decode(moved, FULL2, 0.35, res.psi_artifact, CFG)
    with pytest.raises(PsiMismatchError):
        decode(res.y, golden_mean(), 0.35, res.psi_artifact, CFG)


def test_entropy_gap():
    noisy = markov_sample(MarkovSource(np.full((2, 2), 0.5)), 20_000, 1)
    with pytest.raises(EntropyGapError) as exc:
        encode(noisy, full_shift(2), 0.35, CFG)
    assert exc.value.stage == "entropy" and exc.value.exit_code == 3
    with pytest.raises(EntropyGapError):
        encode(markov_sample(MarkovSource(DEMO_P), 20_000, 1), full_shift(2), 0.8, CFG)


def test_no_marker_anchor():
    x = markov_sample(MarkovSource(DEMO_P), 20_000, 1)
    with pytest.raises(NoMarkerAnchorError) as exc:
        encode(x, full_shift(2), 0.35, CFG)
    assert exc.value.stage == "anchor"
    with pytest.raises(NoMarkerAnchorError):
        encode(markov_sample(MarkovSource(DEMO_P), LENGTH, 1), golden_mean(), 0.35, CFG)


def test_edge_sample_rejected():
    e = SymbolicSample(np.zeros(10, dtype=np.int64), 0, "edge", ("0", "1"))
    with pytest.raises(InputError):
        encode(e, full_shift(2), 0.35, CFG)


def test_config_validation():
    with pytest.raises(InputError):
        Config(n_max=4)
    with pytest.raises(InputError):
        Config(t=0)
    with pytest.raises(InputError):
        Config(psi_path="a", out_path="a")


def test_base_shift_drops_labels():
    Y = parse_sft("sft 1 2\nedge a v v x\nedge b v v y\n")
    B = base_shift(Y)
    assert B.alphabet == ("a", "b") and base_shift(B) is B


def test_roundtrip_helper_counts_mismatches():
    x = markov_sample(MarkovSource(OTHER_P), LENGTH, 2)
    res, rep, mism = roundtrip(x, full_shift(2), 0.35, CFG)
    assert mism == 0 and rep.sigma == res.sigma
