import subprocess
import sys

import pytest

from sftembed.cli import main
from sftembed.experiment import data_path, run_experiment
from sftembed.measures import parse_sample
from sftembed.report import format_report, parse_report

from conftest import golden_path
from oracles import golden_mean_entropy


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def golden(name):
    with open(golden_path(name)) as fh:
        return fh.read()


def test_entropy(capsys):
    code, out, _ = run(capsys, "entropy", "gm.sft")
    assert code == 0 and float(out) == pytest.approx(golden_mean_entropy(), abs=1e-12)


def test_mixing_golden(capsys):
    assert run(capsys, "mixing", "full2.sft")[1] == golden("mixing_full2.txt")


def test_marker_golden(capsys):
    assert run(capsys, "marker", "full2.sft", "--t", "0.35")[1] == golden("marker_full2_035.txt")


def test_marker_not_found_exit_code(capsys):
    code, _, err = run(capsys, "marker", "full2.sft", "--t", "0.69", "--max-len", "3")
    assert code == 3 and "marker-not-found" in err and "best_entropy" in err


def test_restrict(capsys, tmp_path):
    code, out, _ = run(capsys, "restrict", "gm.sft", "e1")
    assert code == 0 and out == "sft 1 1\nedge e0 p p\n"
    dest = tmp_path / "r.sft"
    run(capsys, "restrict", "full2.sft", "11", "--out", str(dest))
    assert dest.read_text().startswith("sft 2 3\n")


def test_parse_error_exit_code(capsys, tmp_path):
    bad = tmp_path / "bad.sft"
    bad.write_text("sft 1 1\nedge a x\n")
    code, _, err = run(capsys, "entropy", str(bad))
    assert code == 2 and "parse" in err


def test_empty_shift_is_precondition(capsys, tmp_path):
    acyclic = tmp_path / "acyclic.sft"
    acyclic.write_text("sft 2 1\nedge a x y\n")
    assert run(capsys, "entropy", str(acyclic))[0] == 3


def test_missing_file(capsys):
    code, _, err = run(capsys, "entropy", "/nonexistent/file.sft")
    assert code == 3


def test_encode_decode_files(capsys, tmp_path):
    y, psi, xh = tmp_path / "y.txt", tmp_path / "psi.bin", tmp_path / "x.txt"
    common = ["--length", "200000", "--min-markers", "300", "--n-max", "1", "--seed", "4"]
    code, out, _ = run(capsys, "encode", "demo_source.markov", "full2.sft",
                       "--psi", str(psi), "--out", str(y), *common)
    assert code == 0
    enc = parse_report(out)
    code, out, _ = run(capsys, "decode", str(y), "full2.sft", "--psi", str(psi),
                       "--out", str(xh), *common)
    assert code == 0
    dec = parse_report(out)
    assert dec["interior"] == enc["interior"] and dec["sigma"] == enc["sigma"]
    lo, hi = map(int, enc["interior"].split())
    assert len(parse_sample(xh.read_text())) == hi - lo
    # flipping one output symbol is reported as corruption
    text = y.read_text().splitlines()
    toks = text[1].split()
    toks[1234] = "1" if toks[1234] == "0" else "0"
    y.write_text(text[0] + "\n" + " ".join(toks) + "\n")
    code, _, err = run(capsys, "decode", str(y), "full2.sft", "--psi", str(psi), *common)
    assert code == 4 and "offset" in err


def test_encode_requires_paths(capsys):
    code, _, err = run(capsys, "encode", "demo_source.markov", "full2.sft")
    assert code == 3


def test_roundtrip_report(capsys):
    code, out, _ = run(capsys, "roundtrip", "demo_source.markov", "full2.sft", "--length",
                       "200000", "--min-markers", "300", "--n-max", "1")
    rep = parse_report(out)
    assert code == 0
    assert rep["mismatches"] == "0" and rep["marker_purity"] == "true"
    assert rep["admissible"] == "true"


def test_roundtrip_entropy_gap(capsys, tmp_path):
    src = tmp_path / "fair.markov"
    src.write_text("markov 2\n0.5 0.5\n0.5 0.5\n")
    code, _, err = run(capsys, "roundtrip", str(src), "full2.sft", "--length", "20000")
    assert code == 3 and "entropy-gap" in err


def test_slice(capsys, tmp_path):
    a, b = tmp_path / "a.txt", tmp_path / "b.txt"
    a.write_text("sample 0 12 source\n" + " ".join(["0"] * 12) + "\n")
    b.write_text("sample 0 12 source\n0 1 1 0 1 0 0 0 1 1 1 0\n")
    code, out, _ = run(capsys, "slice", str(a), str(b), "--t", "0.3", "--k", "1")
    rep = parse_report(out)
    assert rep[f"{a}.kept"] == "true" and rep[f"{b}.kept"] == "false"
    assert rep["kept"] == "1"


def test_experiment_golden_and_jobs(capsys, tmp_path):
    expect = golden("experiment_report.txt")
    code, out, _ = run(capsys, "experiment", "experiment.json")
    assert code == 0 and out == expect
    assert run_experiment(data_path("experiment.json"), jobs=3) == expect
    parse_report(expect)


def test_experiment_trial_errors_reported(tmp_path):
    spec = tmp_path / "spec.json"
    spec.write_text('{"sft": "full2.sft", "t": 0.35, "sources": {"A": {"P": [[0.5, 0.5], '
                    '[0.5, 0.5]]}}, "trials": [{"kind": "roundtrip", "source": "A", '
                    '"length": 5000}]}')
    rep = parse_report(run_experiment(str(spec)))
    assert rep["trial.0.error"] == "entropy-gap" and rep["trial.0.stage"] == "entropy"


def test_experiment_bad_spec(capsys, tmp_path):
    spec = tmp_path / "spec.json"
    spec.write_text("{not json")
    assert run(capsys, "experiment", str(spec))[0] == 2


def test_report_hash_detects_edits():
    text = format_report([("a", 1.5), ("b", True), ("c", [1, 2])])
    assert parse_report(text) == {"a": "1.5", "b": "true", "c": "1 2"}
    with pytest.raises(ValueError):
        parse_report(text.replace("1.5", "1.6"))


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "sftembed.cli", "entropy", "full2.sft"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0 and proc.stdout.strip() == "0.693147180560"
