"""Seeded batch experiments described by a JSON spec.

A spec looks like::

    {
      "sft": "full2.sft",
      "t": 0.35,
      "sources": {"A": "demo_source.markov", "B": {"P": [[0.9, 0.1], [0.5, 0.5]]}},
      "defaults": {"length": 200000, "min_markers": 400, "n_max": 1},
      "trials": [
        {"kind": "roundtrip", "source": "A", "seed": 1},
        {"kind": "abramov", "source": "A", "seed": 1},
        {"kind": "separation", "sources": ["A", "B"], "seeds": [1, 2]},
        {"kind": "sigma_sweep", "n_max": 3, "markers": 10000}
      ]
    }

File names resolve against the spec's directory first, then the bundled
data directory. Trial keys override ``defaults``.
"""
from __future__ import annotations

import hashlib
import json
import os
from concurrent.futures import ProcessPoolExecutor
from importlib import resources

import numpy as np

from .channel import default_tolerance, separation_check, sigma_sweep
from .errors import EmbeddingError, InputError, ParseError
from .finitary import code_digest
from .measures import MarkovSource, markov_entropy, markov_sample, parse_markov
from .pipeline import (Config, abramov_for, admissible_on, marker_purity, roundtrip,
                       separation_experiment)
from .report import format_report
from .sft import parse_sft

REPORT_VERSION = 1
TRIAL_KINDS = ("roundtrip", "abramov", "separation", "sigma_sweep")
CONFIG_KEYS = ("k", "n_max", "L", "L_max", "min_markers", "marker_max_len", "a_max_len")


def data_path(name: str) -> str:
    return str(resources.files("sftembed") / "data" / name)


def resolve(name: str, base_dir: str | None) -> str:
    """``name`` under ``base_dir`` (or as given), else the bundled data file."""
    p = os.path.join(base_dir, name) if base_dir else name
    if os.path.exists(p):
        return p
    p = data_path(name)
    if os.path.exists(p):
        return p
    raise InputError(f"cannot find {name!r}")


def _read(path):
    with open(path, encoding="utf-8") as fh:
        return fh.read()


def load_spec(path: str) -> tuple:
    """Parse a spec file; returns ``(spec_dict, raw_bytes, base_dir)``."""
    path = resolve(path, None)
    with open(path, "rb") as fh:
        raw = fh.read()
    try:
        spec = json.loads(raw.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ParseError(f"spec is not valid JSON: {exc}") from None
    if not isinstance(spec, dict) or not isinstance(spec.get("trials", []), list):
        raise ParseError("spec must be an object with a 'trials' list")
    return spec, raw, os.path.dirname(os.path.abspath(path))


def _source(spec, name, base_dir) -> MarkovSource:
    src = spec.get("sources", {}).get(name)
    if src is None:
        raise InputError(f"unknown source {name!r}")
    if isinstance(src, dict):
        return MarkovSource(np.array(src["P"], dtype=np.float64))
    return parse_markov(_read(resolve(src, base_dir)))


def _config(t, params) -> Config:
    kw = {k: params[k] for k in CONFIG_KEYS if k in params}
    if "L" in kw and kw["L"] is None:
        del kw["L"]
    return Config(t=t, seed=int(params.get("seed", 1)), **kw)


def _run_trial(job):
    spec, base_dir, i, trial = job
    try:
        return _trial_pairs(spec, base_dir, i, trial)
    except EmbeddingError as exc:
        return [(f"trial.{i}.kind", trial.get("kind")), (f"trial.{i}.error", exc.tag),
                (f"trial.{i}.stage", exc.stage or "-")]


def _trial_pairs(spec, base_dir, i, trial):
    kind = trial.get("kind")
    if kind not in TRIAL_KINDS:
        raise InputError(f"unknown trial kind {kind!r}")
    params = dict(spec.get("defaults", {}))
    params.update(trial)
    p = f"trial.{i}."
    out = [(p + "kind", kind)]
    if kind == "sigma_sweep":
        n_max = int(params.get("n_max", 3))
        markers = int(params.get("markers", 10_000))
        scheme, cases = sigma_sweep(n_max, markers, int(params.get("seed", 0)))
        sep = separation_check(scheme.ratios, n_max, default_tolerance(markers))
        ok = sum(c.sigma == c.recovered for c in cases)
        out += [(p + "n_max", n_max), (p + "markers", markers),
                (p + "recovered", f"{ok}/{len(cases)}"), (p + "separation_ok", sep.ok),
                (p + "min_margin", float(min(c.margin for c in cases)))]
        return out
    Y = parse_sft(_read(resolve(spec.get("sft", "full2.sft"), base_dir)))
    t = float(spec.get("t", 0.35))
    length = int(params.get("length", 1_000_000))
    cfg = _config(t, params)
    if kind == "separation":
        names = params.get("sources", ["A", "B"])
        srcs = tuple(_source(spec, n, base_dir) for n in names)
        seeds = [int(s) for s in params.get("seeds", [1])]
        rep = separation_experiment(srcs, Y, t, length, seeds, cfg)
        out += [(p + "sources", names), (p + "length", length), (p + "ok", rep.ok)]
        for tr in rep.trials:
            q = f"{p}seed.{tr.seed}."
            out += [(q + "a", [len(a) for a in tr.a]), (q + "mu_a", list(tr.mu_a)),
                    (q + "digest", [d[:16] for d in tr.digest]),
                    (q + "identified_apart", tr.identified_apart),
                    (q + "own_decode", list(tr.own_ok)), (q + "cross_rejected", list(tr.cross_rejected))]
        return out
    name = params.get("source", "A")
    src = _source(spec, name, base_dir)
    seed = int(params.get("seed", 1))
    x = markov_sample(src, length, seed)
    res, dec, mism = roundtrip(x, Y, t, cfg)
    out += [(p + "source", name), (p + "seed", seed), (p + "length", length),
            (p + "entropy_rate", markov_entropy(src))]
    if kind == "roundtrip":
        d = res.diagnostics
        out += [(p + "w", list(res.scheme.w)), (p + "M", res.scheme.M),
                (p + "a_length", len(res.scheme.a)), (p + "N", res.scheme.N),
                (p + "L", d["L"]), (p + "markers", d["markers"]), (p + "mu_A", d["mu_A"]),
                (p + "ext_len", d["ext_len"]), (p + "sigma", str(res.sigma)),
                (p + "f_hat", float(dec.recovery.f_hat)), (p + "margin", float(dec.recovery.margin)),
                (p + "interior", len(res.interior)),
                (p + "interior_fraction", len(res.interior) / length),
                (p + "mismatches", mism),
                (p + "marker_purity", marker_purity(res.y, res.scheme.w, res.idx.I1, res.interior)),
                (p + "admissible", admissible_on(res.y, Y, res.interior)),
                (p + "dictionary_sha256", code_digest(res.code).hex()),
                (p + "psi_sha256", hashlib.sha256(res.psi_artifact).hexdigest()),
                (p + "y_sha256", hashlib.sha256(res.y.symbols.tobytes()).hexdigest())]
    else:
        est = params.get("estimator", "plugin")
        ab = abramov_for(x, res, cfg.k, est)
        out += [(p + "estimator", est), (p + "h_itinerary", ab.h_itinerary),
                (p + "h_sample", ab.h_sample), (p + "mu_A", ab.mu_A),
                (p + "predicted", ab.predicted), (p + "relative_gap", ab.relative_gap)]
    return out


def run_experiment(path: str, jobs: int = 1) -> str:
    """Run every trial of the spec at ``path`` and return the report text.

    With ``jobs > 1`` trials run in worker processes; the report is assembled
    in trial order either way, so the text does not depend on ``jobs``.
    """
    spec, raw, base_dir = load_spec(path)
    trials = spec.get("trials", [])
    header = [("report", f"sftembed-experiment {REPORT_VERSION}"),
              ("spec-sha256", hashlib.sha256(raw).hexdigest()),
              ("trials", len(trials))]
    work = [(spec, base_dir, i, tr) for i, tr in enumerate(trials)]
    if jobs > 1 and len(work) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(_run_trial, work))
    else:
        results = [_run_trial(w) for w in work]
    return format_report(header + [kv for r in results for kv in r])
