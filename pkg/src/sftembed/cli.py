"""Command-line front end.

Exit codes: 0 success, 2 parse error, 3 precondition error, 4 corruption,
5 internal error.
"""
from __future__ import annotations

import argparse
import sys

import numpy as np

from .errors import EmbeddingError, InputError, ParseError
from .experiment import resolve, run_experiment
from .measures import (SymbolicSample, format_sample, markov_sample, parse_markov, parse_sample,
                       sample_entropy, t_slice_filter)
from .pipeline import (Config, admissible_on, base_shift, decode_report, encode, marker_purity)
from .report import format_report
from .sft import (entropy, find_marker, format_sft, is_mixing, parse_sft, period,
                  restrict_forbidden, transition_length)


def _read(path: str) -> str:
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None


def _load_sft(path):
    return parse_sft(_read(resolve(path, None)))


def _load_input(path, length, seed) -> SymbolicSample:
    """A sample file, or a Markov source file sampled with ``--length``/``--seed``."""
    text = _read(resolve(path, None))
    head = text.lstrip().split(None, 1)[0] if text.strip() else ""
    if head == "markov":
        return markov_sample(parse_markov(text), length, seed)
    if head == "sample":
        return parse_sample(text)
    raise ParseError(f"{path}: expected a 'markov' or 'sample' file")


def _write(path, data):
    mode = "wb" if isinstance(data, bytes) else "w"
    with open(path, mode) as fh:
        fh.write(data)


def _config(args) -> Config:
    return Config(t=args.t, k=args.k, n_max=args.n_max, seed=args.seed,
                  min_markers=args.min_markers, psi_path=getattr(args, "psi", None),
                  out_path=getattr(args, "out", None))


def cmd_entropy(args):
    print(f"{entropy(_load_sft(args.sft)):.12f}")


def cmd_mixing(args):
    Y = _load_sft(args.sft)
    mixing = is_mixing(Y)
    pairs = [("mixing", mixing), ("period", period(Y))]
    if mixing:
        pairs.append(("transition_length", transition_length(Y)))
    sys.stdout.write(format_report(pairs))


def cmd_marker(args):
    Y = _load_sft(args.sft)
    w, Yw = find_marker(Y, args.t, args.max_len)
    sys.stdout.write(format_report([
        ("w", str(w)), ("length", len(w)), ("entropy", entropy(Yw)),
        ("vertices", Yw.num_vertices), ("transition_length", transition_length(Yw))]))


def cmd_restrict(args):
    Y = _load_sft(args.sft)
    text = format_sft(restrict_forbidden(Y, args.word), labels=True)
    if args.out:
        _write(args.out, text)
    else:
        sys.stdout.write(text)


def cmd_encode(args):
    if not args.psi or not args.out:
        raise InputError("encode needs --psi and --out")
    Y = _load_sft(args.sft)
    x = _load_input(args.input, args.length, args.seed)
    res = encode(x, Y, args.t, _config(args))
    _write(args.out, format_sample(res.y))
    _write(args.psi, res.psi_artifact)
    d = res.diagnostics
    sys.stdout.write(format_report([
        ("length", len(x)), ("w", list(res.scheme.w)), ("M", res.scheme.M),
        ("N", res.scheme.N), ("L", d["L"]), ("markers", d["markers"]),
        ("sigma", str(res.sigma)), ("interior", f"{res.interior.start} {res.interior.stop}")]))


def cmd_decode(args):
    if not args.psi:
        raise InputError("decode needs --psi")
    Y = base_shift(_load_sft(args.sft))
    y = parse_sample(_read(args.input), alphabet=Y.alphabet)
    with open(args.psi, "rb") as fh:
        psi = fh.read()
    rep = decode_report(y, Y, args.t, psi, _config(args))
    xh = rep.x_hat.window(rep.interior.start, rep.interior.stop)
    if args.out:
        _write(args.out, format_sample(xh))
    sys.stdout.write(format_report([
        ("interior", f"{rep.interior.start} {rep.interior.stop}"), ("markers", len(rep.I1)),
        ("sigma", str(rep.sigma)), ("margin", float(rep.recovery.margin))]))


def cmd_roundtrip(args):
    Y = base_shift(_load_sft(args.sft))
    x = _load_input(args.input, args.length, args.seed)
    cfg = _config(args)
    res = encode(x, Y, args.t, cfg)
    rep = decode_report(res.y, Y, args.t, res.psi_artifact, cfg)
    lo, hi = rep.interior.start, rep.interior.stop
    mism = int(np.count_nonzero(x.window(lo, hi).symbols != rep.x_hat.window(lo, hi).symbols))
    d = res.diagnostics
    sys.stdout.write(format_report([
        ("length", len(x)), ("seed", args.seed), ("t", args.t), ("h_x", d["h_x"]),
        ("w", list(res.scheme.w)), ("M", res.scheme.M), ("N", res.scheme.N), ("L", d["L"]),
        ("markers", d["markers"]), ("mu_A", d["mu_A"]), ("sigma", str(res.sigma)),
        ("f_hat", float(rep.recovery.f_hat)), ("margin", float(rep.recovery.margin)),
        ("interior", hi - lo), ("interior_fraction", (hi - lo) / len(x)),
        ("marker_purity", marker_purity(res.y, res.scheme.w, res.idx.I1, res.interior)),
        ("admissible", admissible_on(res.y, Y, res.interior)), ("mismatches", mism)]))
    return 0 if mism == 0 else 4


def cmd_slice(args):
    samples = [parse_sample(_read(p)) for p in args.samples]
    kept, _ = t_slice_filter(samples, args.t, args.k)
    kept_ids = {id(s) for s in kept}
    pairs = []
    for p, s in zip(args.samples, samples):
        pairs += [(f"{p}.entropy", sample_entropy(s, args.k)), (f"{p}.kept", id(s) in kept_ids)]
    pairs += [("kept", len(kept)), ("discarded", len(samples) - len(kept))]
    sys.stdout.write(format_report(pairs))


def cmd_experiment(args):
    text = run_experiment(args.spec, jobs=args.jobs)
    if args.out:
        _write(args.out, text)
    else:
        sys.stdout.write(text)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="sftembed", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, t_required=True):
        p.add_argument("--t", type=float, required=t_required, default=0.35)
        p.add_argument("--seed", type=int, default=1)
        p.add_argument("--length", type=int, default=1_000_000)
        p.add_argument("--n-max", dest="n_max", type=int, default=3)
        p.add_argument("--k", type=int, default=3)
        p.add_argument("--min-markers", dest="min_markers", type=int, default=2000)
        p.add_argument("--psi")
        p.add_argument("--out")

    p = sub.add_parser("entropy", help="topological entropy of an SFT file")
    p.add_argument("sft")
    p.set_defaults(func=cmd_entropy)
    p = sub.add_parser("mixing", help="mixing test, period and transition length")
    p.add_argument("sft")
    p.set_defaults(func=cmd_mixing)
    p = sub.add_parser("marker", help="first marker word w with h(Y_w) > t")
    p.add_argument("sft")
    p.add_argument("--t", type=float, required=True)
    p.add_argument("--max-len", dest="max_len", type=int, default=8)
    p.set_defaults(func=cmd_marker)
    p = sub.add_parser("restrict", help="write the SFT of points avoiding a word")
    p.add_argument("sft")
    p.add_argument("word")
    p.add_argument("--out")
    p.set_defaults(func=cmd_restrict)
    for name, func, helptext in (("encode", cmd_encode, "embed a sample or Markov source"),
                                 ("roundtrip", cmd_roundtrip, "encode, decode and compare")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("input")
        p.add_argument("sft")
        common(p, t_required=False)
        p.set_defaults(func=func)
    p = sub.add_parser("decode", help="decode an output sample with its psi artifact")
    p.add_argument("input")
    p.add_argument("sft")
    common(p, t_required=False)
    p.set_defaults(func=cmd_decode)
    p = sub.add_parser("slice", help="keep samples with estimated entropy below t")
    p.add_argument("samples", nargs="+")
    p.add_argument("--t", type=float, required=True)
    p.add_argument("--k", type=int, default=3)
    p.set_defaults(func=cmd_slice)
    p = sub.add_parser("experiment", help="run a JSON experiment spec")
    p.add_argument("spec")
    p.add_argument("--out")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_experiment)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        code = args.func(args)
    except EmbeddingError as exc:
        print(f"error: {exc}", file=sys.stderr)
        for k, v in sorted(exc.details.items()):
            print(f"{k}: {v}", file=sys.stderr)
        return exc.exit_code
    except Exception as exc:  # noqa: BLE001 - report every internal failure as exit 5
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 5
    return code or 0


if __name__ == "__main__":
    sys.exit(main())
