"""Command-line entry point: ``textinfluence <command> [options]``.

Commands: synth, train-aligner, explain, evaluate, gen-bank. Each run writes
a manifest JSON next to its primary output. Exit status is 0 on success,
1 on numeric/runtime failure and 2 on invalid input or usage.
"""

import argparse
import datetime
import json
import logging
import os
import sys
import time

import numpy as np

from . import __version__, jsonio
from .aligner import DEFAULT_RIDGE, AffineAligner, AlignmentDataset, mse, train_aligner
from .conceptbank_gen import (GenConfig, ScriptedClient, api_key_from_env, attach_embeddings,
                              generate_concepts)
from .errors import DimMismatch, TextInfluenceError, ValidationError
from .evaluation import CURVE_TOP_K, evaluate_samples, report_document
from .explainer import METHODS, ConceptBank, explain
from .heads import load_head
from .influence import DegenerateDirection, direction_closed_form, direction_finite_diff
from .metrics import DEFAULT_RHOS, CurveConfig, write_curves_csv
from .modelio import GENERATOR, GENERATOR_VERSION, load_samples, read_features, save_bundle, synth_world

log = logging.getLogger("textinfluence")

MANIFEST_VERSION = 1


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(2)


def _now():
    # SOURCE_DATE_EPOCH pins timestamps for reproducible manifests
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    t = float(epoch) if epoch else time.time()
    return datetime.datetime.fromtimestamp(t, datetime.timezone.utc).isoformat()


def _config_echo(args):
    return {k: v for k, v in sorted(vars(args).items())
            if k not in ("func", "api_key") and not callable(v)}


def write_manifest(path, args, inputs, outputs, started):
    jsonio.dump({
        "manifest_version": MANIFEST_VERSION,
        "command": args.command,
        "tool_version": __version__,
        "inputs": inputs,
        "outputs": outputs,
        "seed": getattr(args, "seed", None),
        "generator": {"name": GENERATOR, "version": GENERATOR_VERSION},
        "config": _config_echo(args),
        "timestamps": {"started": started, "finished": _now()},
    }, path)


def _manifest_path(out):
    return out + ".manifest.json"


def _floats(text):
    try:
        return tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _ints(text):
    try:
        return tuple(int(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _methods(text):
    ms = tuple(m.strip() for m in text.split(",") if m.strip())
    if text == "all":
        return METHODS
    bad = [m for m in ms if m not in METHODS]
    if bad or not ms:
        raise argparse.ArgumentTypeError(f"unknown method(s) {bad}; choose from {METHODS}")
    return ms


def cmd_synth(args):
    started = _now()
    bundle = synth_world(args.seed, args.d, args.m, args.classes, args.samples, args.bank_size,
                         n_train=args.train_size, noise=args.noise, head_type=args.head,
                         hidden=args.hidden, planted=args.planted)
    paths = save_bundle(bundle, args.out)
    write_manifest(os.path.join(args.out, "manifest.json"), args, {}, paths, started)
    print(f"wrote synthetic world to {args.out}: {args.samples} samples, d={args.d}, "
          f"m={args.m}, C={args.classes}")
    return 0


def cmd_train_aligner(args):
    started = _now()
    X = read_features(args.features)
    Y = read_features(args.targets)
    if X.shape[0] != Y.shape[0]:
        raise DimMismatch(f"features have {X.shape[0]} rows but targets have {Y.shape[0]}")
    if not 0 <= args.holdout < 1:
        raise ValidationError("--holdout must be in [0, 1)")
    n = X.shape[0]
    n_hold = int(round(args.holdout * n))
    order = np.random.Generator(np.random.PCG64(args.seed)).permutation(n) if n_hold else np.arange(n)
    train_idx, hold_idx = order[n_hold:], order[:n_hold]
    if train_idx.size == 0:
        raise ValidationError("holdout fraction leaves no training rows")
    train = AlignmentDataset(X[train_idx], Y[train_idx])
    al = train_aligner(train, args.ridge)
    al.save(args.out)
    train_mse = mse(al, train)
    print(f"train_mse={train_mse:.17g}")
    metrics = {"train_mse": train_mse, "n_train": int(train_idx.size)}
    if n_hold:
        hold_mse = mse(al, AlignmentDataset(X[hold_idx], Y[hold_idx]))
        print(f"holdout_mse={hold_mse:.17g}")
        metrics.update(holdout_mse=hold_mse, n_holdout=int(n_hold))
    write_manifest(_manifest_path(args.out), args,
                   {"features": args.features, "targets": args.targets},
                   {"aligner": args.out, "metrics": metrics}, started)
    return 0


def cmd_explain(args):
    started = _now()
    Z = read_features(args.features)
    if not 0 <= args.row < Z.shape[0]:
        raise ValidationError(f"--row {args.row} outside features with {Z.shape[0]} rows")
    z = Z[args.row]
    al = AffineAligner.load(args.aligner)
    head = load_head(args.head)
    bank = ConceptBank.load(args.bank)
    c = head.class_index(args.class_)
    exps = explain(args.method, bank, al, head, c, z, args.top_k, seed=args.seed)
    lines = [jsonio.dumps(x.to_json(args.method)) for x in exps]
    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    verify = None
    if args.verify:
        worst = 0.0
        for e in bank.entries:
            try:
                raw = direction_closed_form(al, z, e.embedding).raw
            except DegenerateDirection:
                continue
            fd = direction_finite_diff(al, z, e.embedding, args.fd_delta)
            worst = max(worst, float(np.linalg.norm(raw - fd) / np.linalg.norm(raw)))
        verify = {"max_rel_err": worst, "fd_delta": args.fd_delta}
        print(f"max_rel_err={worst:.6g}", file=sys.stderr)
    inputs = {"features": args.features, "aligner": args.aligner, "head": args.head,
              "bank": args.bank}
    if args.out:
        write_manifest(_manifest_path(args.out), args, inputs,
                       {"explanations": args.out, "verify": verify}, started)
    return 0


def cmd_evaluate(args):
    started = _now()
    samples = load_samples(args.samples)
    al = AffineAligner.load(args.aligner)
    head = load_head(args.head)
    metrics = set(args.metrics)
    unknown = metrics - {"ds", "curves"}
    if unknown:
        raise ValidationError(f"unknown metrics {sorted(unknown)}; choose from ds, curves")
    curve_cfg = None
    ks = set(args.top_k)
    if "curves" in metrics:
        curve_cfg = CurveConfig(args.rhos, use_margin_confidence=not args.raw_logits)
        ks.add(args.curve_top_k)
    jobs = args.jobs or os.cpu_count() or 1
    reports = evaluate_samples(samples, al, head, args.method, sorted(ks), curve_cfg,
                               seed=args.seed, jobs=jobs)
    doc = report_document(reports, curve_cfg, args.curve_top_k)
    doc["n_samples"] = len(samples)
    jsonio.dump(doc, args.out)
    outputs = {"report": args.out}
    if curve_cfg is not None and args.csv:
        write_curves_csv([r for r in reports if r.top_k == args.curve_top_k], args.csv)
        outputs["csv"] = args.csv
    for method, row in doc["table"].items():
        cells = "  ".join(f"{k}: mean={v['mean']:+.4f} nr={v['nr']:.3f}" for k, v in row.items())
        print(f"{method:>10}  {cells}")
    write_manifest(_manifest_path(args.out), args,
                   {"samples": args.samples, "aligner": args.aligner, "head": args.head},
                   outputs, started)
    return 0


def cmd_gen_bank(args):
    started = _now()
    cfg = GenConfig(args.endpoint, api_key_from_env(), args.model, args.llm_count,
                    args.vlm_count, args.batch_size, args.max_retries, args.timeout, args.backoff)
    client = None
    if args.mock_script:
        with open(args.mock_script, encoding="utf-8") as fh:
            client = ScriptedClient(json.load(fh))
    modes = ("llm", "vlm") if args.mode == "both" else (args.mode,)
    pairs = generate_concepts(cfg, args.class_name, args.image, client, modes)
    texts = [t for t, _ in pairs]
    sources = [s for _, s in pairs]
    meta = {"model": args.model, "decoding": "endpoint defaults", "modes": list(modes)}
    if args.embeddings:
        bank = attach_embeddings(texts, args.embeddings, sources, args.class_name,
                                 args.sample_id, meta)
        bank.save(args.out)
    else:
        jsonio.dump({"class": args.class_name, "sample_id": args.sample_id, "metadata": meta,
                     "concepts": [{"text": t, "source": s} for t, s in pairs]}, args.out)
    print(f"collected {len(texts)} concepts for {args.class_name!r}")
    inputs = {"embeddings": args.embeddings, "image": args.image,
              "mock_script": args.mock_script}
    write_manifest(_manifest_path(args.out), args, inputs, {"bank": args.out}, started)
    return 0


def build_parser():
    p = _Parser(prog="textinfluence", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("synth", help="write a synthetic fixture world")
    s.add_argument("--out", required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--d", type=int, default=16, help="classifier feature dim")
    s.add_argument("--m", type=int, default=12, help="joint embedding dim")
    s.add_argument("--classes", type=int, default=3)
    s.add_argument("--samples", type=int, default=50)
    s.add_argument("--bank-size", type=int, default=20)
    s.add_argument("--train-size", type=int, default=None)
    s.add_argument("--noise", type=float, default=0.0)
    s.add_argument("--head", choices=("mlp", "linear"), default="mlp")
    s.add_argument("--hidden", type=int, default=16)
    s.add_argument("--planted", type=int, default=1, help="planted positive concepts per sample")
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("train-aligner", help="fit the affine aligner by least squares")
    s.add_argument("--features", required=True)
    s.add_argument("--targets", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--ridge", type=float, default=DEFAULT_RIDGE)
    s.add_argument("--holdout", type=float, default=0.0)
    s.add_argument("--seed", type=int, default=0, help="seed for the holdout split")
    s.set_defaults(func=cmd_train_aligner)

    s = sub.add_parser("explain", help="rank a concept bank for one feature vector")
    s.add_argument("--features", required=True)
    s.add_argument("--row", type=int, default=0)
    s.add_argument("--aligner", required=True)
    s.add_argument("--head", required=True)
    s.add_argument("--bank", required=True)
    s.add_argument("--class", dest="class_", required=True, help="class index or name")
    s.add_argument("--method", choices=METHODS, default="faithtrace")
    s.add_argument("--top-k", type=int, default=3)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--verify", action="store_true",
                   help="check closed-form directions against finite differences")
    s.add_argument("--fd-delta", type=float, default=1e-6)
    s.add_argument("--out", default=None, help="JSON-lines output (default stdout)")
    s.set_defaults(func=cmd_explain)

    s = sub.add_parser("evaluate", help="directional-score and influence-curve evaluation")
    s.add_argument("--samples", required=True)
    s.add_argument("--aligner", required=True)
    s.add_argument("--head", required=True)
    s.add_argument("--method", type=_methods, default=METHODS)
    s.add_argument("--top-k", type=_ints, default=(1, 3, 5))
    s.add_argument("--metrics", type=lambda t: tuple(t.split(",")), default=("ds", "curves"))
    s.add_argument("--rhos", type=_floats, default=DEFAULT_RHOS)
    s.add_argument("--curve-top-k", type=int, default=CURVE_TOP_K)
    s.add_argument("--raw-logits", action="store_true",
                   help="curves on the raw class logit instead of margin confidence")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--jobs", type=int, default=0, help="worker threads (default: CPU count)")
    s.add_argument("--out", required=True)
    s.add_argument("--csv", default=None)
    s.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("gen-bank", help="generate concept texts via a chat endpoint")
    s.add_argument("--class-name", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--endpoint", default="http://localhost:8000")
    s.add_argument("--model", default="gpt-3.5-turbo")
    s.add_argument("--mode", choices=("llm", "vlm", "both"), default="both")
    s.add_argument("--llm-count", type=int, default=100)
    s.add_argument("--vlm-count", type=int, default=30)
    s.add_argument("--batch-size", type=int, default=10)
    s.add_argument("--max-retries", type=int, default=3)
    s.add_argument("--timeout", type=float, default=60.0)
    s.add_argument("--backoff", type=float, default=1.0)
    s.add_argument("--image", default=None)
    s.add_argument("--embeddings", default=None, help="FTM1 file, one row per generated text")
    s.add_argument("--sample-id", default=None)
    s.add_argument("--mock-script", default=None,
                   help="JSON array of canned responses used instead of the endpoint")
    s.add_argument("--seed", type=int, default=None)
    s.set_defaults(func=cmd_gen_bank)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except TextInfluenceError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except (ValueError, KeyError) as exc:
        print(f"error: invalid input: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
