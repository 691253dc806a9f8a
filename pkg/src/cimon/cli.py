"""Command-line pipeline: synthesize data, mine similarity graphs, train the
hashing head, encode features, evaluate retrieval, probe robustness, run the
ablation ladder, and render result CSVs to SVG.

Every subcommand is a pure function of (inputs, flags, seed): re-running with
the same arguments reproduces every output file byte for byte. Each run
writes a ``manifest.json`` listing the resolved configuration and all output
files. ``CIMON_THREADS`` caps the worker threads used by ``ablate``.

Exit codes: 0 success, 2 invalid flags or inputs, 1 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__, evalkit, hashnet, ingest, simgraph, svgplot, trainer
from .errors import (
    CimonError,
    CodeLengthMismatch,
    EmptyDatabase,
    GridOutOfRange,
    IndexOutOfRange,
    InsufficientPairs,
    MalformedHeader,
    NonFiniteValue,
    ShapeMismatch,
    ZeroRow,
)

_VALIDATION_ERRORS = (
    MalformedHeader, ShapeMismatch, NonFiniteValue, ZeroRow, GridOutOfRange,
    CodeLengthMismatch, EmptyDatabase, InsufficientPairs, IndexOutOfRange,
    ValueError, FileNotFoundError, IsADirectoryError,
)


def load_run_config(path):
    """Flat key=value run-config file -> argv tokens.

    Keys are flag names (hyphens or underscores), one per line; ``#`` starts
    a comment. Boolean switches take true/false. Tokens are injected before
    the explicit command-line flags, so the command line wins on conflict.
    """
    tokens = []
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key=value, got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        flag = "--" + key.replace("_", "-")
        if value.lower() in ("true", "false"):
            if value.lower() == "true":
                tokens.append(flag)
        else:
            tokens.extend([flag, value])
    return tokens


def _expand_config(argv):
    """Splice `--config FILE` contents into the argv, after the subcommand."""
    if "--config" not in argv:
        return argv
    idx = argv.index("--config")
    if idx + 1 >= len(argv):
        raise ValueError("--config needs a file path")
    tokens = load_run_config(argv[idx + 1])
    rest = argv[:idx] + argv[idx + 2 :]
    return rest[:1] + tokens + rest[1:]


def _write_manifest(outdir, command, args, inputs, outputs):
    config = {k: v for k, v in vars(args).items()
              if k not in ("func", "out") and not k.startswith("_")}
    manifest = {
        "command": command,
        "version": __version__,
        "seed": getattr(args, "seed", None),
        "config": config,
        "inputs": {name: str(path) for name, path in inputs.items()},
        "outputs": sorted(outputs),
    }
    path = Path(outdir) / "manifest.json"
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def _outdir(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_views(path, noise_sigma, dropout, seed):
    """2-view files are used as-is; a 1-view base gets augmented here."""
    pair = ingest.load_feature_views(path)
    if ingest.peek_view_count(path) == 2:
        return pair, pair.view1
    cfg = ingest.AugmentConfig(noise_sigma, dropout, seed)
    return ingest.augment_features(pair.view1, cfg, ids=pair.ids), pair.view1


def _train_config(args):
    return trainer.TrainConfig(
        t=args.t,
        k_clusters=args.clusters_k,
        eta=args.eta,
        tau=args.tau,
        learning_rate=args.lr,
        momentum=args.momentum,
        batch_size=args.batch_size,
        epochs=args.epochs,
        seed=args.seed,
        code_length=int(str(args.bits).split(",")[0]),
        hidden_dims=tuple(int(h) for h in args.hidden.split(",") if h),
        use_refinement=not args.no_refinement,
        use_confidence=not args.no_confidence,
        use_semantic_consistency=not args.no_semantic_consistency,
        use_contrastive=not args.no_contrastive,
    )


def cmd_synth(args):
    out = _outdir(args)
    pair, labels = ingest.make_synthetic(args.clusters, args.per, args.dim,
                                         args.sep, args.seed)
    ingest.write_feature_views(out / "features.cimf", pair.view1, ids=pair.ids)
    ingest.write_labels(out / "labels.ciml", labels)
    _write_manifest(out, "synth", args, {},
                    ["features.cimf", "labels.ciml", "manifest.json"])
    print(f"wrote {out / 'features.cimf'} ({pair.n} items, dim {pair.d})")
    return 0


def cmd_mine(args):
    out = _outdir(args)
    views, _ = _load_views(args.features, args.noise_sigma, args.dropout,
                           args.seed)
    seeds = np.random.SeedSequence(args.seed).spawn(2)
    outputs = ["manifest.json"]
    for idx, (view, seed) in enumerate(((views.view1, seeds[0]),
                                        (views.view2, seeds[1])), start=1):
        info = simgraph.generate_semantic_info(view.astype(np.float64),
                                               args.t, args.clusters_k, seed)
        name = f"semantic_view{idx}.cims"
        simgraph.save_semantic_info(out / name, info)
        outputs.append(name)
        kept = (info.s_hat != 0).mean()
        print(f"view {idx}: modes ({info.fit.m1:.3f}, {info.fit.m2:.3f}), "
              f"{kept:.1%} of pairs kept")
    _write_manifest(out, "mine", args, {"features": args.features}, outputs)
    return 0


def cmd_train(args):
    out = _outdir(args)
    views, base = _load_views(args.features, args.noise_sigma, args.dropout,
                              args.seed)
    cfg = _train_config(args)
    encode_features = base if args.encode_base else None
    model, codes, report = trainer.train(views, cfg, encode_features)
    hashnet.save_checkpoint(out / "model.cimm", model)
    np.save(out / "codes.npy", codes)
    evalkit.write_points_csv(
        out / "train_log.csv",
        ("epoch", "psc", "csc", "cc", "total"),
        [(e, bd.psc, bd.csc, bd.cc, bd.total)
         for e, bd in enumerate(report.history)],
    )
    _write_manifest(out, "train", args, {"features": args.features},
                    ["model.cimm", "codes.npy", "train_log.csv", "manifest.json"])
    last = report.history[-1].total if report.history else float("nan")
    print(f"trained {cfg.epochs} epochs, final loss {last:.6f}, "
          f"codes {codes.shape[0]}x{codes.shape[1]}")
    return 0


def cmd_encode(args):
    out = _outdir(args)
    pair = ingest.load_feature_views(args.features)
    model = hashnet.load_checkpoint(args.model)
    features = pair.view1 if args.view == 1 else pair.view2
    codes = hashnet.encode(model, features)
    np.save(out / "codes.npy", codes)
    _write_manifest(out, "encode", args,
                    {"features": args.features, "model": args.model},
                    ["codes.npy", "manifest.json"])
    print(f"encoded {codes.shape[0]} items at {codes.shape[1]} bits")
    return 0


def cmd_eval(args):
    out = _outdir(args)
    db_codes = np.load(args.db_codes)
    db_labels = ingest.load_labels(args.db_labels)
    query_codes = np.load(args.query_codes) if args.query_codes else db_codes
    query_labels = (ingest.load_labels(args.query_labels)
                    if args.query_labels else db_labels)
    grid = tuple(int(x) for x in args.topn.split(",") if x)
    cfg = evalkit.EvalConfig(r=args.map_r, topn_grid=grid)
    report = evalkit.evaluate(query_codes, db_codes, query_labels, db_labels, cfg)
    evalkit.write_points_csv(out / "pr.csv", ("recall", "precision"),
                             report.pr_points)
    evalkit.write_points_csv(out / "topn.csv", ("n", "precision"),
                             report.topn_points)
    evalkit.write_summary_json(out / "summary.json", {
        "map": report.map,
        "queries": len(report.per_query_ap),
        "database_size": int(db_codes.shape[0]),
        "r": args.map_r if args.map_r is not None else int(db_codes.shape[0]),
    })
    inputs = {"db_codes": args.db_codes, "db_labels": args.db_labels}
    if args.query_codes:
        inputs["query_codes"] = args.query_codes
    if args.query_labels:
        inputs["query_labels"] = args.query_labels
    _write_manifest(out, "eval", args, inputs,
                    ["pr.csv", "topn.csv", "summary.json", "manifest.json"])
    print(f"MAP = {report.map:.4f} over {len(report.per_query_ap)} queries")
    return 0


def cmd_robustness(args):
    out = _outdir(args)
    pair = ingest.load_feature_views(args.features)
    model = hashnet.load_checkpoint(args.model)
    db_codes = np.load(args.db_codes)
    labels = ingest.load_labels(args.db_labels)
    noise = ingest.AugmentConfig(args.noise_sigma, args.dropout, args.seed)
    report = evalkit.robustness_eval(model, pair.view1, db_codes, labels,
                                     labels, noise, evalkit.EvalConfig())
    evalkit.write_histogram_csv(out / "hist.csv", report.changed_bits_histogram)
    evalkit.write_points_csv(out / "bit_balance.csv", ("bit", "p_plus_one"),
                             list(enumerate(report.bit_balance.tolist())))
    evalkit.write_summary_json(out / "summary.json", {
        "map_before": report.map_before,
        "map_after": report.map_after,
        "mean_changed_bits": float(report.flip_counts.mean()),
        "median_changed_bits": float(np.median(report.flip_counts)),
    })
    _write_manifest(out, "robustness", args,
                    {"features": args.features, "model": args.model,
                     "db_codes": args.db_codes, "db_labels": args.db_labels},
                    ["hist.csv", "bit_balance.csv", "summary.json",
                     "manifest.json"])
    print(f"MAP {report.map_before:.4f} -> {report.map_after:.4f}, "
          f"mean flips {report.flip_counts.mean():.3f}")
    return 0


def cmd_ablate(args):
    out = _outdir(args)
    views, _ = _load_views(args.features, args.noise_sigma, args.dropout,
                           args.seed)
    labels = ingest.load_labels(args.labels)
    base_cfg = _train_config(args)
    lengths = tuple(int(b) for b in str(args.bits).split(",") if b)
    workers = max(int(os.environ.get("CIMON_THREADS", "1")), 1)

    def run_variant(job):
        length, name, flags = job
        cfg = replace(base_cfg, code_length=length, **flags)
        _, codes, _ = trainer.train(views, cfg)
        ranked = evalkit.hamming_rank(codes, codes)
        mean_ap, _ = evalkit.mean_average_precision(ranked, labels, labels,
                                                    views.n)
        return {"variant": name, **flags, "code_length": length, "map": mean_ap}

    jobs = [(length, name, flags)
            for length in lengths for name, flags in trainer.ABLATION_VARIANTS]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(run_variant, jobs))
    else:
        rows = [run_variant(job) for job in jobs]
    header = ("variant", "use_refinement", "use_confidence",
              "use_semantic_consistency", "use_contrastive", "code_length", "map")
    evalkit.write_points_csv(out / "ablation.csv", header,
                             [[row[k] for k in header] for row in rows])
    _write_manifest(out, "ablate", args,
                    {"features": args.features, "labels": args.labels},
                    ["ablation.csv", "manifest.json"])
    for row in rows:
        print(f"{row['variant']} @ {row['code_length']} bits: "
              f"MAP = {row['map']:.4f}")
    return 0


def cmd_plot(args):
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    svgplot.plot_csv(args.input, out, kind=args.kind, title=args.title)
    manifest = {
        "command": "plot",
        "version": __version__,
        "seed": None,
        "config": {"input": str(args.input), "kind": args.kind,
                   "title": args.title},
        "inputs": {"csv": str(args.input)},
        "outputs": [out.name],
    }
    with open(str(out) + ".manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"wrote {out}")
    return 0


def _add_train_flags(sub, epochs_default=100):
    sub.add_argument("--config", metavar="FILE",
                     help="flat key=value file of these flags; explicit "
                          "command-line flags win")
    sub.add_argument("--t", type=float, default=0.1,
                     help="pseudo-graph distance threshold")
    sub.add_argument("--clusters-k", type=int, default=70,
                     help="spectral cluster count for refinement")
    sub.add_argument("--eta", type=float, default=0.3,
                     help="contrastive term weight")
    sub.add_argument("--tau", type=float, default=0.5,
                     help="contrastive temperature")
    sub.add_argument("--lr", type=float, default=0.001)
    sub.add_argument("--momentum", type=float, default=0.9)
    sub.add_argument("--batch-size", type=int, default=24)
    sub.add_argument("--epochs", type=int, default=epochs_default)
    sub.add_argument("--bits", default="16",
                     help="code length(s), comma-separated for ablate")
    sub.add_argument("--hidden", default="512",
                     help="hidden layer widths, comma-separated")
    sub.add_argument("--no-refinement", action="store_true")
    sub.add_argument("--no-confidence", action="store_true")
    sub.add_argument("--no-semantic-consistency", action="store_true")
    sub.add_argument("--no-contrastive", action="store_true")


def _add_view_flags(sub):
    sub.add_argument("--noise-sigma", type=float, default=0.5,
                     help="augmentation noise when the feature file is 1-view")
    sub.add_argument("--dropout", type=float, default=0.0,
                     help="augmentation dropout when the feature file is 1-view")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="cimon",
        description="similarity-mined consistency hashing pipeline",
    )
    parser.add_argument("--version", action="version", version=__version__)
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("synth", help="generate a synthetic cluster dataset")
    p.add_argument("--clusters", type=int, default=4)
    p.add_argument("--per", type=int, default=100)
    p.add_argument("--dim", type=int, default=32)
    p.add_argument("--sep", type=float, default=10.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = subs.add_parser("mine", help="mine per-view semantic info sidecars")
    p.add_argument("--features", required=True)
    p.add_argument("--t", type=float, default=0.1)
    p.add_argument("--clusters-k", type=int, default=70)
    p.add_argument("--seed", type=int, default=0)
    _add_view_flags(p)
    p.add_argument("-o", "--out", required=True)
    p.set_defaults(func=cmd_mine)

    p = subs.add_parser("train", help="train a hashing head")
    p.add_argument("--features", required=True)
    p.add_argument("--seed", type=int, default=0)
    _add_train_flags(p)
    _add_view_flags(p)
    p.add_argument("--encode-base", action="store_true",
                   help="binarize the un-noised base instead of view 1")
    p.add_argument("-o", "--out", required=True)
    p.set_defaults(func=cmd_train)

    p = subs.add_parser("encode", help="encode a feature file with a checkpoint")
    p.add_argument("--features", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--view", type=int, choices=(1, 2), default=1)
    p.add_argument("-o", "--out", required=True)
    p.set_defaults(func=cmd_encode)

    p = subs.add_parser("eval", help="retrieval metrics for stored codes")
    p.add_argument("--db-codes", required=True)
    p.add_argument("--db-labels", required=True)
    p.add_argument("--query-codes")
    p.add_argument("--query-labels")
    p.add_argument("--map-r", type=int, default=None,
                   help="MAP ranking cutoff (default: database size)")
    p.add_argument("--topn", default="1,5,10,20,50",
                   help="comma-separated top-N grid")
    p.add_argument("-o", "--out", required=True)
    p.set_defaults(func=cmd_eval)

    p = subs.add_parser("robustness",
                        help="query-perturbation stability of a checkpoint")
    p.add_argument("--features", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--db-codes", required=True)
    p.add_argument("--db-labels", required=True)
    p.add_argument("--noise-sigma", type=float, default=0.05)
    p.add_argument("--dropout", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--out", required=True)
    p.set_defaults(func=cmd_robustness)

    p = subs.add_parser("ablate", help="run the M1..M5 ablation ladder")
    p.add_argument("--features", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--seed", type=int, default=0)
    _add_train_flags(p)
    _add_view_flags(p)
    p.add_argument("-o", "--out", required=True)
    p.set_defaults(func=cmd_ablate)

    p = subs.add_parser("plot", help="render a result CSV to SVG")
    p.add_argument("--input", required=True)
    p.add_argument("--kind", choices=("line", "bar"), default="line")
    p.add_argument("--title", default="")
    p.add_argument("-o", "--out", required=True)
    p.set_defaults(func=cmd_plot)

    return parser


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(_expand_config(
            list(sys.argv[1:] if argv is None else argv)))
    except SystemExit as exc:
        return int(exc.code or 0)
    except _VALIDATION_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except _VALIDATION_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except CimonError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
