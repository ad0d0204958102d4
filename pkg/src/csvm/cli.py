"""``csvm`` command line: gen, train, predict, eval, cv, experiment, sweep.

Exit codes: 0 success, 1 runtime failure, 2 usage or validation error.
Machine-readable results go to stdout; progress goes to stderr.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .classifier import (
    Boundary,
    Hyperparams,
    TrainingError,
    evaluate,
    load_model,
    save_model,
    train_multiclass,
    with_preprocessing,
)
from .data import (
    Dataset,
    DataError,
    Domain,
    SyntheticSpec,
    align_classes,
    apply_pca,
    apply_standardizer,
    concat,
    fit_pca,
    fit_standardizer,
    load_csv,
    load_dataset,
    make_shifted_gaussians,
    write_libsvm,
)
from .experiment import ConfigError, load_config, run_experiment, run_sweep
from .model_selection import HyperGrid, default_grid, loo_cv, write_cv_table


class UsageError(Exception):
    pass


def _progress(label):
    def report(done, total):
        print(f"{label}: {done}/{total}", file=sys.stderr, flush=True)

    return report


def _positive(flag):
    def parse(text):
        try:
            val = float(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"{flag} expects a number, got {text!r}") from None
        if not math.isfinite(val) or val <= 0:
            raise argparse.ArgumentTypeError(f"{flag} must be a finite value > 0, got {text}")
        return val

    return parse


def _nonnegative(flag):
    def parse(text):
        try:
            val = float(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"{flag} expects a number, got {text!r}") from None
        if not math.isfinite(val) or val < 0:
            raise argparse.ArgumentTypeError(f"{flag} must be a finite value >= 0, got {text}")
        return val

    return parse


def _add_data_args(p, *names):
    for name in names:
        p.add_argument(f"--{name}", required=True, help=f"{name} data file (libsvm or .csv)")
    p.add_argument("--format", choices=["libsvm", "csv"], help="default: by file suffix")
    p.add_argument("--label-column", type=int, default=0, help="CSV label column (default 0)")
    p.add_argument("--header", action="store_true", help="CSV files have a header row")


def _add_solver_args(p):
    p.add_argument("--strategy", choices=["ova", "ovo"], default="ova")
    p.add_argument("--tol", type=_positive("--tol"), default=1e-6)
    p.add_argument("--max-epochs", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)


def _load(args, path, domain, dim=None) -> Dataset:
    return load_dataset(path, domain, args.format, args.label_column, args.header, dim)


def _load_pair(args):
    src = _load(args, args.source, Domain.SOURCE)
    tgt = _load(args, args.target, Domain.TARGET)
    if src.dim != tgt.dim:
        width = max(src.dim, tgt.dim)
        src, tgt = (d.with_features(np.pad(d.X, ((0, 0), (0, width - d.dim)))) for d in (src, tgt))
    return align_classes(src, tgt)


def _load_grid(path) -> HyperGrid:
    if path is None:
        return default_grid()
    try:
        doc = json.loads(Path(path).read_text())
        return HyperGrid.from_dict(doc.get("grid", doc))
    except (OSError, json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise UsageError(f"--grid {path}: {exc}") from None


def _preprocess(args, src, tgt):
    scaler = pca = None
    if args.standardize:
        scaler = fit_standardizer(concat(src, tgt))
        src, tgt = apply_standardizer(scaler, src), apply_standardizer(scaler, tgt)
    if args.pca:
        pca = fit_pca(concat(src, tgt), args.pca)
        src, tgt = apply_pca(pca, src), apply_pca(pca, tgt)
    return src, tgt, scaler, pca


def cmd_train(args):
    src, tgt = _load_pair(args)
    src, tgt, scaler, pca = _preprocess(args, src, tgt)
    base = Hyperparams(args.lam, args.cs, args.ct, args.tol, args.max_epochs, args.seed)
    out = {"model": str(args.out)}
    if args.cv:
        cv = loo_cv(src, tgt, _load_grid(args.grid), args.strategy, base,
                    progress=_progress("cv grid points"))
        base = cv.best
        table = Path(args.cv_out) if args.cv_out else Path(args.out).with_suffix(".cv.csv")
        write_cv_table(cv, table)
        out["cv"] = {"best": cv.best.to_dict(), "loo_accuracy": cv.best_accuracy,
                     "table": str(table)}
    model = train_multiclass(src, tgt, base, args.strategy)
    model = with_preprocessing(model, scaler, pca)
    save_model(model, args.out, include_alphas=args.alphas)
    out["hyperparams"] = base.to_dict()
    out["warnings"] = list(model.warnings)
    out["binaries"] = [
        {"key": list(k), "duality_gap": b.diagnostics.duality_gap,
         "kkt_violation": b.diagnostics.kkt_violation,
         "coupling_distance": b.diagnostics.coupling_distance,
         "n_support": b.diagnostics.n_support,
         "n_support_source": b.diagnostics.n_support_source,
         "n_support_target": b.diagnostics.n_support_target,
         "converged": b.diagnostics.converged}
        for k, b in ((k, model.binaries[k]) for k in model.keys())
    ]
    print(json.dumps(out, indent=2))
    return 0


def _read_inputs(args, model) -> np.ndarray:
    path = Path(args.input)
    text = path.read_text()
    if not text.strip():
        return np.zeros((0, model.dim))
    fmt = args.format or ("csv" if path.suffix.lower() == ".csv" else "libsvm")
    if fmt == "libsvm":
        return load_dataset(path, Domain.TARGET, "libsvm", dim=model.dim).X
    if args.label_column is None:
        rows = [r for r in csv.reader(text.splitlines()) if r]
        if args.header:
            rows = rows[1:]
        try:
            return np.array([[float(c) for c in r] for r in rows], dtype=float).reshape(len(rows), -1)
        except ValueError:
            raise DataError(f"{path}: non-numeric cell") from None
    return load_csv(path, args.label_column, Domain.TARGET, header=args.header).X


def cmd_predict(args):
    model = load_model(args.model)
    X = _read_inputs(args, model)
    if len(X) and X.shape[1] != model.dim:
        raise DataError(f"model expects {model.dim} features, input has {X.shape[1]}")
    keys = model.keys()
    out = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        if len(X):
            w = csv.writer(out)
            w.writerow(["row", "label"] + ["score_" + "_".join(map(str, k)) for k in keys])
            scores = model.decision_function(X, args.boundary)
            labels = model.predict_raw(X, args.boundary)
            for i, (lab, s) in enumerate(zip(labels, scores)):
                w.writerow([i, lab.item()] + [repr(float(v)) for v in s])
    finally:
        if args.out:
            out.close()
    return 0


def cmd_eval(args):
    model = load_model(args.model)
    test = _load(args, args.test, Domain.TARGET, dim=model.dim if args.format != "csv" else None)
    acc = evaluate(model, test, args.boundary)
    print(json.dumps({"accuracy": acc, "n": len(test), "boundary": args.boundary}))
    return 0


def cmd_cv(args):
    src, tgt = _load_pair(args)
    src, tgt, _, _ = _preprocess(args, src, tgt)
    base = Hyperparams(tol=args.tol, max_epochs=args.max_epochs, seed=args.seed)
    cv = loo_cv(src, tgt, _load_grid(args.grid), args.strategy, base,
                progress=_progress("cv grid points"))
    write_cv_table(cv, args.out)
    print(json.dumps({"best": cv.best.to_dict(), "loo_accuracy": cv.best_accuracy,
                      "fold_count": cv.fold_count, "table": str(args.out)}, indent=2))
    return 0


def cmd_experiment(args):
    config, _ = load_config(args.config)
    report = run_experiment(config, args.threads, progress=_progress("splits"))
    path, splits = report.write(args.out_dir)
    summary = {m: {"mean": v["mean"], "stderr": v["stderr"]} for m, v in report.methods.items()}
    print(json.dumps({"report": str(path), "splits": str(splits), "methods": summary}, indent=2))
    return 0


def cmd_sweep(args):
    config, sweep_cfg = load_config(args.config)
    axis = args.axis or sweep_cfg.get("axis")
    values = args.values or sweep_cfg.get("values")
    if not axis or not values:
        raise UsageError("sweep needs --axis and --values (or a 'sweep' config section)")
    ratio = args.source_per_target or sweep_cfg.get("source_per_target")
    result = run_sweep(config, axis, values, args.threads, ratio,
                       progress=lambda msg: print(msg, file=sys.stderr, flush=True))
    result.write_csv(args.out)
    for note in result.warnings:
        print(f"warning: {note}", file=sys.stderr)
    print(json.dumps({"curves": str(args.out), "points": len(result.rows),
                      "warnings": result.warnings}, indent=2))
    return 0


def cmd_gen(args):
    if args.config:
        config, _ = load_config(args.config)
        spec_doc = config.data.get("synthetic")
        if spec_doc is None:
            raise UsageError("--config has no synthetic data section")
        seed = config.data.get("seed", config.base_seed) if args.seed is None else args.seed
    else:
        spec_doc = json.loads(Path(args.spec).read_text())
        seed = 0 if args.seed is None else args.seed
    data = make_shifted_gaussians(SyntheticSpec.from_dict(spec_doc), seed)
    for dom, path in ((Domain.SOURCE, args.source_out), (Domain.TARGET, args.target_out)):
        part = data.domain(dom)
        if args.format == "csv":
            with open(path, "w", newline="") as fh:
                w = csv.writer(fh)
                for x, y in zip(part.X, part.raw_labels()):
                    w.writerow([y.item()] + [repr(float(v)) for v in x])
        else:
            write_libsvm(part, path)
    print(json.dumps({"source": str(args.source_out), "target": str(args.target_out),
                      "seed": seed, "n_source": data.n_source, "n_target": data.n_target}))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="csvm", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="emit a synthetic two-domain dataset")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--spec", help="JSON synthetic spec")
    g.add_argument("--config", help="experiment config with a data.synthetic section")
    p.add_argument("--seed", type=int)
    p.add_argument("--source-out", required=True)
    p.add_argument("--target-out", required=True)
    p.add_argument("--format", choices=["libsvm", "csv"], default="libsvm")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("train", help="train a multiclass coupled SVM")
    _add_data_args(p, "source", "target")
    p.add_argument("--lambda", dest="lam", type=_nonnegative("--lambda"), default=1.0)
    p.add_argument("--cs", type=_positive("--cs"), default=1.0, help="source cost C_s")
    p.add_argument("--ct", type=_positive("--ct"), default=1.0, help="target cost C_t")
    p.add_argument("--cv", action="store_true", help="pick lambda/C_s/C_t by leave-one-out")
    p.add_argument("--grid", help="JSON grid (lambdas, c_sources, c_targets)")
    p.add_argument("--cv-out", help="CV table CSV (default: next to --out)")
    p.add_argument("--standardize", action="store_true")
    p.add_argument("--pca", type=int, help="reduce to this many principal components")
    p.add_argument("--alphas", action="store_true", help="store dual variables in the model")
    p.add_argument("--out", required=True)
    _add_solver_args(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="decode labels and scores for a feature file")
    p.add_argument("--model", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--format", choices=["libsvm", "csv"])
    p.add_argument("--label-column", type=int, default=None,
                   help="CSV column to drop as a label (default: no label column)")
    p.add_argument("--header", action="store_true")
    p.add_argument("--boundary", choices=["source", "target"], default="target")
    p.add_argument("--out", help="CSV output (default stdout)")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("eval", help="accuracy of a model on labeled data")
    p.add_argument("--model", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--format", choices=["libsvm", "csv"])
    p.add_argument("--label-column", type=int, default=0)
    p.add_argument("--header", action="store_true")
    p.add_argument("--boundary", choices=["source", "target"], default="target")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("cv", help="leave-one-out grid search over the target data")
    _add_data_args(p, "source", "target")
    p.add_argument("--grid")
    p.add_argument("--standardize", action="store_true")
    p.add_argument("--pca", type=int)
    p.add_argument("--out", required=True, help="CV table CSV")
    _add_solver_args(p)
    p.set_defaults(func=cmd_cv)

    for name, func, helptext in (("experiment", cmd_experiment, "repeated-split experiment"),
                                 ("sweep", cmd_sweep, "sample-count sweep")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--config", required=True)
        p.add_argument("--threads", type=int, default=None, help="worker processes (default: all cores)")
        if name == "experiment":
            p.add_argument("--out-dir", required=True)
        else:
            p.add_argument("--axis", choices=["source_count", "target_count", "both"])
            p.add_argument("--values", type=lambda s: [int(v) for v in s.split(",")])
            p.add_argument("--source-per-target", type=_positive("--source-per-target"))
            p.add_argument("--out", required=True)
        p.set_defaults(func=func)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "threads", None) is not None and args.threads < 1:
        parser.error("--threads must be >= 1")
    if getattr(args, "max_epochs", 1) < 1:
        parser.error("--max-epochs must be >= 1")
    if getattr(args, "pca", None) is not None and args.pca < 1:
        parser.error("--pca must be >= 1")
    try:
        return args.func(args)
    except (UsageError, ConfigError, DataError, FileNotFoundError) as exc:
        print(f"csvm {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except (TrainingError, ValueError, RuntimeError) as exc:
        print(f"csvm {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
