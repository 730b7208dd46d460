"""Command-line entry point: ``ordinalcs <subcommand> ...``.

Every subcommand builds a JSON run report. With ``--report PATH`` the report
goes to that file and a short summary to stdout; without it the report is
printed to stdout. Errors produce a report with an ``error`` payload and a
nonzero exit code.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from ._backend import BACKEND
from .bootstrap import paired_bootstrap_test
from .cost_matrices import (
    as_confusion_counts,
    ast_cost_matrix,
    matrix_from_csv,
    matrix_to_csv,
    quadratic_cost_matrix,
    row_normalize,
)
from .data_io import DEFAULT_PRIORS, SynthSpec, gen_synthetic, load_csv, save_csv
from .errors import InvalidDimensionError, InvalidInputError, OrdinalCSError, TrainingDivergedError
from .metrics import METRICS, PredictionSet, evaluate
from .trainer import Model, TrainConfig, lambda_sweep, predict_proba, resolve_cost_matrix, train

log = logging.getLogger("ordinalcs")

EXIT_OK = 0
EXIT_ERROR = 1


class CommandError(Exception):
    """Raised for bad combinations of flags that argparse cannot express."""


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


# -- report plumbing ----------------------------------------------------------


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False)


def _emit(report: dict, args) -> None:
    text = _dump(report) + "\n"
    if args.report:
        Path(args.report).write_text(text)
        if "error" not in report:
            print(report.get("summary", ""))
    else:
        sys.stdout.write(text)


def _load_checkpoint(path: str) -> tuple[Model, dict]:
    try:
        data = json.loads(Path(path).read_text())
        return Model.from_dict(data["model"]), data
    except (KeyError, TypeError, json.JSONDecodeError) as exc:
        raise InvalidInputError(f"{path}: not a checkpoint ({exc})") from None


def _dataset_for(model: Model, path: str):
    ds = load_csv(path, num_classes=model.num_classes)
    if ds.dim != model.input_dim:
        raise InvalidDimensionError(f"{path} has {ds.dim} features, checkpoint expects {model.input_dim}")
    return ds


# -- gen-data -----------------------------------------------------------------


def cmd_gen_data(args) -> dict:
    noise = None
    if args.noise_matrix and args.noise_counts:
        raise CommandError("give at most one of --noise-matrix and --noise-counts")
    if args.noise_matrix:
        noise = matrix_from_csv(args.noise_matrix)
    elif args.noise_counts:
        noise = row_normalize(matrix_from_csv(args.noise_counts))
    priors = tuple(args.priors) if args.priors is not None else DEFAULT_PRIORS
    spec = SynthSpec(
        num_classes=args.num_classes if args.num_classes is not None else len(priors),
        samples=args.samples,
        priors=priors,
        input_dim=args.input_dim,
        spacing=args.spacing,
        spread=args.spread,
        noise_matrix=noise,
        seed=args.seed,
    )
    ds = gen_synthetic(spec)
    save_csv(ds, args.out)
    payload = {
        "spec": {
            "num_classes": spec.num_classes,
            "samples": spec.samples,
            "priors": list(spec.priors),
            "input_dim": spec.input_dim,
            "spacing": spec.spacing,
            "spread": spec.spread,
            "noise_matrix": None if noise is None else noise.tolist(),
            "seed": spec.seed,
        },
        "class_counts": ds.class_counts(),
    }
    if ds.clean_labels is not None:
        payload["clean_class_counts"] = np.bincount(ds.clean_labels, minlength=ds.num_classes).tolist()
    return {
        "paths": {"data": args.out},
        "dataset": payload,
        "summary": f"wrote {ds.n} rows to {args.out}; class counts {ds.class_counts()}",
    }


# -- train / sweep ------------------------------------------------------------

_FLAG_TO_FIELD = {
    "base": "base_loss",
    "lam": "lam",
    "batch_size": "batch_size",
    "lr": "lr",
    "plateau_factor": "plateau_factor",
    "plateau_patience": "plateau_patience",
    "early_stop_patience": "early_stop_patience",
    "max_epochs": "max_epochs",
    "alpha": "alpha",
    "gamma": "gamma",
    "sigma": "sigma",
    "model": "model_kind",
    "hidden_dim": "hidden_dim",
}


def _cost_source(args, default: str) -> str | None:
    kind = args.cost_matrix
    if kind is None:
        return None if default is None else default
    if kind in ("none", "quadratic"):
        return kind
    if kind == "ast":
        if not args.confusion:
            raise CommandError("--cost-matrix ast needs --confusion <counts csv>")
        return f"ast:{args.confusion}"
    if not args.cost_csv:
        raise CommandError("--cost-matrix csv needs --cost-csv <matrix csv>")
    return f"csv:{args.cost_csv}"


def _resolve_config(args, cost_default: str | None) -> TrainConfig:
    """Defaults, then the --config file, then explicit flags."""
    cfg = TrainConfig()
    if args.config:
        cfg = TrainConfig.from_dict({**cfg.to_dict(), **json.loads(Path(args.config).read_text())})
    changes = {f: getattr(args, a) for a, f in _FLAG_TO_FIELD.items() if getattr(args, a, None) is not None}
    if args.no_oversample:
        changes["oversample"] = False
    if args.no_standardize:
        changes["standardize"] = False
    if args.seed is not None:
        changes["seed"] = args.seed
    source = _cost_source(args, cost_default)
    if source is not None:
        changes["cost_matrix"] = source
    cfg = replace(cfg, **changes)
    if cfg.model_kind == "hidden" and cfg.hidden_dim == 0:
        cfg = replace(cfg, hidden_dim=16)
    cfg.validate()
    return cfg


def _load_splits(args):
    tr = load_csv(args.train)
    va = load_csv(args.val)
    C = max(tr.num_classes, va.num_classes) if args.num_classes is None else args.num_classes
    if tr.dim != va.dim:
        raise InvalidDimensionError(f"train has {tr.dim} features, val has {va.dim}")
    return tr, va, C


def _write_checkpoint(path: Path, model: Model, cfg: TrainConfig, best_val_kappa: float) -> None:
    ckpt = {"model": model.to_dict(), "config": cfg.to_dict(), "best_val_kappa": best_val_kappa,
            "version": __version__}
    path.write_text(_dump(ckpt) + "\n")


def cmd_train(args) -> dict:
    cfg = _resolve_config(args, cost_default=None)
    tr, va, C = _load_splits(args)
    M = resolve_cost_matrix(cfg.cost_matrix, C)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    model, hist = train(cfg, tr.features, tr.labels, va.features, va.labels, num_classes=C, cost_matrix=M)
    ckpt, hpath = out / "checkpoint.json", out / "history.jsonl"
    _write_checkpoint(ckpt, model, cfg, hist.best_val_kappa)
    hpath.write_text(hist.to_jsonl())
    return {
        "config": cfg.to_dict(),
        "cost_matrix_active": cfg.regularized,
        "cost_matrix": None if M is None else M.tolist(),
        "paths": {"checkpoint": str(ckpt), "history": str(hpath)},
        "training": {"best_epoch": hist.best_epoch, "best_val_kappa": hist.best_val_kappa,
                     "epochs_run": len(hist.records)},
        "summary": f"best val kappa {hist.best_val_kappa:.4f} at epoch {hist.best_epoch}; checkpoint {ckpt}",
    }


def cmd_sweep(args) -> dict:
    cfg = _resolve_config(args, cost_default="quadratic")
    if cfg.cost_matrix == "none":
        raise CommandError("a lambda sweep needs a cost matrix")
    tr, va, C = _load_splits(args)
    M = resolve_cost_matrix(cfg.cost_matrix, C)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    res = lambda_sweep(cfg, tr.features, tr.labels, va.features, va.labels, num_classes=C, cost_matrix=M,
                       max_lambda=args.max_lambda)
    paths = {}
    for lam, hist in res.histories.items():
        p = out / f"history_lambda_{lam:g}.jsonl"
        p.write_text(hist.to_jsonl())
        paths[f"history_lambda_{lam:g}"] = str(p)
    best_cfg = replace(cfg, lam=res.selected_lambda)
    ckpt = out / "checkpoint.json"
    _write_checkpoint(ckpt, res.models[res.selected_lambda], best_cfg, res.best_kappa)
    table = out / "sweep.json"
    table.write_text(_dump(res.to_dict()) + "\n")
    paths.update(checkpoint=str(ckpt), sweep=str(table))
    return {
        "config": cfg.to_dict(),
        "cost_matrix": M.tolist(),
        "paths": paths,
        "sweep": res.to_dict(),
        "summary": "\n".join(
            [f"lambda {lam:<8g} val kappa {kap:.4f}" for lam, kap in res.trials]
            + [f"selected lambda {res.selected_lambda:g}"]
        ),
    }


# -- eval / compare -----------------------------------------------------------


def cmd_eval(args) -> dict:
    model, ckpt = _load_checkpoint(args.checkpoint)
    ds = _dataset_for(model, args.data)
    labels = ds.clean_labels if args.clean and ds.clean_labels is not None else ds.labels
    rep = evaluate(PredictionSet(labels, predict_proba(model, ds.features)))
    d = rep.to_dict()
    parts = [f"{k} {'undefined' if d[k] is None else format(d[k], '.4f')}" for k in sorted(METRICS)]
    return {
        "config": ckpt.get("config"),
        "paths": {"checkpoint": args.checkpoint, "data": args.data},
        "metrics": d,
        "summary": ", ".join(parts),
    }


def cmd_compare(args) -> dict:
    ma, ca = _load_checkpoint(args.checkpoint_a)
    mb, cb = _load_checkpoint(args.checkpoint_b)
    if (ma.input_dim, ma.num_classes) != (mb.input_dim, mb.num_classes):
        raise InvalidDimensionError("checkpoints disagree on input dimension or class count")
    ds = _dataset_for(ma, args.data)
    labels = ds.clean_labels if args.clean and ds.clean_labels is not None else ds.labels
    pa, pb = predict_proba(ma, ds.features), predict_proba(mb, ds.features)
    metrics = args.metrics or sorted(METRICS)
    results = {
        m: paired_bootstrap_test(labels, pa, pb, metric=m, n=args.n, alpha=args.alpha, seed=args.seed,
                                 workers=args.workers).to_dict()
        for m in metrics
    }
    lines = [
        f"{m}: diff {r['observed_diff']:+.4f}  CI [{r['ci95'][0]:+.4f}, {r['ci95'][1]:+.4f}]  "
        f"p={r['p_value']:.4f}  {'significant' if r['significant'] else 'not significant'} at alpha={r['alpha']}"
        for m, r in results.items()
    ]
    return {
        "config": {"a": ca.get("config"), "b": cb.get("config"), "n": args.n, "alpha": args.alpha},
        "paths": {"checkpoint_a": args.checkpoint_a, "checkpoint_b": args.checkpoint_b, "data": args.data},
        "bootstrap": results,
        "summary": "\n".join(lines),
    }


# -- cost-matrix --------------------------------------------------------------


def cmd_cost_matrix(args) -> dict:
    mats = {}
    if args.confusion:
        counts = as_confusion_counts(matrix_from_csv(args.confusion))
        C = counts.shape[0]
        if args.num_classes is not None and args.num_classes != C:
            raise InvalidDimensionError(f"--num-classes {args.num_classes} but confusion matrix is {C}x{C}")
    elif args.num_classes is not None:
        counts, C = None, args.num_classes
    else:
        raise CommandError("give --confusion and/or --num-classes")
    kinds = ("quadratic", "mstar", "ast") if args.kind == "all" else (args.kind,)
    for kind in kinds:
        if kind == "quadratic":
            mats[kind] = quadratic_cost_matrix(C)
        elif counts is None:
            raise CommandError(f"--kind {kind} needs --confusion")
        elif kind == "mstar":
            mats[kind] = row_normalize(counts)
        else:
            mats[kind] = ast_cost_matrix(counts)
    paths = {}
    if args.out_dir:
        out = Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        for kind, m in mats.items():
            paths[kind] = str(out / f"{kind}.csv")
            matrix_to_csv(m, paths[kind])
    return {
        "paths": paths,
        "matrices": {k: m.tolist() for k, m in mats.items()},
        "summary": "\n\n".join(f"{k}:\n{matrix_to_csv(m).rstrip()}" for k, m in mats.items()),
    }


# -- parser -------------------------------------------------------------------


def _add_common(p: argparse.ArgumentParser, seed_default: int | None = 0) -> None:
    p.add_argument("--seed", type=int, default=seed_default, help="random seed")
    p.add_argument("--report", help="write the JSON report here (default: stdout)")


def _add_train_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--train", required=True, help="training CSV")
    p.add_argument("--val", required=True, help="validation CSV")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--config", help="JSON file with TrainConfig fields; flags override it")
    p.add_argument("--num-classes", type=int)
    p.add_argument("--base", choices=("ce", "fl", "nuls"))
    p.add_argument("--cost-matrix", choices=("none", "quadratic", "ast", "csv"))
    p.add_argument("--confusion", help="inter-observer counts CSV for --cost-matrix ast")
    p.add_argument("--cost-csv", help="explicit cost matrix CSV for --cost-matrix csv")
    p.add_argument("--batch-size", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--plateau-factor", type=float)
    p.add_argument("--plateau-patience", type=int)
    p.add_argument("--early-stop-patience", type=int)
    p.add_argument("--max-epochs", type=int)
    p.add_argument("--alpha", type=float, help="focal loss alpha")
    p.add_argument("--gamma", type=float, help="focal loss gamma")
    p.add_argument("--sigma", type=float, help="NULS Gaussian width")
    p.add_argument("--model", choices=("linear", "hidden"))
    p.add_argument("--hidden-dim", type=int)
    p.add_argument("--no-oversample", action="store_true")
    p.add_argument("--no-standardize", action="store_true")
    _add_common(p, seed_default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ordinalcs", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="sample a synthetic ordinal dataset")
    p.add_argument("--out", required=True, help="output CSV")
    p.add_argument("--samples", type=int, default=1000)
    p.add_argument("--num-classes", type=int)
    p.add_argument("--priors", type=_floats, help="comma-separated class priors")
    p.add_argument("--input-dim", type=int, default=2)
    p.add_argument("--spacing", type=float, default=1.0)
    p.add_argument("--spread", type=float, default=1.0)
    p.add_argument("--noise-matrix", help="row-stochastic label-noise CSV")
    p.add_argument("--noise-counts", help="confusion-count CSV, row-normalized into a noise matrix")
    _add_common(p)
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train", help="train one model")
    p.add_argument("--lambda", dest="lam", type=float)
    _add_train_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("sweep", help="train over increasing lambda and keep the best")
    p.add_argument("--max-lambda", type=float, default=1e6)
    _add_train_flags(p)
    p.set_defaults(func=cmd_sweep, lam=None)

    p = sub.add_parser("eval", help="score a checkpoint on a dataset")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--clean", action="store_true", help="score against clean_label when present")
    _add_common(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("compare", help="paired stratified bootstrap test between two checkpoints")
    p.add_argument("--checkpoint-a", required=True)
    p.add_argument("--checkpoint-b", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--n", type=int, default=1000, help="bootstrap resamples")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--metrics", nargs="+", choices=sorted(METRICS))
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--clean", action="store_true", help="score against clean_label when present")
    _add_common(p)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("cost-matrix", help="print quadratic, normalized and AST matrices")
    p.add_argument("--confusion", help="inter-observer counts CSV")
    p.add_argument("--num-classes", type=int)
    p.add_argument("--kind", choices=("all", "quadratic", "mstar", "ast"), default="all")
    p.add_argument("--out-dir", help="also write each matrix as CSV here")
    _add_common(p)
    p.set_defaults(func=cmd_cost_matrix)
    return parser


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    report = {"command": ["ordinalcs", *argv], "subcommand": args.command, "seed": args.seed,
              "version": __version__, "backend": BACKEND}
    t0 = time.perf_counter()
    code = EXIT_OK
    try:
        report.update(args.func(args))
    except (OrdinalCSError, CommandError, OSError, ValueError) as exc:
        code = EXIT_ERROR
        err = {"type": type(exc).__name__, "message": str(exc)}
        if isinstance(exc, TrainingDivergedError):
            err.update(epoch=exc.epoch, batch=exc.batch, lam=exc.lam)
        report["error"] = err
        report["summary"] = f"error: {err['type']}: {err['message']}"
        print(report["summary"], file=sys.stderr)
    report["wall_clock_seconds"] = time.perf_counter() - t0
    try:
        _emit(report, args)
    except OSError as exc:
        print(f"error: could not write report: {exc}", file=sys.stderr)
        return EXIT_ERROR
    return code


if __name__ == "__main__":
    sys.exit(main())
