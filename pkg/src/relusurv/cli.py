"""Command-line entry points.

Subcommands: simulate, train, evaluate, cross-validate, ablate, export-tree.
Configuration comes from an optional JSON file plus flag overrides; every
run writes its resolved config next to its artifacts. Exit codes: 0 success,
1 usage error, 2 data error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .config import RunConfig
from .data import DataError, apply_preprocess, load_csv, write_csv
from .network import NumericalError, forward
from .simulate import SimConfig, simulate, write_sim_metadata
from .stats import BootstrapError
from .train import (ablate, cross_validate, load_checkpoint, run_evaluate,
                    run_training, write_ablation_csv, write_json)
from .tree import build_pattern_matrix, export_tree, reconstruct_tree


class CliParser(argparse.ArgumentParser):
    """argparse exits 2 on usage problems; this project reserves 2 for data
    errors, so usage failures are remapped to exit code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print("%s: error: %s" % (self.prog, message), file=sys.stderr)
        raise SystemExit(1)


def _csv_list(text):
    return [s.strip() for s in text.split(",") if s.strip()]


def _float_list(text):
    return [float(s) for s in _csv_list(text)]


def _int_list(text):
    return [int(s) for s in _csv_list(text)]


def _add_data_flags(p, with_sim=True):
    p.add_argument("--csv", help="input CSV with time/event columns")
    p.add_argument("--time-col", default=None)
    p.add_argument("--event-col", default=None)
    p.add_argument("--features", type=_csv_list, default=None,
                   help="comma-separated feature columns (default: all)")
    p.add_argument("--categorical", type=_csv_list, default=None,
                   help="comma-separated categorical feature names")
    if with_sim:
        p.add_argument("--sim-risk", choices=["linear", "gaussian"],
                       help="generate data instead of reading a CSV")
        p.add_argument("--sim-n", type=int, default=None)
        p.add_argument("--sim-censoring", type=float, default=None)


def _add_model_flags(p):
    p.add_argument("--model", choices=["relu", "linear-cox"], default=None)
    p.add_argument("--layers", type=int, default=None)
    p.add_argument("--widths", type=_int_list, default=None)
    p.add_argument("--head", choices=["linear", "mlp"], default=None)
    p.add_argument("--loss", choices=["cont", "disc"], default=None)
    p.add_argument("--bins", type=int, default=None)
    p.add_argument("--rank-weight", type=float, default=None)
    p.add_argument("--rank-sigma", type=float, default=None)


def _add_optim_flags(p):
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--batch-size", type=int, default=None)
    p.add_argument("--momentum", type=float, default=None)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--sparsity", type=float, default=None,
                   help="soft-threshold strength (0 disables)")
    p.add_argument("--beta0", type=float, default=None)
    p.add_argument("--beta-growth", type=float, default=None)
    p.add_argument("--beta-max", type=float, default=None)
    p.add_argument("--early-stop", type=int, default=None)
    p.add_argument("--straight-through", action="store_true")


def _add_prune_flags(p):
    p.add_argument("--no-prune", action="store_true")
    p.add_argument("--alpha-level", type=float, default=None)
    p.add_argument("--n-min", type=int, default=None)
    p.add_argument("--patience", type=int, default=None)
    p.add_argument("--literal-inequality", action="store_true",
                   help="merge significant splits instead (fidelity switch)")
    p.add_argument("--single-coordinate", action="store_true",
                   help="zero only the pruned node's layer, not its subtree")


def _set(obj, attr, val):
    if val is not None:
        setattr(obj, attr, val)


def build_run_config(args) -> RunConfig:
    cfg = RunConfig.load(args.config) if getattr(args, "config", None) else RunConfig()
    d = cfg.data
    _set(d, "csv", getattr(args, "csv", None))
    _set(d, "time_col", getattr(args, "time_col", None))
    _set(d, "event_col", getattr(args, "event_col", None))
    _set(d, "feature_cols", getattr(args, "features", None))
    _set(d, "categorical", getattr(args, "categorical", None))
    _set(cfg.eval, "seed", getattr(args, "seed", None))
    _set(cfg.eval, "bootstrap", getattr(args, "bootstrap", None))
    _set(cfg.eval, "cv_folds", getattr(args, "folds", None))
    if getattr(args, "sim_risk", None):
        sim = {"risk": args.sim_risk, "n": args.sim_n or 6000,
               "seed": cfg.eval.seed}
        if args.sim_censoring is not None:
            sim["censoring_fraction"] = args.sim_censoring
        d.sim = SimConfig(**sim)
        d.csv = None
    m = cfg.model
    _set(m, "kind", getattr(args, "model", None))
    _set(m, "n_layers", getattr(args, "layers", None))
    _set(m, "widths", getattr(args, "widths", None))
    _set(m, "head", getattr(args, "head", None))
    _set(m, "loss", getattr(args, "loss", None))
    _set(m, "n_bins", getattr(args, "bins", None))
    _set(m, "rank_weight", getattr(args, "rank_weight", None))
    _set(m, "rank_sigma", getattr(args, "rank_sigma", None))
    o = cfg.optim
    for flag, attr in (("lr", "lr"), ("batch_size", "batch_size"),
                       ("momentum", "momentum"), ("epochs", "epochs"),
                       ("sparsity", "sparsity"), ("beta0", "beta0"),
                       ("beta_growth", "beta_growth"),
                       ("beta_max", "beta_max"),
                       ("early_stop", "early_stop")):
        _set(o, attr, getattr(args, flag, None))
    if getattr(args, "straight_through", False):
        o.straight_through = True
    pr = cfg.prune
    if getattr(args, "no_prune", False):
        pr.enabled = False
    _set(pr, "alpha_level", getattr(args, "alpha_level", None))
    _set(pr, "n_min", getattr(args, "n_min", None))
    _set(pr, "patience", getattr(args, "patience", None))
    if getattr(args, "literal_inequality", False):
        pr.literal_inequality = True
    if getattr(args, "single_coordinate", False):
        pr.subtree_collapse = False
    return cfg


def cmd_simulate(args) -> int:
    cfg = SimConfig(
        n=args.n, risk=args.risk, d=args.d, r_max=args.r_max,
        risk_sigma=args.risk_sigma, baseline_scale=args.baseline_scale,
        censoring_fraction=args.censoring, seed=args.seed,
    )
    ds = simulate(cfg)
    write_csv(ds, args.out)
    meta = write_sim_metadata(cfg, args.out)
    print("wrote %d subjects (%d events) to %s (metadata: %s)"
          % (ds.N, int(ds.event.sum()), args.out, meta))
    return 0


def _summary_line(metrics) -> str:
    t = metrics["test"]
    return ("antolini %.4f (%.4f, %.4f)  harrell %.4f (%.4f, %.4f)  n=%d"
            % (t["antolini"]["value"], t["antolini"]["ci_low"],
               t["antolini"]["ci_high"], t["harrell"]["value"],
               t["harrell"]["ci_low"], t["harrell"]["ci_high"], t["n"]))


def cmd_train(args) -> int:
    cfg = build_run_config(args)
    metrics = run_training(cfg, args.out)
    print(_summary_line(metrics))
    if metrics.get("tree"):
        print("tree: %s leaves, depth %s, %d pruned prefixes"
              % (metrics["tree"]["leaf_count"], metrics["tree"]["depth"],
                 metrics["n_pruned_prefixes"]))
    print("artifacts in %s" % args.out)
    return 0


def cmd_evaluate(args) -> int:
    cfg = build_run_config(args)
    metrics = run_evaluate(args.checkpoint, args.csv, cfg, args.out)
    print(json.dumps(metrics, indent=1))
    return 0


def cmd_cross_validate(args) -> int:
    cfg = build_run_config(args)
    report = cross_validate(cfg)
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        cfg.save(os.path.join(args.out, "config.json"))
        write_json(report, os.path.join(args.out, "metrics.json"))
    print(json.dumps(report, indent=1))
    return 0


def cmd_ablate(args) -> int:
    cfg = build_run_config(args)
    rows = ablate(cfg, args.sweep, args.values)
    os.makedirs(args.out, exist_ok=True)
    cfg.save(os.path.join(args.out, "config.json"))
    path = write_ablation_csv(rows, os.path.join(args.out, "ablation.csv"))
    for r in rows:
        if r["error"]:
            print("%s=%g failed: %s" % (args.sweep, r["value"], r["error"]))
        else:
            print("%s=%g  ctd=%.4f  sparsity=%.3f  leaves=%d"
                  % (args.sweep, r["value"], r["ctd"], r["sparsity"],
                     r["leaves"]))
    print("wrote %s" % path)
    return 0


def cmd_export_tree(args) -> int:
    ckpt = load_checkpoint(args.checkpoint)
    if ckpt.kind != "relu":
        raise DataError("checkpoint %r has no tree structure" % args.checkpoint)
    ds = load_csv(args.csv, args.time_col or "time", args.event_col or "event",
                  args.features)
    if ckpt.preprocess is not None:
        ds = apply_preprocess(ds, ckpt.preprocess)
    if ds.d != ckpt.net.d:
        raise DataError("checkpoint expects %d features, data has %d"
                        % (ckpt.net.d, ds.d))
    trace = forward(ckpt.net, ds.numeric_X(), "hard", mask=ckpt.mask)
    root = reconstruct_tree(build_pattern_matrix(trace), ds.time, ds.event,
                            trace.head_out, ckpt.net.widths)
    os.makedirs(args.out, exist_ok=True)
    dot = export_tree(root, ckpt.net, "dot",
                      os.path.join(args.out, "tree.dot"), ds.feature_names)
    js = export_tree(root, ckpt.net, "json",
                     os.path.join(args.out, "tree.json"), ds.feature_names)
    print("wrote %s and %s" % (dot, js))
    return 0


def build_parser() -> CliParser:
    parser = CliParser(prog="relusurv",
                       description="Oblique survival trees from ReLU networks")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a synthetic dataset")
    p.add_argument("--risk", choices=["linear", "gaussian"], required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--d", type=int, default=10)
    p.add_argument("--r-max", type=float, default=5.0)
    p.add_argument("--risk-sigma", type=float, default=0.5)
    p.add_argument("--baseline-scale", type=float, default=0.2)
    p.add_argument("--censoring", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="dataset.csv")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("train", help="fit a model and write run artifacts")
    p.add_argument("--config", help="JSON run config; flags override it")
    _add_data_flags(p)
    _add_model_flags(p)
    _add_optim_flags(p)
    _add_prune_flags(p)
    p.add_argument("--bootstrap", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True, help="artifact directory")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="score a checkpoint on a CSV")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--csv", required=True)
    p.add_argument("--time-col", default=None)
    p.add_argument("--event-col", default=None)
    p.add_argument("--features", type=_csv_list, default=None)
    p.add_argument("--bootstrap", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("cross-validate", help="k-fold cross-validation")
    p.add_argument("--config", help="JSON run config; flags override it")
    _add_data_flags(p)
    _add_model_flags(p)
    _add_optim_flags(p)
    _add_prune_flags(p)
    p.add_argument("--folds", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_cross_validate)

    p = sub.add_parser("ablate", help="sweep depth or sparsity")
    p.add_argument("--config", help="JSON run config; flags override it")
    p.add_argument("--sweep", choices=["depth", "sparsity"], required=True)
    p.add_argument("--values", type=_float_list, required=True,
                   help="comma-separated sweep values")
    _add_data_flags(p)
    _add_model_flags(p)
    _add_optim_flags(p)
    _add_prune_flags(p)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("export-tree", help="rebuild and export the tree")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--csv", required=True)
    p.add_argument("--time-col", default=None)
    p.add_argument("--event-col", default=None)
    p.add_argument("--features", type=_csv_list, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_export_tree)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except SystemExit as err:
        return err.code if isinstance(err.code, int) else 1
    except DataError as err:
        print("data error: %s" % err, file=sys.stderr)
        return 2
    except OSError as err:
        print("i/o error: %s" % err, file=sys.stderr)
        return 2
    except (NumericalError, BootstrapError) as err:
        print("numerical failure: %s" % err, file=sys.stderr)
        return 3
    except ValueError as err:
        print("error: %s" % err, file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
