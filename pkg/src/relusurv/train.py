"""Training, evaluation, cross-validation and ablation orchestration.

The training loop follows the soft-relaxation recipe: minibatch SGD on the
chosen survival loss with sigmoid-relaxed patterns and an annealed beta,
an exact rank of the hard training pattern matrix once per epoch, and a
log-rank merge scan whenever the rank has been flat for `patience` epochs.
Model selection judges each epoch in its deliverable form: the current
weights with the mask pruned to a fixed point of the merge scan, scored by
hard-mode validation concordance.  The selected snapshot therefore already
satisfies the post-convergence property that every surviving split in the
reported tree is statistically significant; a final scan re-verifies it.
"""

from __future__ import annotations

import dataclasses
import json
import math
import os
from dataclasses import dataclass

import numpy as np

from .config import DataConfig, RunConfig
from .data import (DataError, Dataset, PreprocessSpec, apply_preprocess,
                   fit_preprocess, kfold, load_csv, split)
from .losses import (BaselineHazard, TimeGrid, _softmax, breslow_baseline,
                     cox_nll, deephit_loss, make_time_grid,
                     survival_matrix_continuous, survival_matrix_discrete)
from .network import (MomentumSgd, NumericalError, ReluNetwork, backward,
                      forward, init_network, network_from_dict,
                      network_to_dict, soft_threshold_prox, sparsity)
from .simulate import simulate
from .stats import antolini_ctd_from_matrix, bootstrap_ci, harrell_c
from .tree import (PruneMask, RankTrace, TreeNode, apply_prune,
                   build_pattern_matrix, export_tree, leaves, logrank_scan,
                   matrix_rank, rank_trigger, reconstruct_tree, tree_depth)


def derive_seeds(seed) -> dict:
    """Independent child seeds for every stochastic stage of a run."""
    states = np.random.SeedSequence(int(seed)).generate_state(4)
    names = ("split", "init", "shuffle", "bootstrap")
    return {k: int(v) for k, v in zip(names, states)}


def risk_scores(head_out) -> np.ndarray:
    """Scalar per-subject risk: log-risk column, or negative expected bin."""
    out = np.atleast_2d(np.asarray(head_out, dtype=float))
    if out.shape[1] == 1:
        return out[:, 0]
    p = _softmax(out)
    return -(p * np.arange(out.shape[1])).sum(axis=1)


def _survival_matrix(loss_kind, head_out, eval_times, baseline, grid):
    if loss_kind == "cont":
        return survival_matrix_continuous(head_out[:, 0], baseline, eval_times)
    return survival_matrix_discrete(_softmax(head_out), grid, eval_times)


@dataclass
class PruneEvent:
    epoch: int
    phase: str  # "train" or "final"
    n_new_prefixes: int
    leaves_before: int
    leaves_after: int
    val_ctd_before: float | None
    val_ctd_after: float | None


@dataclass
class TrainResult:
    net: ReluNetwork
    mask: PruneMask
    beta: float
    loss_kind: str
    grid: TimeGrid | None
    baseline: BaselineHazard | None
    trace: RankTrace
    prune_events: list
    history: dict
    best_epoch: int
    best_val_ctd: float
    epochs_run: int
    skipped_batches: int
    final_root: TreeNode | None = None


def _val_ctd(net, mask, X, times, events, loss_kind, baseline, grid):
    """Hard-mode validation concordance; nan when the fold is degenerate."""
    tr = forward(net, X, "hard", mask=mask)
    try:
        S = _survival_matrix(loss_kind, tr.head_out, times, baseline, grid)
        return antolini_ctd_from_matrix(S, times, events).value
    except ValueError:
        return float("nan")


def train_model(Xtr, ttr, etr, Xval, tval, evval, cfg: RunConfig,
                init_seed, shuffle_seed) -> TrainResult:
    """Fit one network on preprocessed arrays; see the module docstring."""
    mc, oc, pc = cfg.model, cfg.optim, cfg.prune
    if oc.epochs < 1 or oc.batch_size < 1:
        raise ValueError("epochs and batch_size must be positive")
    Xtr = np.asarray(Xtr, dtype=float)
    ttr = np.asarray(ttr, dtype=float)
    etr = np.asarray(etr, dtype=bool)
    n_train, d = Xtr.shape
    if not etr.any():
        raise DataError("training split has no observed events")

    grid = None
    if mc.loss == "disc":
        n_distinct = np.unique(ttr[etr]).size
        if n_distinct < 2:
            raise DataError("discrete loss needs at least 2 distinct event times")
        grid = make_time_grid(ttr, etr, min(mc.n_bins, n_distinct))
    out_dim = 1 if mc.loss == "cont" else grid.n_bins

    net = init_network(d, mc.n_layers, mc.widths, mc.head, out_dim,
                       mc.head_hidden, seed=init_seed)
    mask = PruneMask(net.widths, subtree=pc.subtree_collapse)
    opt = MomentumSgd(oc.lr, oc.momentum)
    rng = np.random.default_rng(shuffle_seed)
    train_mode = "ste" if oc.straight_through else "soft"

    trace = RankTrace()
    armed_from = 0
    prune_events = []
    history = {"train_loss": [], "val_ctd": [], "val_ctd_pruned": [],
               "beta": []}
    best = {"ctd": -math.inf, "epoch": -1, "net": None, "mask": None, "beta": None}
    # raw-network validation progress keeps the stagnation clock honest while
    # the pruned deliverable is still degenerate (e.g. everything merges on an
    # immature net and candidates sit at 0.5 until splits become significant)
    best_raw = {"ctd": -math.inf, "epoch": -1}
    skipped = 0
    epochs_run = 0

    def epoch_end_state(cur_mask):
        tr_hard = forward(net, Xtr, "hard", mask=cur_mask)
        baseline = None
        if mc.loss == "cont":
            baseline = breslow_baseline(tr_hard.head_out[:, 0], ttr, etr)
        return tr_hard, baseline

    def converge_mask(cur_mask):
        """Prune a mask to a fixed point of the merge scan.

        Returns the converged mask together with the matching full-train
        forward, baseline, and tree so callers need not recompute them.
        """
        cur = cur_mask
        tr_hard, baseline = epoch_end_state(cur)
        while True:
            root = reconstruct_tree(build_pattern_matrix(tr_hard), ttr, etr,
                                    tr_hard.head_out, net.widths)
            if not pc.enabled:
                break
            decisions = logrank_scan(root, pc.alpha_level, pc.n_min,
                                     pc.literal_inequality)
            new = apply_prune(cur, decisions)
            if new == cur:
                break
            cur = new
            tr_hard, baseline = epoch_end_state(cur)
        return cur, tr_hard, baseline, root

    for epoch in range(oc.epochs):
        epochs_run = epoch + 1
        beta = min(oc.beta0 * oc.beta_growth**epoch, oc.beta_max)
        perm = rng.permutation(n_train)
        batch_losses = []
        for start in range(0, n_train, oc.batch_size):
            idx = perm[start : start + oc.batch_size]
            tb, eb = ttr[idx], etr[idx]
            if mc.loss == "cont" and not eb.any():
                skipped += 1
                continue
            try:
                ftr = forward(net, Xtr[idx], train_mode,
                              beta=beta if train_mode == "soft" else None)
                if mc.loss == "cont":
                    lv = cox_nll(ftr.head_out, tb, eb)
                else:
                    lv = deephit_loss(ftr.head_out, tb, eb, grid,
                                      mc.rank_weight, mc.rank_sigma)
                grads = backward(net, ftr, lv.grad)
                opt.step(net, grads)
                if oc.sparsity > 0:
                    soft_threshold_prox(net, oc.lr * oc.sparsity)
            except NumericalError as err:
                raise NumericalError("epoch %d: %s" % (epoch, err)) from err
            batch_losses.append(lv.total)

        tr_hard, baseline = epoch_end_state(mask)
        O = build_pattern_matrix(tr_hard)
        trace.add(epoch, matrix_rank(O), O.shape[0], O.shape[1])
        val_ctd = _val_ctd(net, mask, Xval, tval, evval, mc.loss, baseline, grid)
        history["train_loss"].append(
            float(np.mean(batch_losses)) if batch_losses else None)
        history["val_ctd"].append(val_ctd)
        history["beta"].append(beta)

        if pc.enabled and rank_trigger(trace.ranks[armed_from:], pc.patience):
            root = reconstruct_tree(O, ttr, etr, tr_hard.head_out, net.widths)
            decisions = logrank_scan(root, pc.alpha_level, pc.n_min,
                                     pc.literal_inequality)
            new_mask = apply_prune(mask, decisions)
            if new_mask != mask:
                _, new_baseline = epoch_end_state(new_mask)
                val_after = _val_ctd(net, new_mask, Xval, tval, evval,
                                     mc.loss, new_baseline, grid)
                new_O = new_mask.apply_rows(build_pattern_matrix(
                    forward(net, Xtr, "hard", mask=None)))
                new_root = reconstruct_tree(new_O, ttr, etr,
                                            tr_hard.head_out, net.widths)
                prune_events.append(PruneEvent(
                    epoch=epoch, phase="train",
                    n_new_prefixes=len(new_mask) - len(mask),
                    leaves_before=len(leaves(root)),
                    leaves_after=len(leaves(new_root)),
                    val_ctd_before=val_ctd,
                    val_ctd_after=val_after,
                ))
                mask = new_mask
                baseline = new_baseline
                val_ctd = val_after
            armed_from = len(trace)  # re-arm the window after every scan

        # judge the epoch by its deliverable form: the current weights with
        # a mask pruned from scratch to a fixed point, which is what a run
        # stopping here would export; starting from the root rather than
        # the accumulated training mask keeps merge decisions made on an
        # immature net from permanently capping the candidates
        cand_mask, _, cand_baseline, _ = converge_mask(
            PruneMask(net.widths, subtree=pc.subtree_collapse))
        if cand_mask == mask:
            cand_val = val_ctd
        else:
            cand_val = _val_ctd(net, cand_mask, Xval, tval, evval,
                                mc.loss, cand_baseline, grid)
        history["val_ctd_pruned"].append(cand_val)
        if not math.isnan(cand_val) and cand_val > best["ctd"]:
            best.update(ctd=cand_val, epoch=epoch, net=net.copy(),
                        mask=cand_mask.copy(), beta=beta)
        if len(mask) == 0:
            raw_val = val_ctd
        else:
            raw_val = _val_ctd(net, None, Xval, tval, evval, mc.loss,
                               epoch_end_state(None)[1], grid)
        if not math.isnan(raw_val) and raw_val > best_raw["ctd"]:
            best_raw.update(ctd=raw_val, epoch=epoch)
        last_gain = max(best["epoch"], best_raw["epoch"])
        if last_gain >= 0 and epoch - last_gain >= oc.early_stop:
            break

    if best["net"] is not None:
        net, mask, beta = best["net"], best["mask"], best["beta"]

    # iterate the merge scan to a fixed point so the reported tree carries
    # only significant, well-populated splits
    final_root = None
    while True:
        tr_hard, baseline = epoch_end_state(mask)
        O = build_pattern_matrix(tr_hard)
        final_root = reconstruct_tree(O, ttr, etr, tr_hard.head_out, net.widths)
        if not pc.enabled:
            break
        decisions = logrank_scan(final_root, pc.alpha_level, pc.n_min,
                                 pc.literal_inequality)
        new_mask = apply_prune(mask, decisions)
        if new_mask == mask:
            break
        val_before = _val_ctd(net, mask, Xval, tval, evval, mc.loss, baseline, grid)
        _, nb = epoch_end_state(new_mask)
        val_after = _val_ctd(net, new_mask, Xval, tval, evval, mc.loss, nb, grid)
        new_O = new_mask.apply_rows(build_pattern_matrix(
            forward(net, Xtr, "hard", mask=None)))
        prune_events.append(PruneEvent(
            epoch=epochs_run - 1, phase="final",
            n_new_prefixes=len(new_mask) - len(mask),
            leaves_before=len(leaves(final_root)),
            leaves_after=len(leaves(reconstruct_tree(
                new_O, ttr, etr, tr_hard.head_out, net.widths))),
            val_ctd_before=val_before,
            val_ctd_after=val_after,
        ))
        mask = new_mask

    # one more trace row for the selected-and-converged model
    final_O = build_pattern_matrix(forward(net, Xtr, "hard", mask=mask))
    trace.add(epochs_run, matrix_rank(final_O), final_O.shape[0],
              final_O.shape[1])

    return TrainResult(
        net=net, mask=mask, beta=beta, loss_kind=mc.loss, grid=grid,
        baseline=baseline, trace=trace, prune_events=prune_events,
        history=history, best_epoch=best["epoch"], best_val_ctd=best["ctd"],
        epochs_run=epochs_run, skipped_batches=skipped, final_root=final_root,
    )


# ---------------------------------------------------------------------------
# linear Cox baseline


@dataclass
class LinearCoxModel:
    coef: np.ndarray
    baseline: BaselineHazard

    def log_risks(self, X):
        return np.asarray(X, dtype=float) @ self.coef


def fit_linear_cox(X, times, events, lr=1.0, n_iter=500) -> LinearCoxModel:
    """Full-batch gradient descent on the Cox partial likelihood.

    The objective is convex; the step size is halved whenever a step fails
    to decrease the loss, which keeps the fit deterministic and safe.
    """
    X = np.asarray(X, dtype=float)
    times = np.asarray(times, dtype=float)
    events = np.asarray(events, dtype=bool)
    coef = np.zeros(X.shape[1])
    prev = cox_nll(X @ coef, times, events).total
    for _ in range(n_iter):
        lv = cox_nll(X @ coef, times, events)
        grad = X.T @ lv.grad[:, 0]
        step = coef - lr * grad
        new = cox_nll(X @ step, times, events).total
        if new > prev:
            lr *= 0.5
            if lr < 1e-8:
                break
            continue
        if prev - new < 1e-12:
            coef = step
            break
        coef = step
        prev = new
    eta = X @ coef
    return LinearCoxModel(coef, breslow_baseline(eta, times, events))


# ---------------------------------------------------------------------------
# evaluation


def evaluate_predictions(loss_kind, head_out, times, events, baseline, grid,
                         n_boot, seed) -> dict:
    """Point estimates and percentile-bootstrap CIs for both concordances."""
    head_out = np.atleast_2d(np.asarray(head_out, dtype=float))
    times = np.asarray(times, dtype=float)
    events = np.asarray(events, dtype=bool)
    risks = risk_scores(head_out)
    S = _survival_matrix(loss_kind, head_out, times, baseline, grid)
    n = len(times)

    def harrell_metric(idx):
        return harrell_c(risks[idx], times[idx], events[idx]).value

    def antolini_metric(idx):
        return antolini_ctd_from_matrix(S[np.ix_(idx, idx)],
                                        times[idx], events[idx]).value

    h_point, h_lo, h_hi = bootstrap_ci(harrell_metric, n, n_boot, seed)
    a_point, a_lo, a_hi = bootstrap_ci(antolini_metric, n, n_boot, seed)
    h_full = harrell_c(risks, times, events)
    a_full = antolini_ctd_from_matrix(S, times, events)
    return {
        "harrell": {"value": h_point, "ci_low": h_lo, "ci_high": h_hi,
                    "comparable_pairs": h_full.comparable_pairs},
        "antolini": {"value": a_point, "ci_low": a_lo, "ci_high": a_hi,
                     "comparable_pairs": a_full.comparable_pairs},
        "n": int(n),
        "n_events": int(events.sum()),
        "bootstrap": int(n_boot),
    }


# ---------------------------------------------------------------------------
# checkpoints


def save_checkpoint(path, *, kind, loss_kind, net=None, mask=None, beta=None,
                    coef=None, baseline=None, grid=None, preprocess=None):
    if kind == "relu":
        body = network_to_dict(net, beta=beta, prune_mask=mask)
        body["subtree_collapse"] = mask.subtree if mask is not None else True
    elif kind == "linear-cox":
        body = {"d": int(len(coef)), "coef": np.asarray(coef).tolist()}
    else:
        raise ValueError("unknown checkpoint kind %r" % kind)
    body["kind"] = kind
    body["loss"] = loss_kind
    body["baseline"] = baseline.to_json_dict() if baseline is not None else None
    body["grid"] = grid.to_json_dict() if grid is not None else None
    body["preprocess"] = preprocess.to_json_dict() if preprocess is not None else None
    with open(path, "w") as fh:
        json.dump(body, fh, indent=1)
    return path


@dataclass
class Checkpoint:
    kind: str
    loss_kind: str
    net: ReluNetwork | None
    mask: PruneMask | None
    beta: float | None
    coef: np.ndarray | None
    baseline: BaselineHazard | None
    grid: TimeGrid | None
    preprocess: PreprocessSpec | None

    def predict(self, X) -> np.ndarray:
        """Hard-mode head outputs (log-risk column or PMF logits)."""
        if self.kind == "relu":
            return forward(self.net, X, "hard", mask=self.mask).head_out
        return (np.asarray(X, dtype=float) @ self.coef).reshape(-1, 1)


def load_checkpoint(path) -> Checkpoint:
    with open(path) as fh:
        body = json.load(fh)
    kind = body.get("kind")
    if kind not in ("relu", "linear-cox"):
        raise DataError("checkpoint %s has unknown kind %r" % (path, kind))
    net = mask = coef = beta = None
    if kind == "relu":
        net = network_from_dict(body)
        mask = PruneMask(net.widths, prefixes=body.get("prune_mask") or (),
                         subtree=body.get("subtree_collapse", True))
        beta = body.get("beta")
    else:
        coef = np.asarray(body["coef"], dtype=float)
    baseline = (BaselineHazard.from_json_dict(body["baseline"])
                if body.get("baseline") else None)
    grid = TimeGrid.from_json_dict(body["grid"]) if body.get("grid") else None
    pp = (PreprocessSpec.from_json_dict(body["preprocess"])
          if body.get("preprocess") else None)
    return Checkpoint(kind, body.get("loss", "cont"), net, mask, beta, coef,
                      baseline, grid, pp)


# ---------------------------------------------------------------------------
# run orchestration


def _json_safe(obj):
    """Recursively replace non-finite floats so artifacts stay valid JSON."""
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, (float, np.floating)):
        return float(obj) if math.isfinite(obj) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    return obj


def write_json(obj, path):
    with open(path, "w") as fh:
        json.dump(_json_safe(obj), fh, indent=1)


def load_run_data(dc: DataConfig) -> Dataset:
    if dc.sim is not None:
        return simulate(dc.sim)
    if dc.csv is None:
        raise DataError("config names neither a csv path nor a sim config")
    return load_csv(dc.csv, dc.time_col, dc.event_col, dc.feature_cols)


def _tree_summary(root: TreeNode | None) -> dict:
    if root is None:
        return {"leaf_count": None, "depth": None, "split_p_values": []}
    pvals = []

    def visit(node):
        if node.split is not None and len(node.children) == 2:
            pvals.append(node.split.p_value)
        for c in node.children:
            visit(c)

    visit(root)
    return {"leaf_count": len(leaves(root)), "depth": tree_depth(root),
            "split_p_values": pvals}


def run_training(cfg: RunConfig, out_dir=None) -> dict:
    """Full pipeline: data, split, preprocess, fit, evaluate, artifacts.

    Returns the metrics dict; when out_dir is given, also writes the fixed
    artifact set (config.json, checkpoint.json, metrics.json, and for the
    network model rank_trace.csv plus pruned/unpruned tree exports).
    """
    seeds = derive_seeds(cfg.eval.seed)
    ds = load_run_data(cfg.data)
    tr, va, te = split(ds, cfg.data.split, seeds["split"])
    pp = fit_preprocess(tr, categorical=tuple(cfg.data.categorical))
    trn, van, ten = (apply_preprocess(s, pp) for s in (tr, va, te))

    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        cfg.save(os.path.join(out_dir, "config.json"))

    if cfg.model.kind == "linear-cox":
        model = fit_linear_cox(trn.X, trn.time, trn.event)
        eta_te = model.log_risks(ten.X).reshape(-1, 1)
        report = evaluate_predictions("cont", eta_te, ten.time, ten.event,
                                      model.baseline, None,
                                      cfg.eval.bootstrap, seeds["bootstrap"])
        metrics = {"model": "linear-cox", "test": report}
        if out_dir is not None:
            save_checkpoint(os.path.join(out_dir, "checkpoint.json"),
                            kind="linear-cox", loss_kind="cont",
                            coef=model.coef, baseline=model.baseline,
                            preprocess=pp)
            write_json(metrics, os.path.join(out_dir, "metrics.json"))
        return metrics

    result = train_model(trn.X, trn.time, trn.event, van.X, van.time,
                         van.event, cfg, seeds["init"], seeds["shuffle"])
    te_hard = forward(result.net, ten.X, "hard", mask=result.mask)
    report = evaluate_predictions(result.loss_kind, te_hard.head_out,
                                  ten.time, ten.event, result.baseline,
                                  result.grid, cfg.eval.bootstrap,
                                  seeds["bootstrap"])
    metrics = {
        "model": "relu",
        "loss": result.loss_kind,
        "test": report,
        "best_epoch": result.best_epoch,
        "best_val_ctd": result.best_val_ctd,
        "epochs_run": result.epochs_run,
        "skipped_batches": result.skipped_batches,
        "sparsity": sparsity(result.net),
        "n_pruned_prefixes": len(result.mask),
        "prune_events": [dataclasses.asdict(e) for e in result.prune_events],
        "tree": _tree_summary(result.final_root),
        "rank_trace": {"epochs": result.trace.epochs,
                       "ranks": result.trace.ranks,
                       "ratios": result.trace.ratios},
        "history": result.history,
    }
    if out_dir is not None:
        save_checkpoint(os.path.join(out_dir, "checkpoint.json"),
                        kind="relu", loss_kind=result.loss_kind,
                        net=result.net, mask=result.mask, beta=result.beta,
                        baseline=result.baseline, grid=result.grid,
                        preprocess=pp)
        write_json(metrics, os.path.join(out_dir, "metrics.json"))
        result.trace.to_csv(os.path.join(out_dir, "rank_trace.csv"))
        names = ten.feature_names
        export_tree(result.final_root, result.net, "dot",
                    os.path.join(out_dir, "tree.dot"), names)
        export_tree(result.final_root, result.net, "json",
                    os.path.join(out_dir, "tree.json"), names)
        raw_hard = forward(result.net, trn.X, "hard", mask=None)
        raw_root = reconstruct_tree(build_pattern_matrix(raw_hard), trn.time,
                                    trn.event, raw_hard.head_out,
                                    result.net.widths)
        export_tree(raw_root, result.net, "dot",
                    os.path.join(out_dir, "tree_unpruned.dot"), names)
        export_tree(raw_root, result.net, "json",
                    os.path.join(out_dir, "tree_unpruned.json"), names)
    return metrics


def run_evaluate(checkpoint_path, csv_path, cfg: RunConfig, out_dir=None) -> dict:
    """Score a saved checkpoint on an external CSV."""
    ckpt = load_checkpoint(checkpoint_path)
    ds = load_csv(csv_path, cfg.data.time_col, cfg.data.event_col,
                  cfg.data.feature_cols)
    if ckpt.preprocess is not None:
        ds = apply_preprocess(ds, ckpt.preprocess)
    expect = ckpt.net.d if ckpt.kind == "relu" else len(ckpt.coef)
    if ds.d != expect:
        raise DataError("checkpoint expects %d features, data has %d"
                        % (expect, ds.d))
    if ckpt.loss_kind == "disc" and ckpt.grid is None:
        raise DataError("discrete checkpoint is missing its time grid")
    if ckpt.loss_kind == "cont" and ckpt.baseline is None:
        raise DataError("continuous checkpoint is missing its baseline hazard")
    seeds = derive_seeds(cfg.eval.seed)
    head_out = ckpt.predict(ds.numeric_X())
    report = evaluate_predictions(ckpt.loss_kind, head_out, ds.time, ds.event,
                                  ckpt.baseline, ckpt.grid,
                                  cfg.eval.bootstrap, seeds["bootstrap"])
    metrics = {"model": ckpt.kind, "test": report}
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        write_json(metrics, os.path.join(out_dir, "metrics.json"))
    return metrics


def cross_validate(cfg: RunConfig, val_fraction=0.15) -> dict:
    """Stratified k-fold CV with per-fold preprocessing (no leakage)."""
    if cfg.eval.cv_folds < 2:
        raise ValueError("cross-validation needs at least 2 folds")
    seeds = derive_seeds(cfg.eval.seed)
    ds = load_run_data(cfg.data)
    folds = kfold(ds, cfg.eval.cv_folds, seeds["split"])
    fold_rows = []
    antolini_vals, harrell_vals = [], []
    for i, (tr_idx, te_idx) in enumerate(folds):
        tr_ds = ds.subset(tr_idx)
        te_ds = ds.subset(te_idx)
        pp = fit_preprocess(tr_ds, categorical=tuple(cfg.data.categorical))
        trn = apply_preprocess(tr_ds, pp)
        ten = apply_preprocess(te_ds, pp)
        inner = np.random.default_rng([seeds["split"], i]).permutation(trn.N)
        n_val = max(1, int(round(val_fraction * trn.N)))
        va_idx, fit_idx = inner[:n_val], inner[n_val:]
        fit_ds, va_ds = trn.subset(fit_idx), trn.subset(va_idx)
        try:
            result = train_model(fit_ds.X, fit_ds.time, fit_ds.event,
                                 va_ds.X, va_ds.time, va_ds.event, cfg,
                                 seeds["init"] + i, seeds["shuffle"] + i)
            te_hard = forward(result.net, ten.X, "hard", mask=result.mask)
            risks = risk_scores(te_hard.head_out)
            S = _survival_matrix(result.loss_kind, te_hard.head_out,
                                 ten.time, result.baseline, result.grid)
            a = antolini_ctd_from_matrix(S, ten.time, ten.event).value
            h = harrell_c(risks, ten.time, ten.event).value
        except ValueError as err:
            fold_rows.append({"fold": i, "error": str(err)})
            continue
        fold_rows.append({"fold": i, "antolini": a, "harrell": h,
                          "n_test": ten.N})
        antolini_vals.append(a)
        harrell_vals.append(h)

    def _agg(vals):
        if not vals:
            return {"mean": None, "std": None}
        return {"mean": float(np.mean(vals)),
                "std": float(np.std(vals, ddof=1)) if len(vals) > 1 else 0.0}

    return {
        "model": cfg.model.kind,
        "folds": fold_rows,
        "n_excluded": sum(1 for r in fold_rows if "error" in r),
        "antolini": _agg(antolini_vals),
        "harrell": _agg(harrell_vals),
    }


def _clone_config(cfg: RunConfig) -> RunConfig:
    return RunConfig.from_json_dict(cfg.to_json_dict())


def ablate(cfg: RunConfig, sweep: str, values) -> list:
    """Train one model per sweep value (shared data and seed); returns rows
    of (value, antolini test concordance, weight sparsity, leaf count)."""
    if sweep not in ("depth", "sparsity"):
        raise ValueError("sweep must be 'depth' or 'sparsity'")
    if not values:
        raise ValueError("empty sweep")
    seeds = derive_seeds(cfg.eval.seed)
    ds = load_run_data(cfg.data)
    tr, va, te = split(ds, cfg.data.split, seeds["split"])
    pp = fit_preprocess(tr, categorical=tuple(cfg.data.categorical))
    trn, van, ten = (apply_preprocess(s, pp) for s in (tr, va, te))
    rows = []
    for v in values:
        sub = _clone_config(cfg)
        if sweep == "depth":
            sub.model.n_layers = int(v)
            sub.model.widths = None
        else:
            sub.optim.sparsity = float(v)
        try:
            result = train_model(trn.X, trn.time, trn.event, van.X, van.time,
                                 van.event, sub, seeds["init"], seeds["shuffle"])
            te_hard = forward(result.net, ten.X, "hard", mask=result.mask)
            S = _survival_matrix(result.loss_kind, te_hard.head_out, ten.time,
                                 result.baseline, result.grid)
            ctd = antolini_ctd_from_matrix(S, ten.time, ten.event).value
            rows.append({"value": float(v), "ctd": ctd,
                         "sparsity": sparsity(result.net),
                         "leaves": len(leaves(result.final_root)),
                         "error": None})
        except (NumericalError, ValueError, DataError) as err:
            rows.append({"value": float(v), "ctd": None, "sparsity": None,
                         "leaves": None, "error": str(err)})
    return rows


def write_ablation_csv(rows, path):
    with open(path, "w") as fh:
        fh.write("value,ctd,sparsity,leaves,error\n")
        for r in rows:
            fh.write("%r,%s,%s,%s,%s\n" % (
                r["value"],
                "" if r["ctd"] is None else repr(r["ctd"]),
                "" if r["sparsity"] is None else repr(r["sparsity"]),
                "" if r["leaves"] is None else r["leaves"],
                r["error"] or "",
            ))
    return path
