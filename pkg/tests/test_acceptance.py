"""Acceptance gate: one numbered end-to-end check per release requirement.

Each test computes its measurements, registers exactly one PASS/FAIL line
through conftest.record_criterion (echoed in the terminal summary), and then
asserts. The two simulated benchmarks pin the generator seed and the
evaluation seed so every number here is reproducible by rerunning pytest.
"""

import contextlib
import json
import math
import os
import time
from fractions import Fraction

import numpy as np
import pytest
from conftest import record_criterion

from relusurv.config import (DataConfig, EvalConfig, ModelConfig, OptimConfig,
                             PruneConfig, RunConfig)
from relusurv.data import apply_preprocess
from relusurv.losses import cox_nll, deephit_loss, make_time_grid
from relusurv.network import backward, forward, init_network
from relusurv.simulate import SimConfig, simulate
from relusurv.stats import (antolini_ctd_from_matrix, chi2_sf, harrell_c,
                            kaplan_meier, log_rank_test)
from relusurv.train import ablate, cross_validate, load_checkpoint, run_training
from relusurv.tree import (PruneMask, build_pattern_matrix, leaves,
                           matrix_rank, reconstruct_tree)

SIM_SEED = 20
EVAL_SEED = 3


def protocol_config(risk, n_layers, loss="cont", kind="relu") -> RunConfig:
    """6000 subjects, 4000/1000/1000 split, fixed seeds, default training."""
    return RunConfig(
        data=DataConfig(sim=SimConfig(n=6000, risk=risk, seed=SIM_SEED)),
        model=ModelConfig(kind=kind, n_layers=n_layers, loss=loss),
        optim=OptimConfig(),
        prune=PruneConfig(),
        eval=EvalConfig(bootstrap=1000, cv_folds=5, seed=EVAL_SEED),
    )


@contextlib.contextmanager
def crash_guard(number):
    """Guarantee a verdict line even when the measurement itself crashes."""
    try:
        yield
    except Exception as err:
        record_criterion(number, False, "crashed before the check completed: %r" % (err,))
        raise


def conclude(number, ok, detail):
    record_criterion(number, ok, detail)
    assert ok, detail


# ---------------------------------------------------------------------------
# expensive shared runs

@pytest.fixture(scope="module")
def linear_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("linear_run")
    t0 = time.time()
    metrics = run_training(protocol_config("linear", 6), str(out))
    return {"metrics": metrics, "out": out, "seconds": time.time() - t0}


@pytest.fixture(scope="module")
def gaussian_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("gaussian_run")
    metrics = run_training(protocol_config("gaussian", 30), str(out))
    return {"metrics": metrics, "out": out}


# ---------------------------------------------------------------------------
# 1. linear simulation benchmark

def test_criterion_1_linear_benchmark(linear_run):
    with crash_guard(1):
        value = linear_run["metrics"]["test"]["antolini"]["value"]
        secs = linear_run["seconds"]
        ok = value >= 0.76 and secs < 300
        detail = ("linear sim test C^td %.4f (need >= 0.76), end-to-end %.0fs "
                  "(need < 300s)" % (value, secs))
    conclude(1, ok, detail)


# ---------------------------------------------------------------------------
# 2. gaussian simulation benchmark plus linear-cox gap

def test_criterion_2_gaussian_benchmark(gaussian_run):
    with crash_guard(2):
        model_val = gaussian_run["metrics"]["test"]["antolini"]["value"]
        cox = run_training(protocol_config("gaussian", 6, kind="linear-cox"))
        cox_val = cox["test"]["antolini"]["value"]
        model_ok = model_val >= 0.62
        cox_ok = 0.45 <= cox_val <= 0.57
        detail = ("gaussian sim test C^td %.4f (need >= 0.62: %s); linear-cox "
                  "baseline %.4f (need in [0.45, 0.57]: %s)"
                  % (model_val, "ok" if model_ok else "MISSED",
                     cox_val, "ok" if cox_ok else "MISSED"))
    conclude(2, model_ok and cox_ok, detail)


# ---------------------------------------------------------------------------
# 3. discrete-loss parity on the linear benchmark

def test_criterion_3_discrete_loss_benchmark():
    with crash_guard(3):
        metrics = run_training(protocol_config("linear", 6, loss="disc"))
        value = metrics["test"]["antolini"]["value"]
        ok = value >= 0.76
        detail = "discrete-loss linear sim test C^td %.4f (need >= 0.76)" % value
    conclude(3, ok, detail)


# ---------------------------------------------------------------------------
# 4. conditional external benchmark (user-supplied METABRIC export)

def test_criterion_4_metabric_when_supplied():
    path = os.environ.get("METABRIC_CSV")
    if not path:
        record_criterion(4, None, "needs a user-supplied METABRIC CSV "
                         "(set METABRIC_CSV); not part of the default suite")
        pytest.skip("METABRIC_CSV not set")
    with crash_guard(4):
        cfg = protocol_config("linear", 6)
        cfg.data.sim = None
        cfg.data.csv = path
        report = cross_validate(cfg)
        mean = report["antolini"]["mean"]
        ok = mean is not None and abs(mean - 0.679) <= 0.04
        detail = ("METABRIC 5-fold CV mean C^td %s (need within 0.04 of 0.679)"
                  % ("%.4f" % mean if mean is not None else "n/a"))
    conclude(4, ok, detail)


# ---------------------------------------------------------------------------
# 5. gradient oracle

def _loss_of(net, X, times, events, loss_kind, grid):
    t = forward(net, X, "soft", beta=2.3)
    if loss_kind == "cont":
        return cox_nll(t.head_out, times, events), t
    return deephit_loss(t.head_out, times, events, grid, 1.0, 0.3), t


def _fd_worst_error(net, X, times, events, loss_kind, grid, eps=1e-5):
    lv, trace = _loss_of(net, X, times, events, loss_kind, grid)
    g = backward(net, trace, lv.grad)
    analytic = list(g.dW) + list(g.db) + list(g.dhead.values())
    arrays = list(net.W) + list(net.b) + list(net.head.params.values())
    worst = 0.0
    for arr, ga in zip(arrays, analytic):
        it = np.nditer(arr, flags=["multi_index"])
        while not it.finished:
            i = it.multi_index
            old = arr[i]
            arr[i] = old + eps
            up = _loss_of(net, X, times, events, loss_kind, grid)[0].total
            arr[i] = old - eps
            dn = _loss_of(net, X, times, events, loss_kind, grid)[0].total
            arr[i] = old
            fd = (up - dn) / (2 * eps)
            denom = max(abs(ga[i]), abs(fd), 1e-6)
            worst = max(worst, abs(ga[i] - fd) / denom)
            it.iternext()
    return worst


def test_criterion_5_gradient_oracle():
    with crash_guard(5):
        rng = np.random.default_rng(77)
        worst = 0.0
        n_instances = 0
        for k in range(10):  # continuous loss instances
            head = "mlp" if k % 2 else "linear"
            net = init_network(4, 3, head_kind=head, head_hidden=6, seed=100 + k)
            X = rng.uniform(-1, 1, (10, 4))
            times = rng.exponential(1.0, 10) + 0.01
            events = rng.random(10) < 0.7
            events[0] = True
            worst = max(worst, _fd_worst_error(net, X, times, events, "cont", None))
            n_instances += 1
        for k in range(10):  # discrete loss instances
            head = "mlp" if k % 2 else "linear"
            times = rng.exponential(1.0, 12) + 0.01
            events = rng.random(12) < 0.75
            events[:2] = True
            grid = make_time_grid(times, events, 4)
            net = init_network(4, 3, head_kind=head, out_dim=grid.n_bins,
                               head_hidden=6, seed=200 + k)
            X = rng.uniform(-1, 1, (12, 4))
            worst = max(worst, _fd_worst_error(net, X, times, events, "disc", grid))
            n_instances += 1
        ok = worst < 1e-4 and n_instances >= 20
        detail = ("worst relative gradient error %.2e over %d instances "
                  "(need < 1e-4 on >= 20)" % (worst, n_instances))
    conclude(5, ok, detail)


# ---------------------------------------------------------------------------
# 6. statistical oracles

def _harrell_naive(risks, times, events):
    num, den = 0.0, 0
    for i in range(len(times)):
        for j in range(len(times)):
            if events[i] and times[i] < times[j]:
                den += 1
                if risks[i] > risks[j]:
                    num += 1.0
                elif risks[i] == risks[j]:
                    num += 0.5
    return num / den


def _antolini_naive(S, times, events):
    num, den = 0.0, 0
    for i in range(len(times)):
        for j in range(len(times)):
            if events[i] and times[i] < times[j]:
                den += 1
                if S[i, i] < S[j, i]:
                    num += 1.0
                elif S[i, i] == S[j, i]:
                    num += 0.5
    return num / den


def _logrank_naive(ta, ea, tb, eb):
    pooled = sorted({t for t, e in list(zip(ta, ea)) + list(zip(tb, eb)) if e})
    oe = var = 0.0
    for t in pooled:
        na = sum(1 for x in ta if x >= t)
        nb = sum(1 for x in tb if x >= t)
        d = sum(1 for x, e in zip(ta, ea) if e and x == t) \
            + sum(1 for x, e in zip(tb, eb) if e and x == t)
        da = sum(1 for x, e in zip(ta, ea) if e and x == t)
        n = na + nb
        oe += da - na * d / n
        if n > 1:
            var += na * nb * d * (n - d) / (n * n * (n - 1.0))
    if var <= 0:
        return 0.0, 1.0
    stat = oe * oe / var
    return stat, math.erfc(math.sqrt(stat / 2.0))


def _chi2_sf_simpson(x):
    a = math.sqrt(x)
    b = a + 14.0
    m = 80001
    s = np.linspace(a, b, m)
    f = math.sqrt(2.0 / math.pi) * np.exp(-0.5 * s * s)
    w = np.ones(m)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return float((b - a) / (m - 1) / 3.0 * np.sum(w * f))


def test_criterion_6_statistical_oracles():
    with crash_guard(6):
        rng = np.random.default_rng(55)
        parts = []

        # concordance indices: exact match to all-pairs enumeration
        conc_exact = True
        for _ in range(25):
            n = int(rng.integers(5, 201))
            times = np.round(rng.exponential(1.0, n), 1) + 0.1
            events = rng.random(n) < 0.7
            if not events.any():
                events[0] = True
            risks = np.round(rng.normal(size=n), 1)
            S = rng.uniform(0.01, 0.99, size=(n, n))
            conc_exact &= harrell_c(risks, times, events).value \
                == _harrell_naive(risks, times, events)
            conc_exact &= antolini_ctd_from_matrix(S, times, events).value \
                == _antolini_naive(S, times, events)
        parts.append(("concordance exact", conc_exact))

        # log-rank vs independent O/E/V tabulation
        lr_err = 0.0
        for _ in range(30):
            na, nb = int(rng.integers(5, 41)), int(rng.integers(5, 41))
            ta = np.round(rng.exponential(1.0, na), 1) + 0.1
            tb = np.round(rng.exponential(1.4, nb), 1) + 0.1
            ea = rng.random(na) < 0.7
            eb = rng.random(nb) < 0.7
            ea[0] = eb[0] = True
            res = log_rank_test(ta, ea, tb, eb)
            stat, p = _logrank_naive(ta, ea, tb, eb)
            lr_err = max(lr_err, abs(res.statistic - stat), abs(res.p_value - p))
        parts.append(("log-rank <= 1e-9", lr_err <= 1e-9))

        # chi-square tail vs Simpson integration
        chi_err = max(abs(chi2_sf(x) - _chi2_sf_simpson(x))
                      for x in (1e-6, 0.1, 0.455, 1.0, 2.0, 3.841, 5.0, 10.0, 20.0))
        parts.append(("chi2 <= 1e-8", chi_err <= 1e-8))

        # product-limit hand examples, exact arithmetic
        km = kaplan_meier([1, 2, 3], [True, True, True])
        km_ok = km.survival.tolist() == [1 - 1 / 3, (1 - 1 / 3) * (1 - 1 / 2), 0.0]
        km = kaplan_meier([1, 2, 3], [True, False, True])
        km_ok &= km.survival.tolist() == [1 - 1 / 3, 0.0]
        km = kaplan_meier([1, 1, 2], [True, False, True])
        km_ok &= km.at_risk.tolist() == [3, 1]
        km_ok &= km.survival.tolist() == [1 - 1 / 3, 0.0]
        parts.append(("KM exact", km_ok))

        ok = all(flag for _, flag in parts)
        detail = ("concordance exact: %s; log-rank err %.1e (<= 1e-9); "
                  "chi2 err %.1e (<= 1e-8); KM hand examples exact: %s"
                  % (parts[0][1], lr_err, chi_err, parts[3][1]))
    conclude(6, ok, detail)


# ---------------------------------------------------------------------------
# 7. pruning properties

def _walk_splits(node):
    if node["leaf"] is not None:
        return
    kids = node["children"]
    if len(kids) == 2:
        yield node
    for c in kids:
        yield from _walk_splits(c)


def test_criterion_7_pruning_properties(linear_run):
    with crash_guard(7):
        metrics = linear_run["metrics"]
        events_list = metrics["prune_events"]
        monotone = bool(events_list) and all(
            e["leaves_after"] <= e["leaves_before"] for e in events_list)

        with open(linear_run["out"] / "tree.json") as fh:
            tree = json.load(fh)
        splits = list(_walk_splits(tree))
        sig_ok = bool(splits) and all(
            s["p_value"] < 0.05 and min(c["n"] for c in s["children"]) >= 10
            for s in splits)

        # pruning the root collapses the tree to a single leaf
        ckpt = load_checkpoint(linear_run["out"] / "checkpoint.json")
        ds = apply_preprocess(simulate(SimConfig(n=6000, risk="linear",
                                                 seed=SIM_SEED)),
                              ckpt.preprocess)
        root_mask = PruneMask(ckpt.net.widths, prefixes=[()])
        tr = forward(ckpt.net, ds.X, "hard", mask=root_mask)
        root = reconstruct_tree(build_pattern_matrix(tr), ds.time, ds.event,
                                tr.head_out, ckpt.net.widths)
        one_leaf = len(leaves(root)) == 1

        ok = monotone and sig_ok and one_leaf
        detail = ("leaf counts non-increasing over %d prune events: %s; all %d "
                  "surviving splits have p < 0.05 and branches >= 10: %s; "
                  "root prune gives one leaf: %s"
                  % (len(events_list), monotone, len(splits), sig_ok, one_leaf))
    conclude(7, ok, detail)


# ---------------------------------------------------------------------------
# 8. rank-ratio behavior and rank oracle

def _rank_naive(m):
    rows = [[Fraction(int(v)) for v in r] for r in np.asarray(m)]
    n_rows, n_cols = len(rows), len(rows[0])
    rank = r = 0
    for c in range(n_cols):
        piv = next((i for i in range(r, n_rows) if rows[i][c] != 0), None)
        if piv is None:
            continue
        rows[r], rows[piv] = rows[piv], rows[r]
        lead = rows[r]
        for i in range(r + 1, n_rows):
            if rows[i][c] != 0:
                f = rows[i][c] / lead[c]
                rows[i] = [a - f * b for a, b in zip(rows[i], lead)]
        r += 1
        rank += 1
        if r == n_rows:
            break
    return rank


def test_criterion_8_rank_trace_and_oracle(gaussian_run):
    with crash_guard(8):
        ratios = gaussian_run["metrics"]["rank_trace"]["ratios"]
        declining = len(ratios) >= 2 and ratios[-1] < ratios[0]
        csv_ok = (gaussian_run["out"] / "rank_trace.csv").exists()

        rng = np.random.default_rng(66)
        oracle_ok = True
        for _ in range(100):
            m = rng.integers(0, 2, size=(int(rng.integers(1, 13)),
                                         int(rng.integers(1, 9))))
            oracle_ok &= matrix_rank(m) == _rank_naive(m)

        ok = declining and csv_ok and oracle_ok
        detail = ("gaussian rank ratio %.3f -> %.3f (need strict decline: %s, "
                  "trace csv: %s); rank oracle on 100 binary matrices: %s"
                  % (ratios[0], ratios[-1], declining, csv_ok, oracle_ok))
    conclude(8, ok, detail)


# ---------------------------------------------------------------------------
# 9. sparsity ablation

def test_criterion_9_sparsity_ablation():
    with crash_guard(9):
        cfg = RunConfig(
            data=DataConfig(sim=SimConfig(n=2000, risk="gaussian", seed=SIM_SEED)),
            model=ModelConfig(n_layers=10),
            optim=OptimConfig(epochs=40, early_stop=15),
            prune=PruneConfig(),
            eval=EvalConfig(bootstrap=1000, cv_folds=5, seed=EVAL_SEED),
        )
        lams = [0.0, 0.01, 0.05, 0.1]
        rows = ablate(cfg, "sparsity", lams)
        clean = all(r["error"] is None for r in rows)
        spars = [r["sparsity"] for r in rows]
        ctds = [r["ctd"] for r in rows]
        zero_at_zero = clean and spars[0] == 0.0
        increasing = clean and all(a <= b for a, b in zip(spars, spars[1:]))
        no_gain = clean and ctds[-1] <= ctds[0]
        ok = clean and zero_at_zero and increasing and no_gain
        detail = ("gaussian sweep lambda %s -> sparsity %s (weakly increasing: "
                  "%s, zero at 0: %s); C^td %.4f at max lambda vs %.4f at 0 "
                  "(no gain: %s)"
                  % (lams, ["%.3f" % s for s in spars] if clean else "n/a",
                     increasing, zero_at_zero,
                     ctds[-1] if clean else float("nan"),
                     ctds[0] if clean else float("nan"), no_gain))
    conclude(9, ok, detail)


# ---------------------------------------------------------------------------
# 10. end-to-end determinism

def _max_json_diff(a, b, path=""):
    """Largest float difference between two parsed JSON trees; inf on any
    structural mismatch."""
    if isinstance(a, dict) and isinstance(b, dict):
        if set(a) != set(b):
            return float("inf")
        return max((_max_json_diff(a[k], b[k]) for k in a), default=0.0)
    if isinstance(a, list) and isinstance(b, list):
        if len(a) != len(b):
            return float("inf")
        return max((_max_json_diff(x, y) for x, y in zip(a, b)), default=0.0)
    if isinstance(a, float) and isinstance(b, float):
        return abs(a - b)
    return 0.0 if a == b else float("inf")


def test_criterion_10_determinism(tmp_path):
    with crash_guard(10):
        def one(out):
            cfg = RunConfig(
                data=DataConfig(sim=SimConfig(n=500, risk="linear", seed=2)),
                model=ModelConfig(n_layers=3),
                optim=OptimConfig(epochs=10, batch_size=128, early_stop=10),
                prune=PruneConfig(),
                eval=EvalConfig(bootstrap=200, cv_folds=5, seed=11),
            )
            run_training(cfg, str(out))
            with open(out / "metrics.json") as fh:
                return json.load(fh)

        a = one(tmp_path / "a")
        b = one(tmp_path / "b")
        diff = _max_json_diff(a, b)
        ok = diff <= 1e-12
        detail = ("two identical runs: metrics.json max field difference %s "
                  "(need <= 1e-12)" % ("%.1e" % diff if np.isfinite(diff)
                                       else "structural mismatch"))
    conclude(10, ok, detail)


# ---------------------------------------------------------------------------
# 11. risk-shift invariance of the partial likelihood

def test_criterion_11_cox_shift_invariance():
    with crash_guard(11):
        rng = np.random.default_rng(88)
        worst = 0.0
        for _ in range(5):
            n = 60
            eta = rng.normal(size=n)
            times = np.round(rng.exponential(1.0, n), 2) + 0.01
            events = rng.random(n) < 0.6
            events[0] = True
            base = cox_nll(eta, times, events)
            for c in (-3.7, 0.001, 42.0):
                shifted = cox_nll(eta + c, times, events)
                worst = max(worst, abs(shifted.total - base.total),
                            float(np.max(np.abs(shifted.grad - base.grad))))
        ok = worst < 1e-9
        detail = ("largest loss/gradient change under additive risk shifts "
                  "%.1e (need < 1e-9)" % worst)
    conclude(11, ok, detail)
