"""Survival losses with analytic gradients w.r.t. the head outputs.

Continuous path: negative Cox partial likelihood (Breslow ties, batch-local
risk sets) over a scalar log-risk per subject. Discrete path: first-hitting
likelihood plus a concordance-style ranking penalty over a softmax PMF on a
quantile time grid. Both return the loss value and the exact gradient so the
network backward pass never needs autograd.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .network import NumericalError

PROB_FLOOR = 1e-12


@dataclass
class LossValue:
    total: float
    nll: float
    rank: float
    grad: np.ndarray  # N x 1 (continuous) or N x K (discrete)


@dataclass
class TimeGrid:
    """K-bin partition of [0, inf) by K-1 strictly increasing cut points."""

    cuts: np.ndarray

    def __post_init__(self):
        self.cuts = np.asarray(self.cuts, dtype=float)
        if self.cuts.ndim != 1 or self.cuts.size < 1:
            raise ValueError("need at least one cut point")
        if not np.all(np.diff(self.cuts) > 0):
            raise ValueError("cut points must be strictly increasing")

    @property
    def n_bins(self) -> int:
        return self.cuts.size + 1

    def bin_index(self, t):
        """Bin of each time; times on a cut fall into the upper bin."""
        t = np.asarray(t, dtype=float)
        if np.any(t < 0):
            raise ValueError("times must be non-negative")
        return np.searchsorted(self.cuts, t, side="right")

    def to_json_dict(self):
        return {"cuts": self.cuts.tolist()}

    @classmethod
    def from_json_dict(cls, d):
        return cls(np.asarray(d["cuts"], dtype=float))


def make_time_grid(times, events, n_bins) -> TimeGrid:
    """Equal-count bins: cuts at the j/K quantiles of observed event times."""
    if n_bins < 2:
        raise ValueError("need at least 2 bins")
    times = np.asarray(times, dtype=float)
    events = np.asarray(events, dtype=bool)
    ev_times = times[events]
    if np.unique(ev_times).size < 2:
        raise ValueError("need at least 2 distinct event times to place cuts")
    qs = np.arange(1, n_bins) / n_bins
    cuts = np.unique(np.quantile(ev_times, qs))
    return TimeGrid(cuts)


def _group_starts(sorted_times):
    n = sorted_times.size
    return np.flatnonzero(np.r_[True, sorted_times[1:] != sorted_times[:-1]])


def cox_nll(log_risks, times, events) -> LossValue:
    """Breslow-tied negative Cox partial likelihood, averaged over events.

    loss = -(1/D) sum_{i: event} [eta_i - log sum_{j: T_j >= T_i} exp(eta_j)]
    with the risk set restricted to the batch. One ascending-time pass with
    a max-shifted running sum keeps the log-sum-exp stable; the gradient is
    -(1/D) (E_k - exp(eta_k) * sum_{event times t <= T_k} d_t / R_t).
    """
    eta = np.asarray(log_risks, dtype=float).reshape(-1)
    times = np.asarray(times, dtype=float)
    events = np.asarray(events, dtype=bool)
    n = eta.size
    if times.shape != (n,) or events.shape != (n,):
        raise ValueError("log_risks, times and events must have equal length")
    if not np.all(np.isfinite(eta)):
        raise NumericalError("non-finite log-risks in the partial likelihood")
    d_total = int(events.sum())
    if d_total == 0:
        raise ValueError("Cox partial likelihood needs at least one event in the batch")

    order = np.argsort(times, kind="stable")
    t_s = times[order]
    e_s = events[order]
    shift = eta.max()
    w_s = np.exp(eta[order] - shift)

    starts = _group_starts(t_s)
    # suffix[i] = total shifted risk of everyone with time >= t_s[i]'s group
    suffix = np.cumsum(w_s[::-1])[::-1]
    grp = np.searchsorted(starts, np.arange(n), side="right") - 1
    risk_at_group = suffix[starts]  # per tied-time group
    d_per_group = np.add.reduceat(e_s.astype(float), starts)

    # a risk set can underflow to zero when the batch spans ~700+ nats; the
    # finiteness check below turns that into an explicit failure
    with np.errstate(divide="ignore", invalid="ignore"):
        log_risk_set = np.log(risk_at_group[grp])
        nll = -float(np.sum((eta[order][e_s] - shift) - log_risk_set[e_s])) / d_total

        # accumulated d/R over event-time groups at or before each subject's time
        acc = np.cumsum(d_per_group / risk_at_group)
        grad_s = -(e_s.astype(float) - w_s * acc[grp]) / d_total
    grad = np.empty(n)
    grad[order] = grad_s
    if not np.isfinite(nll) or not np.all(np.isfinite(grad_s)):
        raise NumericalError("non-finite Cox loss")
    return LossValue(nll, nll, 0.0, grad.reshape(-1, 1))


def _softmax(logits):
    z = logits - logits.max(axis=1, keepdims=True)
    p = np.exp(z)
    p /= p.sum(axis=1, keepdims=True)
    return p


def deephit_loss(pmf_logits, times, events, grid: TimeGrid, rank_weight=1.0,
                 rank_sigma=0.1) -> LossValue:
    """First-hitting NLL plus ranking penalty on a discrete PMF head.

    NLL (mean over batch): events pay -log p[bin(T)], censored pay
    -log(survival mass beyond bin(T)), both floored at 1e-12 inside the log.
    Ranking (mean over pairs i,j with E_i=1, T_i<T_j):
    exp(-(F_i(T_i) - F_j(T_i)) / rank_sigma), small when the earlier-event
    subject's cumulative incidence at its own event time is the larger one.
    """
    logits = np.atleast_2d(np.asarray(pmf_logits, dtype=float))
    times = np.asarray(times, dtype=float)
    events = np.asarray(events, dtype=bool)
    n, k = logits.shape
    if k != grid.n_bins:
        raise ValueError("logit columns %d != grid bins %d" % (k, grid.n_bins))
    if times.shape != (n,) or events.shape != (n,):
        raise ValueError("logits, times and events must have equal length")
    if rank_weight < 0 or rank_sigma <= 0:
        raise ValueError("rank_weight must be >= 0 and rank_sigma > 0")
    if not np.all(np.isfinite(logits)):
        raise NumericalError("non-finite logits in the discrete loss")
    if rank_weight > 0 and not events.any():
        warnings.warn("all-censored batch: ranking term is zero", RuntimeWarning)

    p = _softmax(logits)
    bins = grid.bin_index(times)
    rows = np.arange(n)

    # --- likelihood term ---
    surv_beyond = 1.0 - np.cumsum(p, axis=1)  # S[i, b] = P(bin > b)
    own = np.where(events, p[rows, bins], surv_beyond[rows, bins])
    clamped = own < PROB_FLOOR
    nll = float(np.mean(-np.log(np.maximum(own, PROB_FLOOR))))

    # dNLL/dp, then through the softmax at the end together with the rank term
    g_p = np.zeros_like(p)
    inv = np.where(clamped, 0.0, -1.0 / np.maximum(own, PROB_FLOOR)) / n
    ev = events & ~clamped
    g_p[rows[ev], bins[ev]] = inv[ev]
    ce = ~events & ~clamped
    if ce.any():
        beyond = np.arange(k)[None, :] > bins[:, None]
        g_p += np.where(ce[:, None] & beyond, inv[:, None], 0.0)

    # --- ranking term ---
    cum = np.cumsum(p, axis=1)  # F[i, b] = P(bin <= b)
    pair_mask = events[:, None] & (times[:, None] < times[None, :])
    n_pairs = int(pair_mask.sum())
    g_cum = np.zeros_like(p)
    if n_pairs > 0:
        f_other = cum[:, bins].T  # [i, j] = F_j at subject i's bin
        f_own = cum[rows, bins]
        with np.errstate(over="raise"):
            try:
                w = np.where(pair_mask,
                             np.exp((f_other - f_own[:, None]) / rank_sigma), 0.0)
            except FloatingPointError:
                raise NumericalError("ranking term overflow; rank_sigma too small")
        rank = float(w.sum()) / n_pairs
        # pair (i,j) pulls F_i(T_i) up and pushes F_j(T_i) down by w/sigma
        v = w / (rank_sigma * n_pairs)
        row_sum = v.sum(axis=1)  # per i
        for b in range(k):
            at_b = bins == b
            if at_b.any():
                g_cum[:, b] += v[at_b, :].sum(axis=0)
                g_cum[at_b, b] -= row_sum[at_b]
        # cum -> p: dp[m] = sum_{b >= m} dcum[b]
        g_p_rank = np.cumsum(g_cum[:, ::-1], axis=1)[:, ::-1]
        g_p = g_p + rank_weight * g_p_rank
    else:
        rank = 0.0

    # softmax backward: dz = p * (g - sum_j g_j p_j)
    grad = p * (g_p - np.sum(g_p * p, axis=1, keepdims=True))
    total = nll + rank_weight * rank
    if not np.isfinite(total):
        raise NumericalError("non-finite discrete loss")
    return LossValue(total, nll, rank, grad)


@dataclass
class BaselineHazard:
    """Step-function Breslow cumulative baseline hazard fitted on train data."""

    times: np.ndarray  # distinct event times, ascending
    cumhaz: np.ndarray  # H0 at those times

    def cumhaz_at(self, t):
        t = np.asarray(t, dtype=float)
        if np.any(t < 0):
            raise ValueError("times must be non-negative")
        idx = np.searchsorted(self.times, t, side="right")
        padded = np.r_[0.0, self.cumhaz]
        return padded[idx]

    def to_json_dict(self):
        return {"times": self.times.tolist(), "values": self.cumhaz.tolist()}

    @classmethod
    def from_json_dict(cls, d):
        return cls(np.asarray(d["times"], dtype=float),
                   np.asarray(d["values"], dtype=float))


def breslow_baseline(log_risks, times, events) -> BaselineHazard:
    """H0(t) = sum over event times s <= t of d_s / sum_{T_j >= s} exp(eta_j)."""
    eta = np.asarray(log_risks, dtype=float).reshape(-1)
    times = np.asarray(times, dtype=float)
    events = np.asarray(events, dtype=bool)
    if not events.any():
        raise ValueError("baseline hazard needs at least one event")
    order = np.argsort(times, kind="stable")
    t_s = times[order]
    e_s = events[order]
    shift = eta.max()
    w_s = np.exp(eta[order] - shift)

    starts = _group_starts(t_s)
    suffix = np.cumsum(w_s[::-1])[::-1]
    risk_at_group = suffix[starts]
    d_per_group = np.add.reduceat(e_s.astype(float), starts)
    has_event = d_per_group > 0
    increments = d_per_group[has_event] / risk_at_group[has_event] * np.exp(-shift)
    return BaselineHazard(t_s[starts][has_event], np.cumsum(increments))


def survival_matrix_continuous(eta, baseline: BaselineHazard, eval_times):
    """S[j, i] = exp(-exp(eta_j) * H0(eval_times[i]))."""
    eta = np.asarray(eta, dtype=float).reshape(-1)
    h0 = baseline.cumhaz_at(eval_times)
    return np.exp(-np.exp(eta)[:, None] * h0[None, :])


def survival_matrix_discrete(pmf, grid: TimeGrid, eval_times):
    """S[j, i] = 1 - F_j(bin(eval_times[i])), cumulative incidence inclusive."""
    pmf = np.atleast_2d(np.asarray(pmf, dtype=float))
    cum = np.cumsum(pmf, axis=1)
    return 1.0 - cum[:, grid.bin_index(eval_times)]


def predict_survival(head_output, grid: TimeGrid | None = None,
                     baseline: BaselineHazard | None = None):
    """Build f(subject, time) -> survival probability from head outputs.

    Scalar log-risk column + baseline: S_i(t) = exp(-exp(eta_i) H0(t)).
    PMF rows + grid: S_i(t) = 1 - sum_{k <= bin(t)} p_i[k].
    """
    out = np.atleast_2d(np.asarray(head_output, dtype=float))
    if out.shape[1] == 1:
        if baseline is None:
            raise ValueError("continuous predictions need a fitted baseline hazard")
        eta = out[:, 0]

        def surv(i, t):
            t = float(t)
            if t < 0:
                raise ValueError("times must be non-negative")
            return float(np.exp(-np.exp(eta[i]) * baseline.cumhaz_at(t)))

        return surv
    if grid is None:
        raise ValueError("discrete predictions need the training time grid")
    if out.shape[1] != grid.n_bins:
        raise ValueError("PMF columns do not match the grid")
    cum = np.cumsum(out, axis=1)

    def surv(i, t):
        t = float(t)
        if t < 0:
            raise ValueError("times must be non-negative")
        return float(1.0 - cum[i, grid.bin_index(t)])

    return surv
