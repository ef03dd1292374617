"""Classical survival statistics.

Kaplan-Meier product-limit estimation, the two-sample log-rank test with
chi-square (df=1) p-values, Harrell and time-dependent concordance, and
percentile bootstrap confidence intervals.

Tie convention: subjects censored exactly at an event time remain in the
risk set for that event time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass
class KMCurve:
    """Product-limit survival estimate evaluated at the distinct event times.

    S(t) = prod_{t_i <= t} (1 - d_i / n_i) with d_i events and n_i at risk
    just before t_i. Before the first event time S = 1.
    """

    times: np.ndarray
    survival: np.ndarray
    at_risk: np.ndarray
    n_events: np.ndarray

    def survival_at(self, t):
        """Step-function lookup S(t); 1.0 before the first event time."""
        idx = np.searchsorted(self.times, np.asarray(t, dtype=float), side="right")
        s = np.concatenate([[1.0], self.survival])
        return s[idx]

    @property
    def median(self):
        """Smallest event time with S <= 0.5, or nan if never reached."""
        below = np.flatnonzero(self.survival <= 0.5)
        return float(self.times[below[0]]) if len(below) else float("nan")

    def to_csv(self, path):
        header = "time,survival,at_risk,events"
        body = np.column_stack([self.times, self.survival, self.at_risk, self.n_events])
        np.savetxt(path, body, delimiter=",", header=header, comments="")


@dataclass
class LogRankResult:
    statistic: float
    p_value: float
    n_a: int
    n_b: int
    observed_a: float
    expected_a: float


@dataclass
class ConcordanceResult:
    value: float
    comparable_pairs: int
    concordant: float  # ties credited 1/2
    method: str


def kaplan_meier(times, events) -> KMCurve:
    """Kaplan-Meier estimator from possibly-censored observations."""
    times = np.asarray(times, dtype=float)
    events = np.asarray(events, dtype=bool)
    if times.shape != events.shape or times.ndim != 1:
        raise ValueError("times and events must be equal-length 1-d arrays")
    if len(times) == 0:
        raise ValueError("empty input")
    if np.any(times < 0):
        raise ValueError("times must be non-negative")

    event_times = np.unique(times[events])
    sorted_times = np.sort(times)
    # risk set just before t: everyone with time >= t
    at_risk = len(times) - np.searchsorted(sorted_times, event_times, side="left")
    sorted_event_times = np.sort(times[events])
    d = np.searchsorted(sorted_event_times, event_times, side="right") - np.searchsorted(
        sorted_event_times, event_times, side="left"
    )
    survival = np.cumprod(1.0 - d / at_risk)
    return KMCurve(event_times, survival, at_risk.astype(int), d.astype(int))


def chi2_sf(x, df=1) -> float:
    """Upper-tail probability of the chi-square distribution with one df.

    For df=1 this is erfc(sqrt(x/2)), exact to double precision.
    """
    if df != 1:
        raise ValueError("only df=1 is supported")
    x = float(x)
    if x < 0:
        raise ValueError("chi-square statistic must be non-negative")
    return math.erfc(math.sqrt(x / 2.0))


def log_rank_test(times_a, events_a, times_b, events_b) -> LogRankResult:
    """Two-sample log-rank test.

    Accumulates observed-minus-expected events in group A and the
    hypergeometric variance over the pooled distinct event times; the
    statistic is (sum(O-E))^2 / sum(V), referred to chi-square df=1.
    Degenerate variance (no events, or every risk set of size <= 1)
    returns statistic 0 and p = 1.
    """
    ta = np.asarray(times_a, dtype=float)
    ea = np.asarray(events_a, dtype=bool)
    tb = np.asarray(times_b, dtype=float)
    eb = np.asarray(events_b, dtype=bool)
    if len(ta) == 0 or len(tb) == 0:
        raise ValueError("both groups must be non-empty")

    pooled = np.unique(np.concatenate([ta[ea], tb[eb]]))
    sa, sb = np.sort(ta), np.sort(tb)
    na = len(ta) - np.searchsorted(sa, pooled, side="left")
    nb = len(tb) - np.searchsorted(sb, pooled, side="left")
    sea, seb = np.sort(ta[ea]), np.sort(tb[eb])
    da = np.searchsorted(sea, pooled, side="right") - np.searchsorted(sea, pooled, side="left")
    db = np.searchsorted(seb, pooled, side="right") - np.searchsorted(seb, pooled, side="left")

    n = na + nb
    d = da + db
    expected_a = na * d / n
    oe = float(np.sum(da - expected_a))
    big = n > 1
    var = np.zeros_like(expected_a)
    var[big] = (na * nb * d * (n - d))[big] / (n[big] ** 2 * (n[big] - 1.0))
    total_var = float(np.sum(var))

    if total_var <= 0.0:
        stat, p = 0.0, 1.0
    else:
        stat = oe * oe / total_var
        p = chi2_sf(stat)
    return LogRankResult(
        statistic=stat,
        p_value=p,
        n_a=len(ta),
        n_b=len(tb),
        observed_a=float(np.sum(da)),
        expected_a=float(np.sum(expected_a)),
    )


def _comparable_mask(times, events):
    """Pair mask C[i, j]: subject i had an observed event strictly before T_j."""
    times = np.asarray(times, dtype=float)
    events = np.asarray(events, dtype=bool)
    return events[:, None] & (times[:, None] < times[None, :])


def harrell_c(risks, times, events) -> ConcordanceResult:
    """Harrell concordance: over pairs with T_i < T_j and E_i = 1, score
    risk_i > risk_j as concordant, risk ties as 1/2."""
    risks = np.asarray(risks, dtype=float)
    times = np.asarray(times, dtype=float)
    events = np.asarray(events, dtype=bool)
    if not (len(risks) == len(times) == len(events)):
        raise ValueError("input lengths disagree")
    if len(risks) < 2:
        raise ValueError("need at least two subjects")
    comp = _comparable_mask(times, events)
    n_comp = int(comp.sum())
    if n_comp == 0:
        raise ValueError("no comparable pairs")
    gt = risks[:, None] > risks[None, :]
    eq = risks[:, None] == risks[None, :]
    concordant = float(np.sum(comp & gt) + 0.5 * np.sum(comp & eq))
    return ConcordanceResult(concordant / n_comp, n_comp, concordant, "harrell")


def antolini_ctd_from_matrix(surv_matrix, times, events) -> ConcordanceResult:
    """Time-dependent concordance from a precomputed survival matrix.

    ``surv_matrix[j, i]`` is subject j's predicted survival evaluated at
    subject i's recorded time. A pair (i, j) with T_i < T_j and E_i = 1 is
    concordant when S_i(T_i) < S_j(T_i); ties count 1/2.
    """
    S = np.asarray(surv_matrix, dtype=float)
    times = np.asarray(times, dtype=float)
    events = np.asarray(events, dtype=bool)
    n = len(times)
    if S.shape != (n, n):
        raise ValueError("survival matrix must be N x N")
    comp = _comparable_mask(times, events)
    n_comp = int(comp.sum())
    if n_comp == 0:
        raise ValueError("no comparable pairs")
    own = np.diag(S)  # S_i(T_i)
    # i indexes rows of the comparability mask; S_j(T_i) = S[j, i]
    lt = own[:, None] < S.T
    eq = own[:, None] == S.T
    concordant = float(np.sum(comp & lt) + 0.5 * np.sum(comp & eq))
    return ConcordanceResult(concordant / n_comp, n_comp, concordant, "antolini")


def antolini_ctd(surv_at, times, events) -> ConcordanceResult:
    """Time-dependent concordance from a survival callable.

    ``surv_at(subject_index, t)`` must return the predicted survival
    probability for that subject at time t. For bulk evaluation prefer
    :func:`antolini_ctd_from_matrix` with a vectorized survival matrix.
    """
    times = np.asarray(times, dtype=float)
    n = len(times)
    S = np.empty((n, n))
    for j in range(n):
        for i in range(n):
            S[j, i] = surv_at(j, float(times[i]))
    return antolini_ctd_from_matrix(S, times, events)


class BootstrapError(RuntimeError):
    """Raised when too many bootstrap resamples fail to evaluate."""


def bootstrap_ci(metric, n, n_boot, seed) -> tuple:
    """Percentile bootstrap 95% interval for ``metric(indices) -> float``.

    The point estimate uses the full index set; resamples draw n indices
    with replacement. A resample on which the metric raises ValueError is
    redrawn, up to 10 * n_boot total draws. Per-resample RNG streams are
    derived from (seed, draw index), so results are reproducible and the
    draws could be evaluated in parallel.
    """
    if n_boot < 100:
        raise ValueError("need at least 100 bootstrap resamples")
    point = float(metric(np.arange(n)))
    values = []
    draw = 0
    while len(values) < n_boot:
        if draw >= 10 * n_boot:
            raise BootstrapError(
                "metric failed on too many resamples (%d draws for %d successes)"
                % (draw, len(values))
            )
        rng = np.random.default_rng([int(seed), draw])
        idx = rng.integers(0, n, size=n)
        draw += 1
        try:
            values.append(float(metric(idx)))
        except ValueError:
            continue
    lower, upper = np.percentile(values, [2.5, 97.5])
    return point, float(lower), float(upper)
