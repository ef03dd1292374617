"""Right-censored survival datasets: CSV ingestion, preprocessing, splits.

Numeric features are z-scored using the population (divide-by-N) standard
deviation; categorical features expand to one-hot blocks with the category
set observed at fit time. Rows with a missing feature cell are dropped at
load time (no imputation). All randomized operations are pure functions of
their inputs and an integer seed.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np


class DataError(Exception):
    """Base class for dataset ingestion/validation failures."""


class SchemaError(DataError):
    """Missing column, wrong role, or dimension mismatch."""


class RowError(DataError):
    """Unparseable cell in a data row; carries the 1-based file line number."""

    def __init__(self, line, message):
        super().__init__("line %d: %s" % (line, message))
        self.line = line


@dataclass
class SurvivalRecord:
    """One subject: covariate vector, record time, event indicator."""

    covariates: list
    time: float
    event: bool


class Dataset:
    """Column-major survival dataset.

    ``X`` is (N, d); float64 when every feature is numeric, otherwise an
    object array holding a mix of floats and category strings (resolved to
    float64 by ``apply_preprocess``). ``time`` is float64, ``event`` bool.
    """

    def __init__(self, X, time, event, feature_names):
        X = np.asarray(X)
        if X.ndim != 2:
            raise SchemaError("covariate matrix must be 2-dimensional")
        time = np.asarray(time, dtype=float)
        event = np.asarray(event, dtype=bool)
        if not (len(time) == len(event) == X.shape[0]):
            raise SchemaError("X, time, and event lengths disagree")
        if X.shape[1] != len(feature_names):
            raise SchemaError("feature_names length does not match covariate dimension")
        if len(time) and (np.any(~np.isfinite(time)) or np.any(time < 0)):
            raise DataError("record times must be finite and non-negative")
        self.X = X
        self.time = time
        self.event = event
        self.feature_names = list(feature_names)
        self.n_dropped_rows = 0  # set by load_csv when rows are skipped

    @property
    def N(self):
        return self.X.shape[0]

    @property
    def d(self):
        return self.X.shape[1]

    def record(self, i) -> SurvivalRecord:
        return SurvivalRecord(list(self.X[i]), float(self.time[i]), bool(self.event[i]))

    def subset(self, indices) -> "Dataset":
        idx = np.asarray(indices, dtype=int)
        return Dataset(self.X[idx], self.time[idx], self.event[idx], self.feature_names)

    def numeric_X(self) -> np.ndarray:
        """Covariates as float64; raises SchemaError on residual categories."""
        try:
            return self.X.astype(float)
        except (TypeError, ValueError) as exc:
            raise SchemaError(
                "dataset still contains non-numeric features; run apply_preprocess first"
            ) from exc

    @classmethod
    def from_records(cls, records, feature_names):
        X = [r.covariates for r in records]
        return cls(
            np.asarray(X, dtype=object) if _any_str(X) else np.asarray(X, dtype=float),
            [r.time for r in records],
            [r.event for r in records],
            feature_names,
        )


def _any_str(rows):
    return any(isinstance(v, str) for row in rows for v in row)


_TRUE = {"1", "true", "t", "True", "TRUE", "T"}
_FALSE = {"0", "false", "f", "False", "FALSE", "F"}


def _parse_event(cell, line):
    cell = cell.strip()
    if cell in _TRUE:
        return True
    if cell in _FALSE:
        return False
    raise RowError(line, "event value %r is not 0/1 or true/false" % cell)


def load_csv(path, time_col="time", event_col="event", feature_cols=None) -> Dataset:
    """Load a survival dataset from a comma-separated file with a header row.

    Feature cells are parsed as floats where possible; non-numeric cells are
    kept as category strings for later one-hot expansion. Rows with an empty
    feature cell are dropped and counted in ``Dataset.n_dropped_rows``.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError("%s: file is empty" % path)
        header = [h.strip() for h in header]
        for col in (time_col, event_col):
            if col not in header:
                raise SchemaError("required column %r not found in header" % col)
        if feature_cols is None:
            feature_cols = [h for h in header if h not in (time_col, event_col)]
        else:
            missing = [c for c in feature_cols if c not in header]
            if missing:
                raise SchemaError("feature columns not in header: %s" % missing)
        t_idx = header.index(time_col)
        e_idx = header.index(event_col)
        f_idx = [header.index(c) for c in feature_cols]

        times, events, rows = [], [], []
        n_dropped = 0
        for line_no, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise RowError(line_no, "expected %d cells, got %d" % (len(header), len(row)))
            feats = []
            missing_cell = False
            for j in f_idx:
                cell = row[j].strip()
                if cell == "":
                    missing_cell = True
                    break
                try:
                    feats.append(float(cell))
                except ValueError:
                    feats.append(cell)  # category string
            if missing_cell:
                n_dropped += 1
                continue
            try:
                t = float(row[t_idx])
            except ValueError:
                raise RowError(line_no, "time value %r is not a number" % row[t_idx])
            if not np.isfinite(t) or t < 0:
                raise RowError(line_no, "time value %r is negative or non-finite" % row[t_idx])
            events.append(_parse_event(row[e_idx], line_no))
            times.append(t)
            rows.append(feats)

    if not rows:
        raise DataError("%s: no usable rows after parsing" % path)
    X = np.asarray(rows, dtype=object) if _any_str(rows) else np.asarray(rows, dtype=float)
    ds = Dataset(X, times, events, feature_cols)
    ds.n_dropped_rows = n_dropped
    return ds


def write_csv(ds: Dataset, path, time_col="time", event_col="event"):
    """Write a dataset in the same layout load_csv reads."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow([time_col, event_col] + list(ds.feature_names))
        for i in range(ds.N):
            row = [repr(float(ds.time[i])), int(ds.event[i])]
            for v in ds.X[i]:
                row.append(v if isinstance(v, str) else repr(float(v)))
            writer.writerow(row)


@dataclass
class PreprocessSpec:
    """Train-fitted feature transform: z-scoring stats plus one-hot category lists.

    ``numeric`` holds (name, mean, population std) for retained numeric
    columns; ``categorical`` holds (name, ordered category list); ``dropped``
    names zero-variance columns removed from the output.
    """

    numeric: list = field(default_factory=list)  # [(name, mean, std)]
    categorical: list = field(default_factory=list)  # [(name, [categories])]
    dropped: list = field(default_factory=list)
    source_features: list = field(default_factory=list)

    def to_json_dict(self):
        return {
            "numeric": [{"name": n, "mean": m, "std": s} for n, m, s in self.numeric],
            "categorical": [{"name": n, "categories": list(c)} for n, c in self.categorical],
            "dropped": list(self.dropped),
            "source_features": list(self.source_features),
        }

    @classmethod
    def from_json_dict(cls, d):
        return cls(
            numeric=[(e["name"], e["mean"], e["std"]) for e in d["numeric"]],
            categorical=[(e["name"], list(e["categories"])) for e in d["categorical"]],
            dropped=list(d["dropped"]),
            source_features=list(d.get("source_features", [])),
        )

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json_dict(), fh, indent=2)

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.from_json_dict(json.load(fh))


def fit_preprocess(train: Dataset, categorical=()) -> PreprocessSpec:
    """Compute z-scoring statistics and category lists on the training split only.

    Zero-variance numeric columns are dropped (recorded, not an error).
    Uses the population standard deviation.
    """
    if train.N == 0:
        raise DataError("cannot fit preprocessing on an empty dataset")
    categorical = set(categorical)
    unknown = categorical - set(train.feature_names)
    if unknown:
        raise SchemaError("categorical columns not in dataset: %s" % sorted(unknown))

    spec = PreprocessSpec(source_features=list(train.feature_names))
    for j, name in enumerate(train.feature_names):
        col = train.X[:, j]
        if name in categorical:
            seen = []
            for v in col:
                key = v if isinstance(v, str) else float(v)
                if key not in seen:
                    seen.append(key)
            spec.categorical.append((name, seen))
        else:
            try:
                vals = col.astype(float)
            except (TypeError, ValueError) as exc:
                raise SchemaError(
                    "column %r contains non-numeric values; list it as categorical" % name
                ) from exc
            std = float(np.std(vals))
            if std <= 0.0:
                spec.dropped.append(name)
            else:
                spec.numeric.append((name, float(np.mean(vals)), std))
    return spec


def apply_preprocess(ds: Dataset, spec: PreprocessSpec) -> Dataset:
    """Apply a fitted spec: z-score numerics, expand categoricals to one-hot.

    Categories unseen at fit time map to the all-zeros one-hot block.
    Output covariates are always float64.
    """
    if list(ds.feature_names) != list(spec.source_features):
        raise SchemaError(
            "dataset columns %s do not match the fitted spec %s"
            % (ds.feature_names, spec.source_features)
        )
    numeric = {name: (mean, std) for name, mean, std in spec.numeric}
    cats = dict(spec.categorical)
    dropped = set(spec.dropped)

    cols, names = [], []
    for j, name in enumerate(ds.feature_names):
        col = ds.X[:, j]
        if name in dropped:
            continue
        if name in cats:
            levels = cats[name]
            keys = [v if isinstance(v, str) else float(v) for v in col]
            for lv in levels:
                cols.append(np.asarray([1.0 if k == lv else 0.0 for k in keys]))
                names.append("%s=%s" % (name, lv))
        elif name in numeric:
            mean, std = numeric[name]
            cols.append((col.astype(float) - mean) / std)
            names.append(name)
        else:
            raise SchemaError("column %r has no role in the fitted spec" % name)
    X = np.column_stack(cols) if cols else np.empty((ds.N, 0))
    out = Dataset(X.astype(float), ds.time, ds.event, names)
    out.n_dropped_rows = ds.n_dropped_rows
    return out


def split(ds: Dataset, fractions, seed) -> tuple:
    """Random disjoint train/validation/test split, deterministic under seed."""
    fractions = tuple(float(f) for f in fractions)
    if len(fractions) != 3 or any(f <= 0 for f in fractions):
        raise ValueError("need three positive fractions")
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ValueError("fractions must sum to 1, got %r" % (sum(fractions),))
    n1 = int(round(fractions[0] * ds.N))
    n2 = int(round(fractions[1] * ds.N))
    n3 = ds.N - n1 - n2
    if min(n1, n2, n3) <= 0:
        raise ValueError("split sizes %s contain an empty part" % ((n1, n2, n3),))
    perm = np.random.default_rng(seed).permutation(ds.N)
    return (
        ds.subset(perm[:n1]),
        ds.subset(perm[n1 : n1 + n2]),
        ds.subset(perm[n1 + n2 :]),
    )


def kfold(ds: Dataset, k, seed, stratify_by_event=True) -> list:
    """k disjoint test folds covering the dataset; returns [(train_idx, test_idx)].

    Stratification keeps per-fold event counts balanced within one sample.
    """
    if k < 2:
        raise ValueError("k must be at least 2")
    if k > ds.N:
        raise ValueError("k=%d exceeds dataset size %d" % (k, ds.N))
    rng = np.random.default_rng(seed)
    if stratify_by_event:
        groups = [np.flatnonzero(ds.event), np.flatnonzero(~ds.event)]
        for g in groups:
            if 0 < len(g) < k:
                raise ValueError("a stratum has fewer than k=%d members" % k)
        fold_members = [[] for _ in range(k)]
        for g in groups:
            g = rng.permutation(g)
            for fold_i, chunk in enumerate(np.array_split(g, k)):
                fold_members[fold_i].append(chunk)
        test_folds = [np.sort(np.concatenate(c)) for c in fold_members]
    else:
        perm = rng.permutation(ds.N)
        test_folds = [np.sort(c) for c in np.array_split(perm, k)]
    out = []
    all_idx = np.arange(ds.N)
    for test in test_folds:
        mask = np.ones(ds.N, dtype=bool)
        mask[test] = False
        out.append((all_idx[mask], test))
    return out
