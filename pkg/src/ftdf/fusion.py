"""Multi-descriptor fusion.

Two descriptor pairs are tracked per window; for each configured lag n the
pair-vector at window k is correlated (inner product) with the pair-vector at
window k-n, and the two branch correlations are multiplied into one fused
value. Fused columns sit next to the normalized raw descriptor values, one
matrix row per window with full lag history.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .descriptors import DESCRIPTOR_IDS, DescriptorParams, extract_series
from .errors import (
    ClassTooSmall,
    IndexOutOfRange,
    InsufficientData,
    InvalidSpec,
    LagOutOfRange,
    NonFiniteSample,
    PlanMismatch,
    TooFewWindows,
)
from .evaluate import stratified_split
from .windowing import DEFAULT_OVERLAP, plan_windows

DEFAULT_PAIR_A = ("madf", "iamf")
DEFAULT_PAIR_B = ("rmsf", "wlf")
DEFAULT_LAGS = (1, 2, 3)
MAX_LAG = 8
_STD_FLOOR = 1e-12


@dataclass
class FusionConfig:
    pair_a: tuple = DEFAULT_PAIR_A
    pair_b: tuple = DEFAULT_PAIR_B
    lags: tuple = DEFAULT_LAGS
    include_raw: bool = True

    def validate(self):
        descs = self.descriptors()
        if len(set(descs)) != 4:
            raise InvalidSpec(f"fusion needs four distinct descriptors, got {descs}")
        for d in descs:
            if d not in DESCRIPTOR_IDS:
                raise InvalidSpec(f"unknown descriptor {d!r}")
        if not self.lags:
            raise InvalidSpec("at least one lag required")
        lags = tuple(sorted({int(n) for n in self.lags}))
        if lags[0] < 1 or lags[-1] > MAX_LAG:
            raise InvalidSpec(f"lags must be in 1..{MAX_LAG}, got {self.lags}")
        self.lags = lags
        return self

    def descriptors(self):
        return (self.pair_a[0], self.pair_a[1], self.pair_b[0], self.pair_b[1])

    def max_lag(self):
        return max(self.lags)

    def column_names(self):
        cols = list(self.descriptors()) if self.include_raw else []
        cols += [f"fused_lag{n}" for n in sorted(self.lags)]
        return cols


@dataclass
class Normalizer:
    """Per-descriptor z-score statistics, fit on training windows only.
    Population std; stds below 1e-12 are clamped to 1."""

    stats: dict = field(default_factory=dict)  # descriptor -> (mean, std)

    def transform(self, descriptor, values):
        mean, std = self.stats[descriptor]
        return (np.asarray(values, dtype=np.float64) - mean) / std

    @classmethod
    def identity(cls, descriptors):
        return cls({d: (0.0, 1.0) for d in descriptors})


def fit_normalizer(series_by_desc, train_indices=None):
    """Fit per-descriptor mean/std over the training windows of each series.

    `series_by_desc` maps descriptor -> FeatureSeries or raw value array;
    `train_indices` restricts the fit (default: all windows are training).
    """
    stats = {}
    for desc, series in series_by_desc.items():
        values = np.asarray(getattr(series, "values", series), dtype=np.float64)
        if train_indices is not None:
            values = values[np.asarray(train_indices)]
        if values.size < 2:
            raise InsufficientData(f"need >= 2 training windows for {desc}, got {values.size}")
        mean = float(np.mean(values))
        std = float(np.std(values))
        if std < _STD_FLOOR:
            std = 1.0
        stats[desc] = (mean, std)
    return Normalizer(stats)


def branch_correlation(series_a, series_b, k, n):
    """Inner product of the (a, b) pair-vector at window k with the one at
    window k-n. Series values are assumed already normalized; k is 1-based."""
    va = np.asarray(getattr(series_a, "values", series_a), dtype=np.float64)
    vb = np.asarray(getattr(series_b, "values", series_b), dtype=np.float64)
    if k > va.size or k > vb.size or k < 1:
        raise IndexOutOfRange(f"window {k} not in 1..{min(va.size, vb.size)}")
    if n < 1 or k <= n:
        raise LagOutOfRange(f"lag {n} needs window index k > n, got k={k}")
    return float(va[k - 1] * va[k - 1 - n] + vb[k - 1] * vb[k - 1 - n])


@dataclass
class FusedFeatureMatrix:
    features: np.ndarray  # (rows, columns)
    labels: list
    columns: list
    trace_ids: list = field(default_factory=list)
    window_indices: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=int))

    @property
    def n_rows(self):
        return self.features.shape[0]


def _plan_key(plan):
    return (plan.window_len, plan.hop, plan.count)


def ftdf(series_by_desc, cfg, norm, label):
    """Fuse one trace's raw descriptor series into matrix rows.

    One row per window k > max(lags): normalized raw values of the four
    configured descriptors (when include_raw), then one fused column per lag,
    fused_n(k) = branchA(k, n) * branchB(k, n).
    """
    cfg.validate()
    descs = cfg.descriptors()
    missing = [d for d in descs if d not in series_by_desc]
    if missing:
        raise InvalidSpec(f"missing series for {missing}")
    plans = {_plan_key(series_by_desc[d].plan) for d in descs}
    refs = {series_by_desc[d].trace_ref for d in descs}
    if len(plans) != 1 or len(refs) != 1:
        raise PlanMismatch("fused series must share one window plan and trace")
    count = series_by_desc[descs[0]].plan.count
    max_lag = cfg.max_lag()
    if count <= max_lag:
        raise TooFewWindows(f"{count} windows cannot support lag {max_lag}")

    normed = {d: norm.transform(d, series_by_desc[d].values) for d in descs}
    a1, a2 = normed[cfg.pair_a[0]], normed[cfg.pair_a[1]]
    b1, b2 = normed[cfg.pair_b[0]], normed[cfg.pair_b[1]]

    rows = count - max_lag
    cols = []
    if cfg.include_raw:
        cols.extend(normed[d][max_lag:] for d in descs)
    for n in sorted(cfg.lags):
        cur = slice(max_lag, count)
        prev = slice(max_lag - n, count - n)
        branch_a = a1[cur] * a1[prev] + a2[cur] * a2[prev]
        branch_b = b1[cur] * b1[prev] + b2[cur] * b2[prev]
        cols.append(branch_a * branch_b)
    features = np.column_stack(cols)
    if not np.isfinite(features).all():
        raise NonFiniteSample(int(np.argmin(np.isfinite(features).all(axis=1))), "fused matrix")
    trace_ref = series_by_desc[descs[0]].trace_ref
    return FusedFeatureMatrix(
        features=features,
        labels=[label] * rows,
        columns=cfg.column_names(),
        trace_ids=[trace_ref] * rows,
        window_indices=np.arange(max_lag + 1, count + 1),
    )


def concat_matrices(matrices):
    if not matrices:
        raise InsufficientData("no matrices to concatenate")
    cols = matrices[0].columns
    for m in matrices[1:]:
        if m.columns != cols:
            raise PlanMismatch("matrices disagree on columns")
    return FusedFeatureMatrix(
        features=np.vstack([m.features for m in matrices]),
        labels=[l for m in matrices for l in m.labels],
        columns=cols,
        trace_ids=[t for m in matrices for t in m.trace_ids],
        window_indices=np.concatenate([m.window_indices for m in matrices]),
    )


def trace_series(trace, window_len, overlap=DEFAULT_OVERLAP, descriptors=None, params=None):
    """Extract the raw per-window series of several descriptors for one trace."""
    plan = plan_windows(len(trace), window_len, overlap)
    params = params or DescriptorParams()
    return {d: extract_series(trace, plan, d, params) for d in (descriptors or DESCRIPTOR_IDS)}


def build_dataset(
    traces,
    window_len,
    cfg=None,
    params=None,
    test_fraction=0.25,
    seed=0,
    overlap=DEFAULT_OVERLAP,
):
    """Trace-level split, train-only normalization, per-trace fusion.

    Windows of one trace never straddle the train/test boundary; the
    normalizer is fit on training windows only. Returns (train, test, norm).
    """
    cfg = (cfg or FusionConfig()).validate()
    labels = [t.label for t in traces]
    counts = {}
    for lb in labels:
        counts[lb] = counts.get(lb, 0) + 1
    small = sorted(lb for lb, c in counts.items() if c < 2)
    if small:
        raise ClassTooSmall(f"classes need >= 2 traces, offenders: {small}")
    train_idx, test_idx = stratified_split(labels, test_fraction, seed)

    descs = cfg.descriptors()
    series = [trace_series(t, window_len, overlap, descs, params) for t in traces]
    train_values = {
        d: np.concatenate([series[i][d].values for i in train_idx]) for d in descs
    }
    norm = fit_normalizer(train_values)
    train = concat_matrices([ftdf(series[i], cfg, norm, traces[i].label) for i in train_idx])
    test = concat_matrices([ftdf(series[i], cfg, norm, traces[i].label) for i in test_idx])
    return train, test, norm


def write_matrix(matrix, path, delimiter=","):
    """Delimited export with a header row; the final column is the label."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(delimiter.join(list(matrix.columns) + ["label"]) + "\n")
        for row, label in zip(matrix.features, matrix.labels):
            fh.write(delimiter.join(repr(float(v)) for v in row) + delimiter + str(label) + "\n")


def read_matrix(path, delimiter=","):
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.rstrip("\n") for ln in fh if ln.strip()]
    if not lines:
        raise InsufficientData(f"empty matrix file {path}")
    header = lines[0].split(delimiter)
    columns, labels, rows = header[:-1], [], []
    for ln in lines[1:]:
        fields = ln.split(delimiter)
        rows.append([float(v) for v in fields[:-1]])
        labels.append(fields[-1])
    return FusedFeatureMatrix(
        features=np.asarray(rows, dtype=np.float64),
        labels=labels,
        columns=columns,
        trace_ids=[""] * len(labels),
        window_indices=np.arange(1, len(labels) + 1),
    )
