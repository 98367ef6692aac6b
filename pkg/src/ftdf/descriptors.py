"""Per-window time-domain descriptors.

Seven scalar descriptors are computed over one window each: root mean square
(rmsf), mean absolute deviation (madf), integrated absolute magnitude (iamf),
zero crossings (zcf), log waveform length (wlf), slope sign changes (sscf),
and an autoregressive prediction sum (arf) with coefficients fitted by
Levinson-Durbin on the biased sample autocorrelation of the mean-removed
window. Conventions: sgn(0) = 0; the central tendency is the arithmetic mean.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateSignal, InvalidSpec, NonFiniteSample
from .windowing import Segment, extract_segment, window_matrix

DESCRIPTOR_IDS = ("rmsf", "madf", "iamf", "zcf", "wlf", "sscf", "arf")

WLF_FLOOR = 1e-12
SSCF_DEFAULT_THRESHOLD = 1e-10
AR_DEFAULT_ORDER = 15
_AR_DEGENERATE_TOL = 1e-15


@dataclass
class ArConfig:
    """AR model order; estimation is autocorrelation + Levinson-Durbin."""

    order: int = AR_DEFAULT_ORDER

    def validate(self, window_len):
        if self.order < 1:
            raise InvalidSpec(f"AR order must be >= 1, got {self.order}")
        if self.order >= window_len:
            raise InvalidSpec(f"AR order {self.order} must be < window length {window_len}")
        return self


@dataclass
class DescriptorParams:
    sscf_threshold: float = SSCF_DEFAULT_THRESHOLD
    ar: ArConfig = field(default_factory=ArConfig)
    rms_literal: bool = False


@dataclass
class FeatureSeries:
    """One descriptor evaluated on every window of a trace, in window order."""

    descriptor: str
    values: np.ndarray
    trace_ref: str
    plan: object


def _values(seg):
    if isinstance(seg, Segment):
        return seg.values
    return np.asarray(seg, dtype=np.float64)


def rmsf(seg, literal=False):
    """Root mean square of the window.

    With literal=True, returns the per-sample accumulation of
    sqrt(s_i^2 / N) instead, which works out to sum(|s_i|)/sqrt(N).
    """
    s = _values(seg)
    if literal:
        return float(np.sum(np.abs(s)) / math.sqrt(s.size))
    return float(math.sqrt(np.mean(np.square(s))))


def madf(seg):
    """Mean absolute deviation around the window mean."""
    s = _values(seg)
    return float(np.mean(np.abs(s - np.mean(s))))


def iamf(seg):
    """Mean signed half-square magnitude plus the window mean:
    (1/N) sum(s_i^2/2 * sgn(s_i)) + mean(s)."""
    s = _values(seg)
    return float(np.mean(0.5 * np.square(s) * np.sign(s)) + np.mean(s))


def zcf(seg):
    """Sum of |sgn(s_i) - sgn(s_{i-1})| over consecutive samples; each strict
    sign flip contributes 2, a touch of zero contributes 1 per side."""
    s = _values(seg)
    sg = np.sign(s)
    return float(np.sum(np.abs(sg[1:] - sg[:-1])))


def wlf(seg):
    """Natural log of the waveform length sum(|s_{i+1} - s_i|), floored at
    1e-12 so constant windows stay finite."""
    s = _values(seg)
    total = np.sum(np.abs(np.diff(s)))
    return float(np.log(max(total, WLF_FLOOR)))


def sscf(seg, threshold=SSCF_DEFAULT_THRESHOLD):
    """Count of interior samples whose neighbor slope product
    (s_i - s_{i-1})(s_i - s_{i+1}) reaches the threshold."""
    s = _values(seg)
    prod = (s[1:-1] - s[:-2]) * (s[1:-1] - s[2:])
    return float(np.count_nonzero(prod >= threshold))


def autocorrelation(x, max_lag):
    """Biased sample autocorrelation r[0..max_lag] (normalization 1/N)."""
    x = np.asarray(x, dtype=np.float64)
    n = x.size
    return np.array([np.dot(x[: n - lag], x[lag:]) / n for lag in range(max_lag + 1)])


def levinson_durbin(r, order):
    """Solve the Yule-Walker system Toeplitz(r[:order]) a = r[1:order+1] by
    the Levinson-Durbin recursion; a gives one-step predictions
    s_i ~ sum_p a_p s_{i-p}."""
    a = np.zeros(order)
    e = r[0]
    for m in range(1, order + 1):
        if e <= _AR_DEGENERATE_TOL * max(r[0], 1.0):
            break  # prediction error exhausted; higher orders stay zero
        k = (r[m] - np.dot(a[: m - 1], r[m - 1 : 0 : -1])) / e
        a_prev = a[: m - 1].copy()
        a[m - 1] = k
        a[: m - 1] = a_prev - k * a_prev[::-1]
        e *= 1.0 - k * k
    return a


def estimate_ar(seg, cfg=None):
    """AR coefficients a_1..a_P of the mean-removed window.

    Raises DegenerateSignal when the window is (numerically) constant; callers
    substitute all-zero coefficients.
    """
    s = _values(seg)
    cfg = (cfg or ArConfig()).validate(s.size)
    x = s - np.mean(s)
    r = autocorrelation(x, cfg.order)
    if r[0] < _AR_DEGENERATE_TOL:
        raise DegenerateSignal("zero-lag autocorrelation below 1e-15")
    return levinson_durbin(r, cfg.order)


def arf(seg, cfg=None):
    """Sum of one-step AR predictions over the window.

    Predictions run on the mean-removed window for i = P+1..N, and the mean
    contribution N*mu is restored additively. Degenerate (constant) windows
    fall back to zero coefficients, i.e. the value N*mu.
    """
    s = _values(seg)
    cfg = cfg or ArConfig()
    n = s.size
    mu = float(np.mean(s))
    try:
        a = estimate_ar(s, cfg)
    except DegenerateSignal:
        return n * mu
    x = s - mu
    p = cfg.order
    # sum_{i=P+1..N} sum_p a_p x_{i-p} = sum_p a_p * sum(x[P-p : N-p])  (0-based)
    csum = np.concatenate(([0.0], np.cumsum(x)))
    pred_sum = sum(a[p_ - 1] * (csum[n - p_] - csum[p - p_]) for p_ in range(1, p + 1))
    return float(pred_sum + n * mu)


_SIMPLE = {
    "madf": madf,
    "iamf": iamf,
    "zcf": zcf,
    "wlf": wlf,
}


def compute_descriptor(seg, descriptor, params=None):
    """Dispatch one descriptor on one window."""
    params = params or DescriptorParams()
    if descriptor == "rmsf":
        return rmsf(seg, literal=params.rms_literal)
    if descriptor == "sscf":
        return sscf(seg, threshold=params.sscf_threshold)
    if descriptor == "arf":
        return arf(seg, params.ar)
    if descriptor in _SIMPLE:
        return _SIMPLE[descriptor](seg)
    raise InvalidSpec(f"unknown descriptor {descriptor!r}; have {DESCRIPTOR_IDS}")


def extract_series(trace, plan, descriptor, params=None):
    """Apply one descriptor to every window of a trace (window order k=1..K)."""
    params = params or DescriptorParams()
    if descriptor == "arf":
        params.ar.validate(plan.window_len)
    windows = window_matrix(trace.samples, plan)
    values = np.empty(plan.count, dtype=np.float64)
    for i in range(plan.count):
        values[i] = compute_descriptor(windows[i], descriptor, params)
    if not np.isfinite(values).all():
        bad = int(np.argmin(np.isfinite(values)))
        raise NonFiniteSample(bad, f"{descriptor} on window {bad + 1} of {trace.source_id}")
    return FeatureSeries(descriptor=descriptor, values=values, trace_ref=trace.source_id, plan=plan)


def write_feature_series(series, path, delimiter=","):
    """Delimited export: one row per window as trace_id, k, descriptor, value."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for k, v in enumerate(series.values, start=1):
            fh.write(f"{series.trace_ref}{delimiter}{k}{delimiter}{series.descriptor}{delimiter}{float(v)!r}\n")
