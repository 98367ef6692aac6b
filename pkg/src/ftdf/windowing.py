"""Deterministic overlapped segmentation of traces into fixed-length windows.

The default hop keeps an overlap of one quarter of the window length between
consecutive windows (hop = N - floor(N/4)); trailing samples that cannot fill
a whole window are discarded. Window indices are 1-based.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import IndexOutOfRange, InvalidOverlap, InvalidWindowLength, TraceTooShort

DEFAULT_OVERLAP = 0.25


@dataclass(frozen=True)
class WindowPlan:
    window_len: int
    hop: int
    count: int

    def starts(self):
        """0-based start offset of every window, step = hop."""
        return np.arange(self.count) * self.hop


@dataclass
class Segment:
    values: np.ndarray
    index: int  # 1-based window index
    trace_ref: str = ""


def plan_windows(n_samples, window_len, overlap_fraction=DEFAULT_OVERLAP):
    n_samples = int(n_samples)
    window_len = int(window_len)
    if window_len < 2:
        raise InvalidWindowLength(f"window_len must be >= 2, got {window_len}")
    if not (0.0 <= overlap_fraction < 1.0):
        raise InvalidOverlap(f"overlap_fraction must be in [0, 1), got {overlap_fraction}")
    if n_samples < window_len:
        raise TraceTooShort(f"trace has {n_samples} samples, window needs {window_len}")
    hop = window_len - int(np.floor(overlap_fraction * window_len))
    count = (n_samples - window_len) // hop + 1
    return WindowPlan(window_len=window_len, hop=hop, count=count)


def extract_segment(trace, plan, k):
    """Window k (1-based) of a trace under a plan."""
    if not (1 <= k <= plan.count):
        raise IndexOutOfRange(f"window index {k} not in 1..{plan.count}")
    start = (k - 1) * plan.hop
    values = trace.samples[start : start + plan.window_len]
    return Segment(values=values, index=k, trace_ref=trace.source_id)


def window_matrix(samples, plan):
    """All windows stacked as a (count, window_len) view; row k-1 equals
    extract_segment(..., k).values."""
    view = np.lib.stride_tricks.sliding_window_view(samples, plan.window_len)
    return view[:: plan.hop][: plan.count]
