"""Scoring and data splitting.

Accuracy, per-class precision/recall/F1 and the macro F-score come from one
pooled confusion matrix. Splits are stratified and deterministic per seed;
when driven through the dataset builders they operate at trace granularity so
overlapped windows of one recording never leak across the boundary.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ClassTooSmall, InvalidSpec, LengthMismatch, TooFewPerClass
from .rng import rng_for


@dataclass
class ConfusionMatrix:
    counts: np.ndarray  # (C, C); row = true class, column = predicted
    labels: list

    @property
    def total(self):
        return int(self.counts.sum())


@dataclass
class EvalReport:
    accuracy: float
    macro_f: float
    per_class: dict  # label -> {precision, recall, f1, support}
    confusion: ConfusionMatrix
    config: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "accuracy": self.accuracy,
            "macro_f": self.macro_f,
            "per_class": self.per_class,
            "labels": list(self.confusion.labels),
            "confusion": self.confusion.counts.tolist(),
            "config": self.config,
        }

    def to_text(self):
        lines = [
            f"accuracy       {self.accuracy:.6f}",
            f"macro F-score  {self.macro_f:.6f}",
            "",
            f"{'class':<16} {'precision':>9} {'recall':>9} {'f1':>9} {'support':>8}",
        ]
        for lb in self.confusion.labels:
            m = self.per_class[lb]
            lines.append(
                f"{lb:<16} {m['precision']:>9.4f} {m['recall']:>9.4f} "
                f"{m['f1']:>9.4f} {m['support']:>8d}"
            )
        lines.append("")
        lines.append("confusion (rows = true, cols = predicted):")
        head = " ".join(f"{lb[:10]:>10}" for lb in self.confusion.labels)
        lines.append(f"{'':<16}{head}")
        for lb, row in zip(self.confusion.labels, self.confusion.counts):
            lines.append(f"{lb:<16}" + " ".join(f"{int(c):>10d}" for c in row))
        if self.config:
            lines.append("")
            lines.append("configuration:")
            for key in sorted(self.config):
                lines.append(f"  {key} = {self.config[key]}")
        return "\n".join(lines) + "\n"

    def to_rows(self):
        """Delimited machine-readable form: (scope, metric, value) triples."""
        rows = [("overall", "accuracy", self.accuracy), ("overall", "macro_f", self.macro_f)]
        for lb in self.confusion.labels:
            m = self.per_class[lb]
            for metric in ("precision", "recall", "f1", "support"):
                rows.append((lb, metric, m[metric]))
        return rows


def confusion_matrix(y_true, y_pred, labels):
    index = {lb: i for i, lb in enumerate(labels)}
    counts = np.zeros((len(labels), len(labels)), dtype=np.int64)
    for t, p in zip(y_true, y_pred):
        counts[index[t], index[p]] += 1
    return ConfusionMatrix(counts=counts, labels=list(labels))


def score(y_true, y_pred, labels=None, config=None):
    """EvalReport from parallel label sequences.

    Per-class F1 uses the 2PR/(P+R) form with zero-division resolved to 0;
    the macro F-score is the unweighted mean over the label dictionary.
    """
    y_true, y_pred = list(y_true), list(y_pred)
    if len(y_true) != len(y_pred):
        raise LengthMismatch(f"{len(y_true)} true vs {len(y_pred)} predicted")
    if not y_true:
        raise LengthMismatch("nothing to score")
    if labels is None:
        labels = sorted(set(y_true) | set(y_pred))
    cm = confusion_matrix(y_true, y_pred, labels)
    c = cm.counts
    per_class = {}
    f1s = []
    for i, lb in enumerate(labels):
        tp = float(c[i, i])
        predicted = float(c[:, i].sum())
        actual = float(c[i, :].sum())
        precision = tp / predicted if predicted > 0 else 0.0
        recall = tp / actual if actual > 0 else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
        per_class[lb] = {
            "precision": precision,
            "recall": recall,
            "f1": f1,
            "support": int(actual),
        }
        f1s.append(f1)
    accuracy = float(np.trace(c)) / float(c.sum())
    return EvalReport(
        accuracy=accuracy,
        macro_f=float(np.mean(f1s)),
        per_class=per_class,
        confusion=cm,
        config=dict(config or {}),
    )


def _class_indices(labels):
    by_class = {}
    for i, lb in enumerate(labels):
        by_class.setdefault(lb, []).append(i)
    return {lb: np.asarray(idx) for lb, idx in sorted(by_class.items())}


def stratified_split(labels, test_fraction, seed=0):
    """Per-class split preserving proportions within one member.

    Test size per class is floor(test_fraction * count), clamped so both
    sides stay non-empty. Returns sorted (train_indices, test_indices).
    """
    if not (0.0 < test_fraction < 1.0):
        raise InvalidSpec(f"test_fraction must be in (0, 1), got {test_fraction}")
    by_class = _class_indices(labels)
    small = sorted(lb for lb, idx in by_class.items() if idx.size < 2)
    if small:
        raise ClassTooSmall(f"classes need >= 2 members, offenders: {small}")
    rng = rng_for(seed, "split")
    train, test = [], []
    for lb, idx in by_class.items():
        perm = idx[rng.permutation(idx.size)]
        n_test = min(max(int(np.floor(test_fraction * idx.size)), 1), idx.size - 1)
        test.append(perm[:n_test])
        train.append(perm[n_test:])
    return np.sort(np.concatenate(train)), np.sort(np.concatenate(test))


def stratified_folds(labels, folds, seed=0):
    """Disjoint covering stratified folds; returns a list of sorted test-index
    arrays, one per fold. Every class must have at least `folds` members."""
    folds = int(folds)
    if folds < 2:
        raise InvalidSpec(f"folds must be >= 2, got {folds}")
    by_class = _class_indices(labels)
    small = sorted(lb for lb, idx in by_class.items() if idx.size < folds)
    if small:
        raise TooFewPerClass(f"classes need >= {folds} members, offenders: {small}")
    rng = rng_for(seed, "folds")
    buckets = [[] for _ in range(folds)]
    for lb, idx in by_class.items():
        perm = idx[rng.permutation(idx.size)]
        for j, i in enumerate(perm):
            buckets[j % folds].append(i)
    return [np.sort(np.asarray(b)) for b in buckets]
