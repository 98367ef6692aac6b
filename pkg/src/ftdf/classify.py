"""Classifiers: from-scratch CART trees, a bagged ensemble with plurality
voting, and a KNN baseline, plus the versioned "FTDF01" model file.

Tree induction is plain greedy CART on Gini impurity: candidate thresholds at
midpoints between consecutive distinct sorted feature values, deterministic
tie-breaks (lower feature index, then lower threshold), an optional per-tree
split budget, and no feature subsampling (bagging, not random forest).
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    BadMagic,
    CorruptModel,
    EmptyCounts,
    EmptyDataset,
    InvalidSpec,
    IoError,
    KTooLarge,
    ShapeMismatch,
    VersionUnsupported,
)
from .fusion import FusionConfig, Normalizer
from .rng import rng_for

MODEL_MAGIC = "FTDF01"

DEFAULT_N_TREES = 30
DEFAULT_MAX_SPLITS = 42000


def gini(counts):
    """Gini impurity 1 - sum((c_i / total)^2) of a class-count vector."""
    counts = np.asarray(counts, dtype=np.float64)
    total = counts.sum()
    if counts.size == 0 or total < 1:
        raise EmptyCounts("class counts must sum to >= 1")
    p = counts / total
    return float(1.0 - np.dot(p, p))


@dataclass
class TreeParams:
    max_splits: int = DEFAULT_MAX_SPLITS
    min_leaf_size: int = 1

    def validate(self):
        if self.max_splits < 1:
            raise InvalidSpec(f"max_splits must be >= 1, got {self.max_splits}")
        if self.min_leaf_size < 1:
            raise InvalidSpec(f"min_leaf_size must be >= 1, got {self.min_leaf_size}")
        return self


@dataclass
class TreeNode:
    feature: int = -1
    threshold: float = 0.0
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None
    counts: np.ndarray | None = None  # leaf class counts

    def is_leaf(self):
        return self.counts is not None


class _SplitBudget:
    def __init__(self, limit):
        self.limit = limit
        self.used = 0


def _best_split(X, y, n_classes, min_leaf, parent_gini):
    """Best (feature, threshold, gain) over midpoint candidates, or None.

    Candidates sit between consecutive distinct sorted values; splits leaving
    fewer than min_leaf rows on either side are skipped. Features are scanned
    in index order and only strictly larger gains replace the incumbent, so
    ties resolve to the lower feature index / lower threshold.
    """
    n = y.size
    best = None
    one_hot = np.zeros((n, n_classes))
    one_hot[np.arange(n), y] = 1.0
    for j in range(X.shape[1]):
        order = np.argsort(X[:, j], kind="stable")
        vals = X[order, j]
        boundaries = np.nonzero(vals[:-1] != vals[1:])[0]
        if boundaries.size == 0:
            continue
        n_left = boundaries + 1
        n_right = n - n_left
        keep = (n_left >= min_leaf) & (n_right >= min_leaf)
        if not keep.any():
            continue
        boundaries, n_left, n_right = boundaries[keep], n_left[keep], n_right[keep]
        cum = np.cumsum(one_hot[order], axis=0)
        left_counts = cum[boundaries]
        right_counts = cum[-1] - left_counts
        gini_left = 1.0 - np.sum((left_counts / n_left[:, None]) ** 2, axis=1)
        gini_right = 1.0 - np.sum((right_counts / n_right[:, None]) ** 2, axis=1)
        gains = parent_gini - (n_left * gini_left + n_right * gini_right) / n
        pos = int(np.argmax(gains))  # first max = lowest threshold
        gain = float(gains[pos])
        if gain <= 0.0:
            continue
        if best is None or gain > best[2]:
            b = boundaries[pos]
            threshold = float((vals[b] + vals[b + 1]) / 2.0)
            best = (j, threshold, gain)
    return best


def _grow(X, y, n_classes, params, budget):
    counts = np.bincount(y, minlength=n_classes)
    if (
        np.count_nonzero(counts) <= 1
        or y.size < 2 * params.min_leaf_size
        or budget.used >= budget.limit
    ):
        return TreeNode(counts=counts)
    parent_gini = gini(counts)
    best = _best_split(X, y, n_classes, params.min_leaf_size, parent_gini)
    if best is None:
        return TreeNode(counts=counts)
    feature, threshold, _ = best
    budget.used += 1
    mask = X[:, feature] <= threshold
    node = TreeNode(feature=feature, threshold=threshold)
    node.left = _grow(X[mask], y[mask], n_classes, params, budget)
    node.right = _grow(X[~mask], y[~mask], n_classes, params, budget)
    return node


def _check_xy(X, y):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ShapeMismatch(f"feature matrix must be 2-D, got shape {X.shape}")
    if X.shape[0] == 0:
        raise EmptyDataset("no training rows")
    if len(y) != X.shape[0]:
        raise ShapeMismatch(f"{X.shape[0]} rows vs {len(y)} labels")
    return X


def train_tree(X, y, params=None, n_classes=None):
    """Grow one CART tree on integer class codes y."""
    params = (params or TreeParams()).validate()
    X = _check_xy(X, y)
    y = np.asarray(y, dtype=np.int64)
    if n_classes is None:
        n_classes = int(y.max()) + 1
    return _grow(X, y, n_classes, params, _SplitBudget(params.max_splits))


def count_splits(node):
    if node.is_leaf():
        return 0
    return 1 + count_splits(node.left) + count_splits(node.right)


def predict_tree(node, x):
    """Leaf-majority class code for one row (ties -> lowest code)."""
    while not node.is_leaf():
        node = node.left if x[node.feature] <= node.threshold else node.right
    return int(np.argmax(node.counts))


def tree_apply(node, X):
    """Leaf-majority class codes for every row of X."""
    out = np.empty(X.shape[0], dtype=np.int64)
    stack = [(node, np.arange(X.shape[0]))]
    while stack:
        nd, idx = stack.pop()
        if idx.size == 0:
            continue
        if nd.is_leaf():
            out[idx] = int(np.argmax(nd.counts))
            continue
        mask = X[idx, nd.feature] <= nd.threshold
        stack.append((nd.left, idx[mask]))
        stack.append((nd.right, idx[~mask]))
    return out


@dataclass
class BaggedEnsemble:
    trees: list
    params: TreeParams
    master_seed: int
    class_labels: list
    n_features: int
    normalizer: Normalizer | None = None
    fusion: FusionConfig | None = None
    meta: dict = field(default_factory=dict)


def encode_labels(labels, class_labels=None):
    if class_labels is None:
        class_labels = sorted(set(labels))
    index = {lb: i for i, lb in enumerate(class_labels)}
    return np.asarray([index[lb] for lb in labels], dtype=np.int64), list(class_labels)


def bootstrap_indices(n_rows, rng):
    """One bootstrap sample: n_rows draws with replacement."""
    return rng.integers(0, n_rows, size=n_rows)


def train_ebt(X, y, n_trees=DEFAULT_N_TREES, params=None, seed=0, bootstrap=True, threads=1):
    """Bagged CART ensemble; tree t trains on its own bootstrap sample drawn
    from a per-tree stream derived from (seed, t), so parallel and sequential
    training build identical forests. `bootstrap=False` is a test hook that
    trains every tree on the full data."""
    params = (params or TreeParams()).validate()
    if n_trees < 1:
        raise InvalidSpec(f"n_trees must be >= 1, got {n_trees}")
    X = _check_xy(X, y)
    codes, class_labels = encode_labels(y)
    n_classes = len(class_labels)

    def build(t):
        if bootstrap:
            idx = bootstrap_indices(X.shape[0], rng_for(seed, "tree", t))
            return train_tree(X[idx], codes[idx], params, n_classes)
        return train_tree(X, codes, params, n_classes)

    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            trees = list(pool.map(build, range(n_trees)))
    else:
        trees = [build(t) for t in range(n_trees)]
    return BaggedEnsemble(
        trees=trees,
        params=params,
        master_seed=int(seed),
        class_labels=class_labels,
        n_features=X.shape[1],
    )


def _check_row(ensemble, x):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.size != ensemble.n_features:
        raise ShapeMismatch(f"expected {ensemble.n_features} features, got shape {x.shape}")
    return x


def predict(ensemble, x):
    """Plurality vote over tree leaf majorities; ties -> lowest dictionary index."""
    x = _check_row(ensemble, x)
    votes = np.zeros(len(ensemble.class_labels), dtype=np.int64)
    for tree in ensemble.trees:
        votes[predict_tree(tree, x)] += 1
    return ensemble.class_labels[int(np.argmax(votes))]


def predict_matrix(ensemble, X):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != ensemble.n_features:
        raise ShapeMismatch(f"expected (*, {ensemble.n_features}), got {X.shape}")
    votes = np.zeros((X.shape[0], len(ensemble.class_labels)), dtype=np.int64)
    for tree in ensemble.trees:
        codes = tree_apply(tree, X)
        votes[np.arange(X.shape[0]), codes] += 1
    return [ensemble.class_labels[i] for i in np.argmax(votes, axis=1)]


# --- KNN baseline -------------------------------------------------------------

KNN_METRICS = ("euclidean", "cosine")
KNN_WEIGHTINGS = ("uniform", "inverse")
_KNN_DIST_FLOOR = 1e-12


@dataclass
class KnnModel:
    X: np.ndarray
    codes: np.ndarray
    class_labels: list
    k: int
    metric: str = "euclidean"
    weighting: str = "uniform"


def train_knn(X, y, k, metric="euclidean", weighting="uniform"):
    X = _check_xy(X, y)
    if metric not in KNN_METRICS:
        raise InvalidSpec(f"metric must be one of {KNN_METRICS}, got {metric!r}")
    if weighting not in KNN_WEIGHTINGS:
        raise InvalidSpec(f"weighting must be one of {KNN_WEIGHTINGS}, got {weighting!r}")
    if not (1 <= k <= X.shape[0]):
        raise KTooLarge(f"k={k} with {X.shape[0]} training rows")
    codes, class_labels = encode_labels(y)
    return KnnModel(X=X, codes=codes, class_labels=class_labels, k=int(k), metric=metric, weighting=weighting)


def _distances(model, x):
    if model.metric == "euclidean":
        return np.sqrt(np.sum((model.X - x) ** 2, axis=1))
    norms = np.sqrt(np.sum(model.X**2, axis=1))
    xn = float(np.sqrt(np.dot(x, x)))
    sims = np.zeros(model.X.shape[0])
    ok = (norms > 0) & (xn > 0)
    if xn > 0:
        sims[ok] = (model.X[ok] @ x) / (norms[ok] * xn)
    return 1.0 - sims  # zero vectors keep similarity 0 -> distance 1


def predict_knn(model, x):
    """(Weighted) majority among the k nearest rows; distance ties break to
    the lower training-row index, vote ties to the lower class index."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (model.X.shape[1],):
        raise ShapeMismatch(f"expected {model.X.shape[1]} features, got shape {x.shape}")
    dist = _distances(model, x)
    nearest = np.argsort(dist, kind="stable")[: model.k]
    if model.weighting == "inverse":
        weights = 1.0 / np.maximum(dist[nearest], _KNN_DIST_FLOOR)
    else:
        weights = np.ones(nearest.size)
    tally = np.zeros(len(model.class_labels))
    for i, w in zip(nearest, weights):
        tally[model.codes[i]] += w
    return model.class_labels[int(np.argmax(tally))]


# --- model persistence ---------------------------------------------------------
#
# "FTDF01": line-oriented, tab-separated text. After the magic line come
# header records (labels/columns/features/seed/params/ntrees), optional meta,
# normalizer and fusion records, then each tree in pre-order ("n" internal,
# "l" leaf), and a final "end". Floats are written with repr() so a load/save
# round-trip is byte-identical.


def _write_node(fh, node):
    if node.is_leaf():
        fh.write("l\t" + "\t".join(str(int(c)) for c in node.counts) + "\n")
    else:
        fh.write(f"n\t{node.feature}\t{node.threshold!r}\n")
        _write_node(fh, node.left)
        _write_node(fh, node.right)


def save_model(ensemble, path):
    meta = dict(ensemble.meta)
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(MODEL_MAGIC + "\n")
            fh.write("labels\t" + "\t".join(ensemble.class_labels) + "\n")
            fh.write("features\t" + str(ensemble.n_features) + "\n")
            columns = meta.pop("columns", None)
            if columns:
                fh.write("columns\t" + "\t".join(columns) + "\n")
            fh.write("seed\t" + str(ensemble.master_seed) + "\n")
            fh.write(f"params\t{ensemble.params.max_splits}\t{ensemble.params.min_leaf_size}\n")
            fh.write("ntrees\t" + str(len(ensemble.trees)) + "\n")
            for key in sorted(meta):
                fh.write(f"meta\t{key}\t{meta[key]}\n")
            if ensemble.normalizer is not None:
                for desc in sorted(ensemble.normalizer.stats):
                    mean, std = ensemble.normalizer.stats[desc]
                    fh.write(f"norm\t{desc}\t{mean!r}\t{std!r}\n")
            if ensemble.fusion is not None:
                f = ensemble.fusion
                fh.write("fusion_pairs\t" + "\t".join(f.descriptors()) + "\n")
                fh.write("fusion_lags\t" + "\t".join(str(n) for n in f.lags) + "\n")
                fh.write("fusion_raw\t" + ("1" if f.include_raw else "0") + "\n")
            for t, tree in enumerate(ensemble.trees):
                fh.write(f"tree\t{t}\n")
                _write_node(fh, tree)
            fh.write("end\n")
    except OSError as exc:
        raise IoError(f"cannot write model to {path}: {exc}")


class _Cursor:
    def __init__(self, lines):
        self.lines = lines
        self.pos = 0

    def next(self):
        if self.pos >= len(self.lines):
            raise CorruptModel("unexpected end of model file")
        line = self.lines[self.pos]
        self.pos += 1
        return line

    def peek(self):
        return self.lines[self.pos] if self.pos < len(self.lines) else None


def _read_node(cur):
    fields = cur.next().split("\t")
    try:
        if fields[0] == "l":
            return TreeNode(counts=np.asarray([int(c) for c in fields[1:]], dtype=np.int64))
        if fields[0] == "n":
            node = TreeNode(feature=int(fields[1]), threshold=float(fields[2]))
            node.left = _read_node(cur)
            node.right = _read_node(cur)
            return node
    except (ValueError, IndexError) as exc:
        raise CorruptModel(f"bad tree record {fields!r}: {exc}")
    raise CorruptModel(f"expected tree node, got {fields[0]!r}")


def load_model(path):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise IoError(f"cannot read model from {path}: {exc}")
    if not lines or not lines[0].startswith("FTDF"):
        raise BadMagic(f"{path} is not a FTDF model file")
    if lines[0] != MODEL_MAGIC:
        raise VersionUnsupported(f"model version {lines[0]!r}, supported: {MODEL_MAGIC}")
    cur = _Cursor(lines)
    cur.next()
    header = {"meta": {}, "norm": {}, "fusion": {}}
    try:
        while cur.peek() is not None and not cur.peek().startswith("tree\t"):
            fields = cur.next().split("\t")
            key = fields[0]
            if key == "labels":
                header["labels"] = fields[1:]
            elif key == "features":
                header["features"] = int(fields[1])
            elif key == "columns":
                header["columns"] = fields[1:]
            elif key == "seed":
                header["seed"] = int(fields[1])
            elif key == "params":
                header["params"] = TreeParams(max_splits=int(fields[1]), min_leaf_size=int(fields[2]))
            elif key == "ntrees":
                header["ntrees"] = int(fields[1])
            elif key == "meta":
                header["meta"][fields[1]] = fields[2]
            elif key == "norm":
                header["norm"][fields[1]] = (float(fields[2]), float(fields[3]))
            elif key == "fusion_pairs":
                header["fusion"]["pairs"] = fields[1:]
            elif key == "fusion_lags":
                header["fusion"]["lags"] = tuple(int(n) for n in fields[1:])
            elif key == "fusion_raw":
                header["fusion"]["raw"] = fields[1] == "1"
            elif key == "end":
                raise CorruptModel("model file has no trees")
            else:
                raise CorruptModel(f"unknown record {key!r}")
        for required in ("labels", "features", "params", "ntrees"):
            if required not in header:
                raise CorruptModel(f"missing {required!r} record")
        trees = []
        for t in range(header["ntrees"]):
            tag = cur.next()
            if tag != f"tree\t{t}":
                raise CorruptModel(f"expected 'tree {t}', got {tag!r}")
            trees.append(_read_node(cur))
        if cur.next() != "end":
            raise CorruptModel("missing end marker")
    except (ValueError, IndexError) as exc:
        raise CorruptModel(f"malformed model file {path}: {exc}")
    fusion = None
    if header["fusion"]:
        f = header["fusion"]
        fusion = FusionConfig(
            pair_a=(f["pairs"][0], f["pairs"][1]),
            pair_b=(f["pairs"][2], f["pairs"][3]),
            lags=f.get("lags", (1, 2, 3)),
            include_raw=f.get("raw", True),
        )
    meta = header["meta"]
    if "columns" in header:
        meta["columns"] = header["columns"]
    return BaggedEnsemble(
        trees=trees,
        params=header["params"],
        master_seed=header.get("seed", 0),
        class_labels=header["labels"],
        n_features=header["features"],
        normalizer=Normalizer(header["norm"]) if header["norm"] else None,
        fusion=fusion,
        meta=meta,
    )
