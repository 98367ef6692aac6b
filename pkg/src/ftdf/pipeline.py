"""End-to-end orchestration.

Everything between the core modules and the HTTP layer lives here: feature
assembly for each scheme (one of the seven descriptors, or the fused "ftdf"
scheme), classifier training/prediction, trace-level cross-validation, the
window-length sweep, self-contained model inference, and the file-based
commands behind the service endpoints and CLI subcommands.
"""

from __future__ import annotations

import os
import re
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import classify, fusion
from .config import SCHEMES, RunConfig
from .descriptors import ArConfig, DescriptorParams, extract_series, write_feature_series
from .errors import InvalidSpec, ShapeMismatch, TraceTooShort
from .evaluate import score, stratified_folds, stratified_split
from .ingest import (
    DatasetManifest,
    ManifestEntry,
    TraceSchema,
    generate_dataset,
    load_manifest,
    load_trace,
    load_traces,
    write_manifest,
    write_trace,
)
from .rng import derive_seed
from .windowing import plan_windows


def scheme_descriptors(scheme, fusion_cfg):
    return fusion_cfg.descriptors() if scheme == "ftdf" else (scheme,)


def _plan_for(trace, window_len, overlap):
    try:
        return plan_windows(len(trace), window_len, overlap)
    except TraceTooShort as exc:
        raise TraceTooShort(f"{trace.source_id}: {exc}")


def extract_series_set(traces, window_len, overlap, descriptors, params):
    """Raw descriptor series per trace, window order preserved."""
    out = []
    for t in traces:
        plan = _plan_for(t, window_len, overlap)
        out.append({d: extract_series(t, plan, d, params) for d in descriptors})
    return out


def _single_matrix(series_set, indices, desc, norm, traces):
    blocks, labels, trace_ids, window_idx = [], [], [], []
    for i in indices:
        values = norm.transform(desc, series_set[i][desc].values)
        blocks.append(values[:, None])
        labels.extend([traces[i].label] * values.size)
        trace_ids.extend([traces[i].source_id] * values.size)
        window_idx.append(np.arange(1, values.size + 1))
    return fusion.FusedFeatureMatrix(
        features=np.vstack(blocks),
        labels=labels,
        columns=[desc],
        trace_ids=trace_ids,
        window_indices=np.concatenate(window_idx),
    )


def matrices_for_split(traces, series_set, scheme, fusion_cfg, train_idx, test_idx):
    """(train, test, normalizer) for one scheme and one trace-level split.

    The normalizer is always fit on training windows only.
    """
    descs = scheme_descriptors(scheme, fusion_cfg)
    train_values = {
        d: np.concatenate([series_set[i][d].values for i in train_idx]) for d in descs
    }
    norm = fusion.fit_normalizer(train_values)
    if scheme == "ftdf":
        train = fusion.concat_matrices(
            [fusion.ftdf(series_set[i], fusion_cfg, norm, traces[i].label) for i in train_idx]
        )
        test = fusion.concat_matrices(
            [fusion.ftdf(series_set[i], fusion_cfg, norm, traces[i].label) for i in test_idx]
        )
    else:
        train = _single_matrix(series_set, train_idx, scheme, norm, traces)
        test = _single_matrix(series_set, test_idx, scheme, norm, traces)
    return train, test, norm


@dataclass
class ClassifierSpec:
    kind: str = "ebt"
    n_trees: int = classify.DEFAULT_N_TREES
    tree_params: classify.TreeParams = None
    knn_k: int = 1
    knn_metric: str = "euclidean"
    knn_weighting: str = "uniform"

    @classmethod
    def from_config(cls, cfg):
        return cls(
            kind=cfg.classifier,
            n_trees=cfg.n_trees,
            tree_params=cfg.tree_params(),
            knn_k=cfg.knn_k,
            knn_metric=cfg.knn_metric,
            knn_weighting=cfg.knn_weighting,
        )


def train_classifier(spec, X, labels, seed=0, threads=1):
    params = spec.tree_params or classify.TreeParams()
    if spec.kind == "ebt":
        return classify.train_ebt(X, labels, spec.n_trees, params, seed=seed, threads=threads)
    if spec.kind == "tree":
        return classify.train_ebt(X, labels, 1, params, seed=seed, bootstrap=False)
    if spec.kind == "knn":
        return classify.train_knn(X, labels, spec.knn_k, spec.knn_metric, spec.knn_weighting)
    raise InvalidSpec(f"unknown classifier kind {spec.kind!r}")


def predict_rows(model, X):
    if isinstance(model, classify.KnnModel):
        return [classify.predict_knn(model, x) for x in np.asarray(X, dtype=np.float64)]
    return classify.predict_matrix(model, X)


def cross_validate(traces, cfg):
    """Stratified trace-level cross-validation, pooled confusion across folds."""
    cfg.validate()
    labels = [t.label for t in traces]
    fusion_cfg = cfg.fusion_config()
    params = cfg.descriptor_params()
    clf = ClassifierSpec.from_config(cfg)
    folds = stratified_folds(labels, cfg.folds, cfg.seed)
    series_set = extract_series_set(
        traces, cfg.window_len, cfg.overlap, scheme_descriptors(cfg.scheme, fusion_cfg), params
    )
    all_idx = np.arange(len(traces))
    y_true, y_pred = [], []
    for f, test_idx in enumerate(folds):
        train_idx = np.setdiff1d(all_idx, test_idx)
        train, test, _ = matrices_for_split(
            traces, series_set, cfg.scheme, fusion_cfg, train_idx, test_idx
        )
        model = train_classifier(
            clf, train.features, train.labels, seed=derive_seed(cfg.seed, "fold", f), threads=cfg.threads
        )
        y_true.extend(test.labels)
        y_pred.extend(predict_rows(model, test.features))
    dictionary = sorted(set(labels))
    echo = cfg.echo()
    echo["n_traces"] = len(traces)
    return score(y_true, y_pred, labels=dictionary, config=echo)


def holdout_evaluate(traces, cfg):
    """Single stratified trace-level hold-out; returns (report, model, norm, columns)."""
    cfg.validate()
    labels = [t.label for t in traces]
    fusion_cfg = cfg.fusion_config()
    params = cfg.descriptor_params()
    series_set = extract_series_set(
        traces, cfg.window_len, cfg.overlap, scheme_descriptors(cfg.scheme, fusion_cfg), params
    )
    train_idx, test_idx = stratified_split(labels, cfg.test_fraction, cfg.seed)
    train, test, norm = matrices_for_split(
        traces, series_set, cfg.scheme, fusion_cfg, train_idx, test_idx
    )
    model = train_classifier(
        ClassifierSpec.from_config(cfg), train.features, train.labels,
        seed=derive_seed(cfg.seed, "train"), threads=cfg.threads,
    )
    report = score(
        test.labels, predict_rows(model, test.features),
        labels=sorted(set(labels)), config=cfg.echo(),
    )
    return report, model, norm, train.columns


def sweep_window_length(traces, cfg, schemes=None):
    """One train/evaluate cycle per (scheme, window length) cell.

    Schemes default to the seven descriptors plus "ftdf"; output rows are
    ordered scheme-major, lengths ascending. Descriptor series are computed
    once per (trace, length) and shared across schemes.
    """
    cfg.validate()
    lengths = sorted(cfg.lengths)
    schemes = tuple(schemes or SCHEMES)
    short = [t.source_id for t in traces if len(t) < max(lengths)]
    if short:
        raise TraceTooShort(f"traces shorter than {max(lengths)}: {short}")
    labels = [t.label for t in traces]
    fusion_cfg = cfg.fusion_config()
    params = cfg.descriptor_params()
    clf = ClassifierSpec.from_config(cfg)
    needed = sorted({d for s in schemes for d in scheme_descriptors(s, fusion_cfg)})
    cache = {
        n: extract_series_set(traces, n, cfg.overlap, needed, params) for n in lengths
    }
    train_idx, test_idx = stratified_split(labels, cfg.test_fraction, cfg.seed)
    dictionary = sorted(set(labels))
    cells = [(s, n) for s in schemes for n in lengths]

    def run_cell(cell):
        scheme, n = cell
        t0 = time.perf_counter()
        train, test, _ = matrices_for_split(traces, cache[n], scheme, fusion_cfg, train_idx, test_idx)
        model = train_classifier(
            clf, train.features, train.labels, seed=derive_seed(cfg.seed, "sweep", scheme, n)
        )
        report = score(test.labels, predict_rows(model, test.features), labels=dictionary)
        elapsed_ms = int(round((time.perf_counter() - t0) * 1000))
        return {
            "scheme": scheme,
            "window_len": n,
            "accuracy": report.accuracy,
            "macro_f": report.macro_f,
            "runtime_ms": elapsed_ms,
        }

    if cfg.threads > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            return list(pool.map(run_cell, cells))
    return [run_cell(c) for c in cells]


# --- self-contained model inference -------------------------------------------


def classify_trace(model, trace):
    """Per-window predictions of a saved model applied end-to-end to a trace.

    The model file carries the windowing geometry, descriptor parameters,
    fusion config and normalizer it was trained with.
    """
    meta = model.meta
    for key in ("scheme", "window_len", "overlap"):
        if key not in meta:
            raise ShapeMismatch(f"model lacks inference metadata {key!r}")
    if model.normalizer is None:
        raise ShapeMismatch("model lacks a normalizer")
    scheme = meta["scheme"]
    window_len = int(meta["window_len"])
    overlap = float(meta["overlap"])
    params = DescriptorParams(
        sscf_threshold=float(meta.get("sscf_threshold", 1e-10)),
        ar=ArConfig(order=int(meta.get("ar_order", 15))),
        rms_literal=meta.get("rms_literal", "0") == "1",
    )
    plan = _plan_for(trace, window_len, overlap)
    if scheme == "ftdf":
        if model.fusion is None:
            raise ShapeMismatch("ftdf model lacks its fusion config")
        series = {
            d: extract_series(trace, plan, d, params) for d in model.fusion.descriptors()
        }
        matrix = fusion.ftdf(series, model.fusion, model.normalizer, label="")
        features = matrix.features
        window_indices = matrix.window_indices
    else:
        series = extract_series(trace, plan, scheme, params)
        features = model.normalizer.transform(scheme, series.values)[:, None]
        window_indices = np.arange(1, plan.count + 1)
    predictions = classify.predict_matrix(model, features)
    tally = {}
    for p in predictions:
        tally[p] = tally.get(p, 0) + 1
    majority = max(model.class_labels, key=lambda lb: (tally.get(lb, 0), -model.class_labels.index(lb)))
    return {
        "windows": [int(k) for k in window_indices],
        "predictions": predictions,
        "majority": majority,
    }


# --- file-based commands --------------------------------------------------------


def _safe_name(name):
    return re.sub(r"[^A-Za-z0-9_.-]", "_", name)


def run_synth(cfg):
    """Generate a synthetic labeled dataset: one trace file each plus a manifest."""
    spec = cfg.synth_spec()
    out = cfg.out
    traces_dir = os.path.join(out, "traces")
    os.makedirs(traces_dir, exist_ok=True)
    traces = generate_dataset(spec)
    entries = []
    for t in traces:
        rel = os.path.join("traces", f"{_safe_name(t.source_id)}.csv")
        write_trace(t, os.path.join(out, rel))
        entries.append(ManifestEntry(rel, t.label, t.fs, TraceSchema()))
    manifest_path = os.path.join(out, "manifest.tsv")
    write_manifest(DatasetManifest(entries), manifest_path)
    return {
        "manifest": manifest_path,
        "n_traces": len(traces),
        "labels": sorted({t.label for t in traces}),
    }


def _load_dataset(cfg):
    manifest = load_manifest(cfg.manifest)
    return load_traces(manifest, os.path.dirname(os.path.abspath(cfg.manifest)))


def run_extract(cfg):
    """Write one feature-series file per (trace, descriptor); existing outputs
    are skipped unless force is set."""
    cfg.validate()
    traces = _load_dataset(cfg)
    params = cfg.descriptor_params()
    features_dir = os.path.join(cfg.out, "features")
    os.makedirs(features_dir, exist_ok=True)
    written, skipped, files = 0, 0, []
    for t in traces:
        plan = _plan_for(t, cfg.window_len, cfg.overlap)
        for d in cfg.descriptors:
            path = os.path.join(features_dir, f"{_safe_name(t.source_id)}__{d}.csv")
            files.append(path)
            if os.path.exists(path) and not cfg.force:
                skipped += 1
                continue
            write_feature_series(extract_series(t, plan, d, params), path)
            written += 1
    return {"written": written, "skipped": skipped, "files": files}


def run_fuse(cfg):
    """Build and export the fused train/test matrices for the manifest."""
    cfg.validate()
    traces = _load_dataset(cfg)
    train, test, _ = fusion.build_dataset(
        traces,
        cfg.window_len,
        cfg.fusion_config(),
        cfg.descriptor_params(),
        test_fraction=cfg.test_fraction,
        seed=cfg.seed,
        overlap=cfg.overlap,
    )
    os.makedirs(cfg.out, exist_ok=True)
    train_path = os.path.join(cfg.out, "train_matrix.csv")
    test_path = os.path.join(cfg.out, "test_matrix.csv")
    fusion.write_matrix(train, train_path)
    fusion.write_matrix(test, test_path)
    return {
        "train_matrix": train_path,
        "test_matrix": test_path,
        "train_rows": train.n_rows,
        "test_rows": test.n_rows,
        "columns": list(train.columns),
    }


def _write_report(report, out_dir, stem):
    os.makedirs(out_dir, exist_ok=True)
    text_path = os.path.join(out_dir, f"{stem}.txt")
    csv_path = os.path.join(out_dir, f"{stem}.csv")
    with open(text_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(report.to_text())
    with open(csv_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("scope,metric,value\n")
        for scope, metric, value in report.to_rows():
            fh.write(f"{scope},{metric},{value!r}\n")
    return [text_path, csv_path]


def run_train(cfg):
    """Train on a stratified trace-level split, save the model, report on the
    held-out traces."""
    cfg.validate()
    if cfg.classifier == "knn":
        raise InvalidSpec("knn is an in-memory baseline (use eval --cv or sweep); train persists ebt/tree models")
    traces = _load_dataset(cfg)
    report, model, norm, columns = holdout_evaluate(traces, cfg)
    model.normalizer = norm
    if cfg.scheme == "ftdf":
        model.fusion = cfg.fusion_config()
    model.meta = {
        "scheme": cfg.scheme,
        "window_len": str(cfg.window_len),
        "overlap": repr(float(cfg.overlap)),
        "sscf_threshold": repr(float(cfg.sscf_threshold)),
        "ar_order": str(cfg.ar_order),
        "rms_literal": "1" if cfg.rms_literal else "0",
        "columns": list(columns),
    }
    os.makedirs(cfg.out, exist_ok=True)
    model_path = os.path.join(cfg.out, "model.ftdf")
    classify.save_model(model, model_path)
    paths = _write_report(report, cfg.out, "train_report")
    return {
        "model": model_path,
        "report": report.to_dict(),
        "report_files": paths,
    }


def run_eval(cfg, model_path=None, matrix_path=None):
    """Evaluate a saved model on a manifest (or an exported matrix), or run
    the cross-validation protocol when no model is given."""
    cfg.validate()
    if matrix_path:
        if not model_path:
            raise InvalidSpec("evaluating a matrix file requires a model")
        model = classify.load_model(model_path)
        matrix = fusion.read_matrix(matrix_path)
        preds = classify.predict_matrix(model, matrix.features)
        report = score(matrix.labels, preds, labels=model.class_labels, config=cfg.echo())
    elif model_path:
        model = classify.load_model(model_path)
        traces = _load_dataset(cfg)
        y_true, y_pred = [], []
        for t in traces:
            result = classify_trace(model, t)
            y_true.extend([t.label] * len(result["predictions"]))
            y_pred.extend(result["predictions"])
        dictionary = sorted(set(y_true) | set(model.class_labels))
        report = score(y_true, y_pred, labels=dictionary, config=cfg.echo())
    else:
        if cfg.protocol != "cv":
            raise InvalidSpec("eval needs a model/matrix, or protocol = cv")
        traces = _load_dataset(cfg)
        report = cross_validate(traces, cfg)
    paths = _write_report(report, cfg.out, "eval_report")
    return {"report": report.to_dict(), "report_files": paths}


def run_sweep(cfg):
    """Window-length sweep table over every scheme; CSV columns
    scheme, window_len, accuracy, macro_f, runtime_ms."""
    cfg.validate()
    traces = _load_dataset(cfg)
    rows = sweep_window_length(traces, cfg)
    os.makedirs(cfg.out, exist_ok=True)
    table_path = os.path.join(cfg.out, "sweep.csv")
    with open(table_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("scheme,window_len,accuracy,macro_f,runtime_ms\n")
        for r in rows:
            fh.write(
                f"{r['scheme']},{r['window_len']},{r['accuracy']!r},"
                f"{r['macro_f']!r},{r['runtime_ms']}\n"
            )
    return {"table": table_path, "rows": rows}


def run_predict(model_path, trace_path=None, samples=None, fs=1.0):
    """Apply a saved model to one trace (file path or inline samples)."""
    model = classify.load_model(model_path)
    if trace_path:
        trace = load_trace(trace_path, TraceSchema(), fs=fs, source_id=trace_path)
    elif samples is not None:
        from .ingest import PowerTrace

        trace = PowerTrace(np.asarray(samples, dtype=np.float64), fs=fs, source_id="inline")
    else:
        raise InvalidSpec("predict needs a trace path or inline samples")
    return classify_trace(model, trace)
