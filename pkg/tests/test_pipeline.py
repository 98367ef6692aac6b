import numpy as np
import pytest

from ftdf import pipeline
from ftdf.config import RunConfig
from ftdf.errors import InvalidSpec, ShapeMismatch, TraceTooShort
from ftdf.ingest import SynthSpec, generate_dataset


def _traces(per_class=6, classes=("constant", "on_off_cycle", "noisy_idle"), duration=600, seed=0):
    return generate_dataset(
        SynthSpec(classes=classes, traces_per_class=per_class, duration_s=duration, seed=seed)
    )


def _cfg(**kw):
    base = dict(window_len=64, n_trees=5, folds=3, seed=1)
    base.update(kw)
    return RunConfig(**base)


class TestCrossValidate:
    def test_pooled_confusion_covers_every_row(self):
        traces = _traces()
        cfg = _cfg()
        report = pipeline.cross_validate(traces, cfg)
        from ftdf.windowing import plan_windows

        per_trace = plan_windows(600, 64).count - 3
        assert report.confusion.total == len(traces) * per_trace

    def test_deterministic(self):
        traces = _traces()
        a = pipeline.cross_validate(traces, _cfg())
        b = pipeline.cross_validate(traces, _cfg())
        assert a.accuracy == b.accuracy
        assert a.confusion.counts.tolist() == b.confusion.counts.tolist()

    def test_single_descriptor_scheme(self):
        traces = _traces(per_class=4)
        report = pipeline.cross_validate(traces, _cfg(scheme="rmsf", folds=2))
        assert 0.0 <= report.accuracy <= 1.0

    def test_knn_scheme(self):
        traces = _traces(per_class=4)
        report = pipeline.cross_validate(traces, _cfg(classifier="knn", knn_k=3, folds=2))
        assert 0.0 <= report.accuracy <= 1.0


class TestSweep:
    def test_row_count_and_order(self):
        traces = _traces(per_class=3, duration=900)
        cfg = _cfg(lengths=(64, 128), n_trees=3)
        rows = pipeline.sweep_window_length(traces, cfg)
        assert len(rows) == 8 * 2
        schemes = [r["scheme"] for r in rows]
        assert schemes == sorted(schemes, key=lambda s: pipeline.SCHEMES.index(s))
        for pair in zip(rows[::2], rows[1::2]):
            assert pair[0]["window_len"] == 64 and pair[1]["window_len"] == 128

    def test_degenerate_single_cell(self):
        traces = _traces(per_class=3, duration=900)
        cfg = _cfg(lengths=(64,), n_trees=3)
        rows = pipeline.sweep_window_length(traces, cfg, schemes=("rmsf",))
        assert len(rows) == 1
        assert rows[0]["scheme"] == "rmsf" and rows[0]["window_len"] == 64

    def test_deterministic_semantic_columns(self):
        traces = _traces(per_class=3, duration=900)
        cfg = _cfg(lengths=(64, 128), n_trees=3)
        a = pipeline.sweep_window_length(traces, cfg, schemes=("madf", "ftdf"))
        b = pipeline.sweep_window_length(traces, cfg, schemes=("madf", "ftdf"))
        strip = lambda rows: [(r["scheme"], r["window_len"], r["accuracy"], r["macro_f"]) for r in rows]
        assert strip(a) == strip(b)

    def test_short_traces_listed(self):
        traces = _traces(per_class=3, duration=100)
        with pytest.raises(TraceTooShort) as exc:
            pipeline.sweep_window_length(traces, _cfg(lengths=(64, 256)))
        assert "constant_000" in str(exc.value)


class TestRunCommands:
    def test_synth_writes_files_and_manifest(self, tmp_path):
        cfg = RunConfig(
            out=str(tmp_path), classes=("constant", "ramp"), traces_per_class=2,
            duration_s=50, seed=4,
        )
        result = pipeline.run_synth(cfg)
        assert result["n_traces"] == 4
        manifest = tmp_path / "manifest.tsv"
        assert manifest.exists()
        assert len(list((tmp_path / "traces").glob("*.csv"))) == 4

    def test_synth_deterministic_bytes(self, tmp_path):
        for sub in ("a", "b"):
            cfg = RunConfig(out=str(tmp_path / sub), classes=("constant",), traces_per_class=2, duration_s=30, seed=7)
            pipeline.run_synth(cfg)
        for name in ["manifest.tsv"] + [p.name for p in (tmp_path / "a" / "traces").iterdir()]:
            rel = name if name == "manifest.tsv" else f"traces/{name}"
            assert (tmp_path / "a" / rel).read_bytes() == (tmp_path / "b" / rel).read_bytes()

    def test_synth_rejects_empty_spec(self, tmp_path):
        cfg = RunConfig(out=str(tmp_path / "x"), traces_per_class=0)
        with pytest.raises(InvalidSpec):
            pipeline.run_synth(cfg)
        assert not (tmp_path / "x").exists()  # no partial outputs

    def _synth(self, tmp_path, **kw):
        cfg = RunConfig(
            out=str(tmp_path),
            classes=kw.pop("classes", ("constant", "on_off_cycle")),
            traces_per_class=kw.pop("traces_per_class", 3),
            duration_s=kw.pop("duration_s", 400),
            seed=kw.pop("seed", 2),
        )
        pipeline.run_synth(cfg)
        return str(tmp_path / "manifest.tsv")

    def test_extract_idempotent_without_force(self, tmp_path):
        manifest = self._synth(tmp_path)
        cfg = RunConfig(manifest=manifest, out=str(tmp_path), window_len=64, descriptors=("rmsf", "madf"))
        first = pipeline.run_extract(cfg)
        assert first["written"] == 12  # 6 traces x 2 descriptors
        second = pipeline.run_extract(cfg)
        assert second["written"] == 0 and second["skipped"] == first["written"]
        cfg.force = True
        third = pipeline.run_extract(cfg)
        assert third["written"] == first["written"]

    def test_extract_too_short_names_trace(self, tmp_path):
        manifest = self._synth(tmp_path, duration_s=40)
        cfg = RunConfig(manifest=manifest, out=str(tmp_path), window_len=64)
        with pytest.raises(TraceTooShort) as exc:
            pipeline.run_extract(cfg)
        assert "constant_000" in str(exc.value)

    def test_fuse_writes_matrices(self, tmp_path):
        manifest = self._synth(tmp_path)
        cfg = RunConfig(manifest=manifest, out=str(tmp_path / "fused"), window_len=64, seed=3)
        result = pipeline.run_fuse(cfg)
        from ftdf.fusion import read_matrix

        train = read_matrix(result["train_matrix"])
        test = read_matrix(result["test_matrix"])
        assert train.n_rows == result["train_rows"] and test.n_rows == result["test_rows"]
        assert train.columns == ["madf", "iamf", "rmsf", "wlf", "fused_lag1", "fused_lag2", "fused_lag3"]

    def test_train_eval_predict_round_trip(self, tmp_path):
        manifest = self._synth(tmp_path, traces_per_class=4)
        out = tmp_path / "run"
        cfg = RunConfig(manifest=manifest, out=str(out), window_len=64, n_trees=5, seed=5, test_fraction=0.25)
        trained = pipeline.run_train(cfg)
        model_path = trained["model"]
        assert (out / "train_report.txt").exists() and (out / "train_report.csv").exists()
        assert trained["report"]["accuracy"] >= 0.5

        evaluated = pipeline.run_eval(cfg, model_path=model_path)
        assert 0.0 <= evaluated["report"]["accuracy"] <= 1.0

        trace_file = next((tmp_path / "traces").glob("constant_*.csv"))
        result = pipeline.run_predict(model_path, trace_path=str(trace_file))
        assert result["majority"] in ("constant", "on_off_cycle")
        assert len(result["predictions"]) == len(result["windows"])

    def test_eval_matrix_width_mismatch(self, tmp_path):
        manifest = self._synth(tmp_path, traces_per_class=4)
        out = tmp_path / "run"
        cfg = RunConfig(manifest=manifest, out=str(out), window_len=64, n_trees=3, seed=5)
        model_path = pipeline.run_train(cfg)["model"]
        # 5-column matrix (single lag) against the 7-column model
        narrow = pipeline.run_fuse(RunConfig(manifest=manifest, out=str(out), window_len=64, seed=5, lags=(1,)))
        with pytest.raises(ShapeMismatch):
            pipeline.run_eval(cfg, model_path=model_path, matrix_path=narrow["train_matrix"])

    def test_eval_cv_protocol(self, tmp_path):
        manifest = self._synth(tmp_path, traces_per_class=4)
        cfg = RunConfig(
            manifest=manifest, out=str(tmp_path / "cv"), window_len=64,
            n_trees=3, folds=2, seed=6, protocol="cv",
        )
        result = pipeline.run_eval(cfg)
        assert 0.0 <= result["report"]["accuracy"] <= 1.0

    def test_train_rejects_knn(self, tmp_path):
        manifest = self._synth(tmp_path)
        cfg = RunConfig(manifest=manifest, out=str(tmp_path / "k"), classifier="knn", window_len=64)
        with pytest.raises(InvalidSpec):
            pipeline.run_train(cfg)

    def test_run_sweep_table(self, tmp_path):
        manifest = self._synth(tmp_path, duration_s=900)
        cfg = RunConfig(
            manifest=manifest, out=str(tmp_path / "sweep"), lengths=(64, 128),
            n_trees=2, seed=8, window_len=64,
        )
        result = pipeline.run_sweep(cfg)
        lines = (tmp_path / "sweep" / "sweep.csv").read_text().splitlines()
        assert lines[0] == "scheme,window_len,accuracy,macro_f,runtime_ms"
        assert len(lines) == 1 + 16
