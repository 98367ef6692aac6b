"""Run configuration.

A RunConfig collects everything a pipeline run needs (data location, window
geometry, fusion setup, classifier choice, protocol, seed, output directory)
and validates it against module preconditions before any work starts. Configs
load from a flat key=value text file; command-line flags override file keys.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields

from .classify import KNN_METRICS, KNN_WEIGHTINGS, TreeParams
from .descriptors import DESCRIPTOR_IDS, ArConfig, DescriptorParams
from .errors import InvalidOverlap, InvalidSpec, InvalidWindowLength
from .fusion import FusionConfig
from .ingest import SYNTH_KINDS, SynthSpec

DEFAULT_SWEEP_LENGTHS = (64, 128, 256, 512, 1024, 2048, 3072, 4096)

SCHEMES = DESCRIPTOR_IDS + ("ftdf",)
CLASSIFIERS = ("ebt", "tree", "knn")
PROTOCOLS = ("holdout", "cv")

_BOOL = {"1": True, "true": True, "yes": True, "on": True,
         "0": False, "false": False, "no": False, "off": False}


def _as_bool(value):
    if isinstance(value, bool):
        return value
    v = str(value).strip().lower()
    if v not in _BOOL:
        raise InvalidSpec(f"expected a boolean, got {value!r}")
    return _BOOL[v]


def _as_tuple(value, conv):
    if isinstance(value, (list, tuple)):
        return tuple(conv(v) for v in value)
    return tuple(conv(v.strip()) for v in str(value).split(",") if v.strip())


@dataclass
class RunConfig:
    manifest: str = ""
    out: str = "."
    window_len: int = 1024
    overlap: float = 0.25
    scheme: str = "ftdf"
    pair_a: tuple = ("madf", "iamf")
    pair_b: tuple = ("rmsf", "wlf")
    lags: tuple = (1, 2, 3)
    include_raw: bool = True
    sscf_threshold: float = 1e-10
    ar_order: int = 15
    rms_literal: bool = False
    classifier: str = "ebt"
    n_trees: int = 30
    max_splits: int = 42000
    min_leaf: int = 1
    knn_k: int = 1
    knn_metric: str = "euclidean"
    knn_weighting: str = "uniform"
    protocol: str = "holdout"
    test_fraction: float = 0.25
    folds: int = 10
    seed: int = 0
    threads: int = 1
    force: bool = False
    descriptors: tuple = DESCRIPTOR_IDS
    lengths: tuple = DEFAULT_SWEEP_LENGTHS
    # synthetic generation
    classes: tuple = SYNTH_KINDS
    traces_per_class: int = 10
    duration_s: float = 4352.0
    fs: float = 1.0
    noise_scale: float = 1.0

    _CONVERTERS = {
        "window_len": int, "ar_order": int, "n_trees": int, "max_splits": int,
        "min_leaf": int, "knn_k": int, "folds": int, "seed": int, "threads": int,
        "traces_per_class": int,
        "overlap": float, "sscf_threshold": float, "test_fraction": float,
        "duration_s": float, "fs": float, "noise_scale": float,
        "include_raw": _as_bool, "rms_literal": _as_bool, "force": _as_bool,
        "pair_a": lambda v: _as_tuple(v, str), "pair_b": lambda v: _as_tuple(v, str),
        "lags": lambda v: _as_tuple(v, int), "lengths": lambda v: _as_tuple(v, int),
        "descriptors": lambda v: _as_tuple(v, str), "classes": lambda v: _as_tuple(v, str),
    }

    @classmethod
    def from_mapping(cls, mapping):
        known = {f.name for f in fields(cls) if not f.name.startswith("_")}
        kwargs = {}
        for key, value in mapping.items():
            if key not in known:
                raise InvalidSpec(f"unknown configuration key {key!r}")
            if value is None:
                continue
            conv = cls._CONVERTERS.get(key)
            try:
                kwargs[key] = conv(value) if conv else value
            except (TypeError, ValueError) as exc:
                raise InvalidSpec(f"bad value for {key!r}: {exc}")
        return cls(**kwargs)

    def fusion_config(self):
        return FusionConfig(
            pair_a=tuple(self.pair_a),
            pair_b=tuple(self.pair_b),
            lags=tuple(self.lags),
            include_raw=self.include_raw,
        ).validate()

    def descriptor_params(self):
        return DescriptorParams(
            sscf_threshold=self.sscf_threshold,
            ar=ArConfig(order=self.ar_order),
            rms_literal=self.rms_literal,
        )

    def tree_params(self):
        return TreeParams(max_splits=self.max_splits, min_leaf_size=self.min_leaf).validate()

    def synth_spec(self):
        return SynthSpec(
            classes=tuple(self.classes),
            traces_per_class=self.traces_per_class,
            duration_s=self.duration_s,
            fs=self.fs,
            seed=self.seed,
            noise_scale=self.noise_scale,
        ).validate()

    def validate(self):
        if self.window_len < 2:
            raise InvalidWindowLength(f"window_len must be >= 2, got {self.window_len}")
        if not (0.0 <= self.overlap < 1.0):
            raise InvalidOverlap(f"overlap must be in [0, 1), got {self.overlap}")
        if self.scheme not in SCHEMES:
            raise InvalidSpec(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")
        if self.classifier not in CLASSIFIERS:
            raise InvalidSpec(f"classifier must be one of {CLASSIFIERS}, got {self.classifier!r}")
        if self.protocol not in PROTOCOLS:
            raise InvalidSpec(f"protocol must be one of {PROTOCOLS}, got {self.protocol!r}")
        if not (0.0 < self.test_fraction < 1.0):
            raise InvalidSpec(f"test_fraction must be in (0, 1), got {self.test_fraction}")
        if self.folds < 2:
            raise InvalidSpec(f"folds must be >= 2, got {self.folds}")
        if self.threads < 1:
            raise InvalidSpec(f"threads must be >= 1, got {self.threads}")
        if self.n_trees < 1:
            raise InvalidSpec(f"n_trees must be >= 1, got {self.n_trees}")
        if self.knn_metric not in KNN_METRICS:
            raise InvalidSpec(f"knn_metric must be one of {KNN_METRICS}")
        if self.knn_weighting not in KNN_WEIGHTINGS:
            raise InvalidSpec(f"knn_weighting must be one of {KNN_WEIGHTINGS}")
        if self.knn_k < 1:
            raise InvalidSpec(f"knn_k must be >= 1, got {self.knn_k}")
        if self.ar_order < 1 or self.ar_order >= self.window_len:
            raise InvalidSpec(
                f"ar_order must be in 1..window_len-1, got {self.ar_order} with window {self.window_len}"
            )
        if self.sscf_threshold < 0:
            raise InvalidSpec(f"sscf_threshold must be >= 0, got {self.sscf_threshold}")
        unknown = [d for d in self.descriptors if d not in DESCRIPTOR_IDS]
        if unknown or not self.descriptors:
            raise InvalidSpec(f"descriptors must be a non-empty subset of {DESCRIPTOR_IDS}")
        if not self.lengths or any(n < 2 for n in self.lengths):
            raise InvalidSpec(f"sweep lengths must all be >= 2, got {self.lengths}")
        self.fusion_config()
        self.tree_params()
        return self

    def echo(self):
        """Flat dict of the settings a report should record."""
        return {
            "window_len": self.window_len,
            "overlap": self.overlap,
            "scheme": self.scheme,
            "pair_a": ",".join(self.pair_a),
            "pair_b": ",".join(self.pair_b),
            "lags": ",".join(str(n) for n in self.lags),
            "include_raw": self.include_raw,
            "classifier": self.classifier,
            "n_trees": self.n_trees,
            "max_splits": self.max_splits,
            "min_leaf": self.min_leaf,
            "protocol": self.protocol,
            "test_fraction": self.test_fraction,
            "folds": self.folds,
            "seed": self.seed,
        }


def parse_config_file(path):
    """Flat `key = value` lines; '#' starts a comment; blank lines ignored."""
    mapping = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.split("#", 1)[0].strip()
            if not stripped:
                continue
            if "=" not in stripped:
                raise InvalidSpec(f"{path}:{lineno}: expected 'key = value'")
            key, value = stripped.split("=", 1)
            mapping[key.strip()] = value.strip()
    return mapping
