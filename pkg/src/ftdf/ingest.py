"""Power-trace ingestion.

Loading delimited trace files, block-mean decimation, deterministic synthetic
appliance generators, and the dataset manifest format (version "1").
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import (
    EmptyTrace,
    InvalidDuration,
    InvalidFactor,
    InvalidSpec,
    MalformedRow,
    NonFiniteSample,
)
from .rng import derive_seed, rng_for

SYNTH_KINDS = (
    "constant",
    "on_off_cycle",
    "motor_startup",
    "spiky_periodic",
    "ramp",
    "noisy_idle",
)

# Delimiters with names so the tab-separated manifest can carry them.
_DELIM_TOKENS = {"comma": ",", "semicolon": ";", "tab": "\t", "space": " "}
_DELIM_NAMES = {v: k for k, v in _DELIM_TOKENS.items()}

MANIFEST_VERSION = 1


@dataclass
class PowerTrace:
    """A labeled sampled power signal (watts) with its sampling rate in Hz."""

    samples: np.ndarray
    fs: float
    label: str = ""
    source_id: str = ""

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1 or self.samples.size == 0:
            raise EmptyTrace(f"trace {self.source_id!r} has no samples")
        finite = np.isfinite(self.samples)
        if not finite.all():
            raise NonFiniteSample(int(np.argmin(finite)), f"trace {self.source_id!r}")
        if not (self.fs > 0):
            raise InvalidSpec(f"sampling rate must be > 0, got {self.fs}")

    def __len__(self):
        return self.samples.size


@dataclass
class TraceSchema:
    """Column layout of a delimited trace file."""

    delimiter: str = ","
    power_col: int = 1
    time_col: int | None = 0
    has_header: bool = False
    scale: float = 1.0


@dataclass
class ManifestEntry:
    path: str
    label: str
    fs: float
    schema: TraceSchema = field(default_factory=TraceSchema)


@dataclass
class DatasetManifest:
    entries: list
    format_version: int = MANIFEST_VERSION

    def __post_init__(self):
        paths = [e.path for e in self.entries]
        if len(set(paths)) != len(paths):
            dupes = sorted({p for p in paths if paths.count(p) > 1})
            raise InvalidSpec(f"duplicate manifest paths: {dupes}")

    @property
    def labels(self):
        return sorted({e.label for e in self.entries})


def load_trace(path, schema=None, fs=1.0, label="", source_id=None):
    """Parse one delimited trace file into a PowerTrace.

    Rows that fail to parse are hard errors (MalformedRow with the 1-based
    physical line number), as are non-finite values; blank lines are ignored.
    """
    schema = schema or TraceSchema()
    values = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if schema.has_header and lineno == 1:
                continue
            stripped = line.strip()
            if not stripped:
                continue
            fields = stripped.split(schema.delimiter)
            if schema.power_col >= len(fields):
                raise MalformedRow(lineno, f"no column {schema.power_col} in {path}")
            try:
                value = float(fields[schema.power_col])
            except ValueError:
                raise MalformedRow(lineno, f"{fields[schema.power_col]!r} in {path}")
            if not math.isfinite(value):
                raise NonFiniteSample(len(values), path)
            values.append(value)
    if not values:
        raise EmptyTrace(f"no samples in {path}")
    samples = np.asarray(values, dtype=np.float64) * schema.scale
    return PowerTrace(samples, fs=fs, label=label, source_id=source_id or str(path))


def write_trace(trace, path, delimiter=","):
    """Write a trace as (index, value) rows; floats use repr for exact round-trips."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for i, v in enumerate(trace.samples):
            fh.write(f"{i}{delimiter}{float(v)!r}\n")


def decimate(trace, factor):
    """Block-mean downsampling: each output sample is the mean of `factor`
    consecutive inputs; a trailing partial block is dropped; fs divides."""
    factor = int(factor)
    if factor < 1:
        raise InvalidFactor(f"factor must be >= 1, got {factor}")
    if factor == 1:
        return replace(trace, samples=trace.samples.copy())
    m = trace.samples.size // factor
    if m < 1:
        raise EmptyTrace(f"decimation by {factor} leaves no samples")
    blocks = trace.samples[: m * factor].reshape(m, factor)
    return PowerTrace(
        blocks.mean(axis=1),
        fs=trace.fs / factor,
        label=trace.label,
        source_id=trace.source_id,
    )


# --- synthetic appliance classes ---------------------------------------------
#
# Six generator kinds with class-conditional parameter distributions. Each
# trace drawn with its own seed; explicit entries in `params` pin a parameter
# instead of drawing it. "noise_scale" multiplies the per-kind noise amplitude.


def _param(params, rng, name, low, high):
    if params is not None and name in params:
        return float(params[name])
    return float(rng.uniform(low, high))


def _noise_sd(params, rng, low, high):
    scale = float(params.get("noise_scale", 1.0)) if params else 1.0
    return _param(params, rng, "noise", low, high) * scale


def _gen_constant(n, fs, rng, params):
    level = _param(params, rng, "level", 100.0, 320.0)
    sd = _noise_sd(params, rng, 0.5, 2.0)
    return level + sd * rng.standard_normal(n)


def _gen_on_off_cycle(n, fs, rng, params):
    level = _param(params, rng, "level", 150.0, 400.0)
    period = _param(params, rng, "period_s", 10.0, 30.0)
    duty = _param(params, rng, "duty", 0.35, 0.65)
    base = _param(params, rng, "base", 1.0, 4.0)
    sd = _noise_sd(params, rng, 0.5, 2.0)
    phase = rng.uniform(0.0, period)
    t = np.arange(n) / fs
    on = ((t + phase) % period) < duty * period
    return np.where(on, level, base) + sd * rng.standard_normal(n)


def _gen_motor_startup(n, fs, rng, params):
    steady = _param(params, rng, "level", 120.0, 300.0)
    surge = _param(params, rng, "surge_ratio", 2.5, 3.5)
    tau = _param(params, rng, "tau_s", 5.0, 12.0)
    on_s = _param(params, rng, "on_s", 40.0, 90.0)
    off_s = _param(params, rng, "off_s", 20.0, 50.0)
    base = _param(params, rng, "base", 8.0, 25.0)  # controller standby draw
    sd = _noise_sd(params, rng, 1.0, 3.0)
    cycle = on_s + off_s
    phase = rng.uniform(0.0, cycle)
    t = np.arange(n) / fs
    tc = (t + phase) % cycle
    transient = steady + (surge - 1.0) * steady * np.exp(-tc / tau)
    return np.where(tc < on_s, transient, base) + sd * rng.standard_normal(n)


def _gen_spiky_periodic(n, fs, rng, params):
    base = _param(params, rng, "base", 15.0, 60.0)
    spike = _param(params, rng, "spike", 300.0, 800.0)
    period = _param(params, rng, "period_s", 8.0, 24.0)
    sd = _noise_sd(params, rng, 0.5, 1.5)
    period_n = max(2, int(round(period * fs)))
    phase = int(rng.integers(0, period_n))
    starts = np.arange(phase, n, period_n)
    jitter_span = max(1, period_n // 8)
    jitter = rng.integers(-jitter_span, jitter_span + 1, size=starts.size)
    widths = rng.integers(1, 3, size=starts.size)
    s = base + sd * rng.standard_normal(n)
    for start, width in zip(np.clip(starts + jitter, 0, n - 1), widths):
        s[start : start + int(width)] += spike
    return s


def _gen_ramp(n, fs, rng, params):
    low = _param(params, rng, "low", 20.0, 80.0)
    high = _param(params, rng, "high", 200.0, 450.0)
    period = _param(params, rng, "period_s", 120.0, 400.0)
    sd = _noise_sd(params, rng, 0.5, 2.0)
    phase = rng.uniform(0.0, period)
    x = ((np.arange(n) / fs + phase) % period) / period
    tri = np.where(x < 0.5, 2.0 * x, 2.0 - 2.0 * x)
    return low + (high - low) * tri + sd * rng.standard_normal(n)


def _gen_noisy_idle(n, fs, rng, params):
    level = _param(params, rng, "level", 25.0, 90.0)
    sd = _noise_sd(params, rng, 6.0, 16.0)
    return level + sd * rng.standard_normal(n)


_GENERATORS = {
    "constant": _gen_constant,
    "on_off_cycle": _gen_on_off_cycle,
    "motor_startup": _gen_motor_startup,
    "spiky_periodic": _gen_spiky_periodic,
    "ramp": _gen_ramp,
    "noisy_idle": _gen_noisy_idle,
}


def synth_appliance(kind, duration_s, fs, seed, params=None):
    """Generate one synthetic appliance trace, deterministic in all arguments.

    Negative instantaneous values are clipped to zero (power readings).
    """
    if kind not in _GENERATORS:
        raise InvalidSpec(f"unknown synthetic kind {kind!r}; have {SYNTH_KINDS}")
    n = int(round(duration_s * fs))
    if n < 1:
        raise InvalidDuration(f"duration_s*fs = {duration_s * fs} yields no samples")
    rng = rng_for(seed, "synth", kind)
    samples = np.maximum(_GENERATORS[kind](n, float(fs), rng, params), 0.0)
    return PowerTrace(samples, fs=float(fs), label=kind, source_id=f"{kind}/seed{seed}")


@dataclass
class SynthSpec:
    """A synthetic benchmark: which classes, how many traces, how long."""

    classes: tuple = SYNTH_KINDS
    traces_per_class: int = 10
    duration_s: float = 4352.0
    fs: float = 1.0
    seed: int = 0
    noise_scale: float = 1.0

    def validate(self):
        unknown = [c for c in self.classes if c not in SYNTH_KINDS]
        if unknown or not self.classes:
            raise InvalidSpec(f"classes must be a non-empty subset of {SYNTH_KINDS}, got {self.classes}")
        if self.traces_per_class < 1:
            raise InvalidSpec("traces_per_class must be >= 1")
        if self.duration_s * self.fs < 1:
            raise InvalidDuration("duration_s*fs must be >= 1")
        if self.noise_scale < 0:
            raise InvalidSpec("noise_scale must be >= 0")
        return self


def generate_dataset(spec):
    """All traces of a SynthSpec, in (class, replicate) order."""
    spec.validate()
    traces = []
    for kind in spec.classes:
        for i in range(spec.traces_per_class):
            trace_seed = derive_seed(spec.seed, "trace", kind, i)
            tr = synth_appliance(
                kind, spec.duration_s, spec.fs, trace_seed,
                params={"noise_scale": spec.noise_scale},
            )
            tr.source_id = f"{kind}_{i:03d}"
            traces.append(tr)
    return traces


# --- manifest io --------------------------------------------------------------
#
# Tab-separated text, first line "version<TAB>1", one entry per line:
#   path  label  fs  delimiter  power_col  time_col|none  header(0|1)
# Delimiters are written as named tokens (comma/semicolon/tab/space) when
# available so tabs inside the manifest stay unambiguous.


def write_manifest(manifest, path):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"version\t{manifest.format_version}\n")
        for e in manifest.entries:
            delim = _DELIM_NAMES.get(e.schema.delimiter, e.schema.delimiter)
            time_col = "none" if e.schema.time_col is None else str(e.schema.time_col)
            header = "1" if e.schema.has_header else "0"
            fh.write(
                f"{e.path}\t{e.label}\t{float(e.fs)!r}\t{delim}\t"
                f"{e.schema.power_col}\t{time_col}\t{header}\n"
            )


def load_manifest(path):
    entries = []
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    if not lines or not lines[0].strip():
        raise EmptyTrace(f"empty manifest {path}")
    head = lines[0].split("\t")
    if len(head) != 2 or head[0] != "version":
        raise MalformedRow(1, f"expected 'version<TAB>N' in {path}")
    if head[1] != str(MANIFEST_VERSION):
        raise InvalidSpec(f"unsupported manifest version {head[1]!r}")
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        fields = line.split("\t")
        if len(fields) != 7:
            raise MalformedRow(lineno, f"expected 7 fields in {path}")
        p, label, fs_s, delim, power_col, time_col, header = fields
        try:
            schema = TraceSchema(
                delimiter=_DELIM_TOKENS.get(delim, delim),
                power_col=int(power_col),
                time_col=None if time_col == "none" else int(time_col),
                has_header=header == "1",
            )
            entries.append(ManifestEntry(p, label, float(fs_s), schema))
        except ValueError as exc:
            raise MalformedRow(lineno, f"{exc} in {path}")
    return DatasetManifest(entries)


def load_traces(manifest, base_dir="."):
    """Load every manifest entry; paths resolve relative to base_dir."""
    traces = []
    for e in manifest.entries:
        p = e.path if os.path.isabs(e.path) else os.path.join(base_dir, e.path)
        traces.append(load_trace(p, e.schema, fs=e.fs, label=e.label, source_id=e.path))
    return traces
