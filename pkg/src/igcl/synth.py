"""Synthetic multivariate benchmark with injected precursor/anomaly events."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.signal import lfilter

from .errors import ConfigError, OverlapError
from .series import SeriesFrame, write_series_csv

KINDS = ("spike-train", "level-shift", "trend-ramp", "frequency-shift", "none")
ANOMALY_GAIN = 3.0
AR_COEF = 0.7
AR_NOISE_STD = 0.1
# Monday 2024-01-01 00:00:00 UTC, one-minute sampling.
DEFAULT_START = 1704067200
DEFAULT_STEP = 60


@dataclass(frozen=True)
class EventSpec:
    """A precursor of ``precursor_length`` points followed by an anomaly.

    The anomaly occupies ``[onset, onset + anomaly_length)`` and the
    precursor ``[onset - precursor_length, onset)``.
    """

    onset: int
    precursor_length: int
    anomaly_length: int
    variables: tuple
    kind: str = "level-shift"
    magnitude: float = 1.0

    @property
    def start(self) -> int:
        return self.onset - self.precursor_length

    @property
    def stop(self) -> int:
        return self.onset + self.anomaly_length

    def validate(self, n_vars: int = None, length: int = None, where: str = "event"):
        if self.kind not in KINDS:
            raise ConfigError(f"{where}.kind: unknown kind {self.kind!r}", f"{where}.kind")
        if self.anomaly_length < 1:
            raise ConfigError(f"{where}.anomaly_length must be >= 1", f"{where}.anomaly_length")
        if self.precursor_length < 0 or (self.kind != "none" and self.precursor_length < 1):
            raise ConfigError(f"{where}.precursor_length must be >= 1", f"{where}.precursor_length")
        if self.kind != "none" and not self.variables:
            raise ConfigError(f"{where}.variables must be non-empty", f"{where}.variables")
        if n_vars is not None and any(not 0 <= v < n_vars for v in self.variables):
            raise ConfigError(f"{where}.variables: index out of range for N={n_vars}", f"{where}.variables")
        if self.start < 0 or (length is not None and self.stop > length):
            raise ConfigError(f"{where}.onset: event does not fit in the series", f"{where}.onset")

    @classmethod
    def from_dict(cls, d: dict, where: str = "event") -> "EventSpec":
        if not isinstance(d, dict):
            raise ConfigError(f"{where}: expected an object", where)
        known = {"onset", "precursor_length", "anomaly_length", "variables", "kind", "magnitude"}
        for key in d:
            if key not in known:
                raise ConfigError(f"{where}.{key}: unknown field", f"{where}.{key}")
        for key in ("onset", "precursor_length", "anomaly_length"):
            if key not in d:
                raise ConfigError(f"{where}.{key}: missing", f"{where}.{key}")
            if not isinstance(d[key], int) or isinstance(d[key], bool):
                raise ConfigError(f"{where}.{key}: expected an integer", f"{where}.{key}")
        variables = d.get("variables", [])
        if not isinstance(variables, list) or not all(isinstance(v, int) for v in variables):
            raise ConfigError(f"{where}.variables: expected a list of integers", f"{where}.variables")
        magnitude = d.get("magnitude", 1.0)
        if not isinstance(magnitude, (int, float)) or isinstance(magnitude, bool):
            raise ConfigError(f"{where}.magnitude: expected a number", f"{where}.magnitude")
        spec = cls(
            onset=d["onset"],
            precursor_length=d["precursor_length"],
            anomaly_length=d["anomaly_length"],
            variables=tuple(variables),
            kind=d.get("kind", "level-shift"),
            magnitude=float(magnitude),
        )
        spec.validate(where=where)
        return spec

    def to_dict(self) -> dict:
        d = asdict(self)
        d["variables"] = list(self.variables)
        return d


def load_event_specs(doc) -> list[EventSpec]:
    """Parse a JSON list (or ``{"events": [...]}``) of event objects."""
    if isinstance(doc, (str, Path)):
        doc = json.loads(Path(doc).read_text())
    if isinstance(doc, dict):
        doc = doc.get("events")
    if not isinstance(doc, list):
        raise ConfigError("events: expected a list of event objects", "events")
    return [EventSpec.from_dict(d, f"events[{i}]") for i, d in enumerate(doc)]


def generate_normal_series(n_vars: int, length: int, seed: int, start: float = DEFAULT_START,
                           step: float = DEFAULT_STEP) -> SeriesFrame:
    """Sum of 1-3 random sinusoids per variable plus AR(1) noise."""
    if n_vars < 1 or length < 1:
        raise ValueError("need n_vars >= 1 and length >= 1")
    rng = np.random.default_rng(seed)
    t = np.arange(length, dtype=np.float64)
    values = np.zeros((n_vars, length))
    for i in range(n_vars):
        for _ in range(rng.integers(1, 4)):
            period = rng.uniform(20.0, 200.0)
            amp = rng.uniform(0.5, 1.5)
            phase = rng.uniform(0.0, 2 * np.pi)
            values[i] += amp * np.sin(2 * np.pi * t / period + phase)
        innov = rng.normal(0.0, AR_NOISE_STD, size=length)
        values[i] += lfilter([1.0], [1.0, -AR_COEF], innov)
    timestamps = start + step * t
    return SeriesFrame(values, timestamps, np.zeros(length, dtype=np.int8))


def _shape(kind: str, n: int) -> np.ndarray:
    k = np.arange(n, dtype=np.float64)
    if kind == "spike-train":
        return (k % 3 == 0).astype(np.float64)
    if kind == "level-shift":
        return np.ones(n)
    if kind == "trend-ramp":
        return (k + 1) / n
    if kind == "frequency-shift":
        return np.sin(2 * np.pi * k / 4.0)
    return np.zeros(n)


def check_non_overlapping(specs: Sequence[EventSpec]):
    spans = sorted((s.start, s.stop) for s in specs)
    for (a0, a1), (b0, b1) in zip(spans, spans[1:]):
        if b0 < a1:
            raise OverlapError(f"events [{a0}, {a1}) and [{b0}, {b1}) overlap")


def inject_precursor_events(frame: SeriesFrame, specs: Sequence[EventSpec], seed: int) -> SeriesFrame:
    """Add precursor and anomaly perturbations; label only the anomaly points.

    Each affected variable gets a random sign per event. A ``none`` event
    leaves its precursor span untouched and perturbs every listed variable
    (all variables when the list is empty) during the anomaly.
    """
    check_non_overlapping(specs)
    for k, s in enumerate(specs):
        s.validate(frame.n_vars, frame.length, f"events[{k}]")
    rng = np.random.default_rng(seed)
    values = frame.values.copy()
    labels = np.zeros(frame.length, dtype=np.int8) if frame.labels is None else frame.labels.copy()
    for s in specs:
        variables = list(s.variables) or list(range(frame.n_vars))
        signs = rng.choice([-1.0, 1.0], size=len(variables))
        anomaly_kind = "level-shift" if s.kind == "none" else s.kind
        pre = s.magnitude * _shape(s.kind, s.precursor_length)
        post = ANOMALY_GAIN * s.magnitude * _shape(anomaly_kind, s.anomaly_length)
        for v, sign in zip(variables, signs):
            if s.kind != "none":
                values[v, s.start : s.onset] += sign * pre
            values[v, s.onset : s.stop] += sign * post
        labels[s.onset : s.stop] = 1
    return SeriesFrame(values, frame.timestamps, labels, list(frame.names))


def random_event_specs(n_vars: int, length: int, n_events: int, seed: int, precursor_length: int = 16,
                       anomaly_length: int = 16, max_vars: int = 3, kinds=None, magnitude=1.0,
                       margin: int = 200) -> list[EventSpec]:
    """Evenly spaced events with random kinds and 1..max_vars variable subsets."""
    rng = np.random.default_rng(seed)
    kinds = list(kinds or KINDS[:-1])
    span = precursor_length + anomaly_length
    gap = (length - 2 * margin) / n_events
    if gap < span + 1:
        raise ValueError("series too short for the requested events")
    specs = []
    for e in range(n_events):
        lo = margin + int(e * gap) + precursor_length
        hi = margin + int((e + 1) * gap) - anomaly_length
        onset = int(rng.integers(lo, max(lo + 1, hi)))
        kind = kinds[int(rng.integers(len(kinds)))]
        k = int(rng.integers(1, min(max_vars, n_vars) + 1))
        variables = tuple(sorted(int(v) for v in rng.choice(n_vars, size=k, replace=False)))
        specs.append(EventSpec(onset, precursor_length, anomaly_length, variables, kind, float(magnitude)))
    return specs


def make_benchmark(n_vars: int, train_length: int, test_length: int, specs: Sequence[EventSpec],
                   seed: int) -> tuple[SeriesFrame, SeriesFrame]:
    """Normal training prefix plus an event-bearing test continuation."""
    base = generate_normal_series(n_vars, train_length + test_length, seed)
    train = base.slice(0, train_length)
    test = inject_precursor_events(base.slice(train_length, train_length + test_length), specs, seed + 1)
    return train, test


def write_benchmark(train: SeriesFrame, test: SeriesFrame, out_dir) -> tuple[Path, Path]:
    """Write ``train.csv`` (no label column) and ``test.csv`` (with labels)."""
    if test.labels is None:
        raise ValueError("test frame needs labels")
    if train.labels is not None and train.labels.any():
        raise ValueError("training prefix must be normal-only")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    train_path, test_path = out_dir / "train.csv", out_dir / "test.csv"
    write_series_csv(train, train_path, include_labels=False)
    write_series_csv(test, test_path, include_labels=True)
    return train_path, test_path
