"""Series container, CSV ingestion, windowing, normalization and targets."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import EmptySeries, MalformedCsv, MissingLabels, OutOfRange

TIMESTAMP_COLUMN = "timestamp"
LABEL_COLUMN = "label"
EXCLUDED = -1

_SECONDS_PER_DAY = 86400.0
# 1970-01-01 was a Thursday; shift so that Monday is day 0.
_EPOCH_WEEKDAY = 3


@dataclass
class SeriesFrame:
    """A multivariate series stored as an ``(N, T)`` array.

    ``timestamps`` are epoch seconds, ``labels`` are point labels in {0, 1}.
    """

    values: np.ndarray
    timestamps: Optional[np.ndarray] = None
    labels: Optional[np.ndarray] = None
    names: Optional[list[str]] = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim == 1:
            self.values = self.values[None, :]
        if self.values.ndim != 2:
            raise ValueError("values must be a 2-D (N, T) array")
        if self.values.shape[1] == 0:
            raise EmptySeries("series has no timestamps")
        if not np.all(np.isfinite(self.values)):
            raise MalformedCsv("series contains non-finite values")
        T = self.values.shape[1]
        if self.timestamps is not None:
            self.timestamps = np.asarray(self.timestamps, dtype=np.float64)
            if self.timestamps.shape != (T,):
                raise ValueError("timestamps length does not match series length")
            if T > 1 and not np.all(np.diff(self.timestamps) > 0):
                raise ValueError("timestamps must be strictly increasing")
        if self.labels is not None:
            labels = np.asarray(self.labels)
            if labels.shape != (T,):
                raise ValueError("labels length does not match series length")
            if not np.all((labels == 0) | (labels == 1)):
                raise ValueError("labels must be 0 or 1")
            self.labels = labels.astype(np.int8)
        if self.names is None:
            self.names = [f"v{i}" for i in range(self.values.shape[0])]
        elif len(self.names) != self.values.shape[0]:
            raise ValueError("names length does not match variable count")

    @property
    def n_vars(self) -> int:
        return self.values.shape[0]

    @property
    def length(self) -> int:
        return self.values.shape[1]

    def slice(self, start: int, stop: int) -> "SeriesFrame":
        return SeriesFrame(
            values=self.values[:, start:stop].copy(),
            timestamps=None if self.timestamps is None else self.timestamps[start:stop].copy(),
            labels=None if self.labels is None else self.labels[start:stop].copy(),
            names=list(self.names),
        )

    def without_labels(self) -> "SeriesFrame":
        return SeriesFrame(self.values.copy(), self.timestamps, None, list(self.names))


def _parse_cell(cell: str) -> float:
    cell = cell.strip()
    if cell == "":
        return math.nan
    return float(cell)


def load_series_csv(path, missing: str = "reject") -> SeriesFrame:
    """Read a CSV with one column per variable.

    Columns named ``timestamp`` and ``label`` are reserved. ``missing`` is
    either ``"reject"`` (any empty, NaN or non-numeric cell raises
    :class:`MalformedCsv`) or ``"ffill"`` (such cells take the previous value).
    """
    if missing not in ("reject", "ffill"):
        raise ValueError(f"unknown missing-value policy {missing!r}")
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        rows = [row for row in csv.reader(fh) if row and not row[0].startswith("#")]
    if not rows:
        raise EmptySeries(f"{path}: no header row")
    header = [h.strip() for h in rows[0]]
    body = rows[1:]
    if not body:
        raise EmptySeries(f"{path}: no data rows")

    for lineno, row in enumerate(body, start=2):
        if len(row) != len(header):
            raise MalformedCsv(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")

    def column(idx):
        return [row[idx] for row in body]

    ts_idx = header.index(TIMESTAMP_COLUMN) if TIMESTAMP_COLUMN in header else None
    lb_idx = header.index(LABEL_COLUMN) if LABEL_COLUMN in header else None
    var_idx = [i for i in range(len(header)) if i not in (ts_idx, lb_idx)]
    if not var_idx:
        raise MalformedCsv(f"{path}: no variable columns")

    values = np.empty((len(var_idx), len(body)))
    for r, ci in enumerate(var_idx):
        col = np.empty(len(body))
        for k, cell in enumerate(column(ci)):
            try:
                col[k] = _parse_cell(cell)
            except ValueError:
                if missing == "reject":
                    raise MalformedCsv(
                        f"{path}:{k + 2}: non-numeric value {cell!r} in column {header[ci]!r}"
                    ) from None
                col[k] = math.nan
        bad = ~np.isfinite(col)
        if bad.any():
            if missing == "reject":
                k = int(np.argmax(bad))
                raise MalformedCsv(f"{path}:{k + 2}: missing value in column {header[ci]!r}")
            col = _forward_fill(col, header[ci], path)
        values[r] = col

    timestamps = labels = None
    if ts_idx is not None:
        try:
            timestamps = np.array([float(c) for c in column(ts_idx)])
        except ValueError as exc:
            raise MalformedCsv(f"{path}: bad timestamp: {exc}") from None
    if lb_idx is not None:
        try:
            labels = np.array([int(float(c)) for c in column(lb_idx)])
        except ValueError as exc:
            raise MalformedCsv(f"{path}: bad label: {exc}") from None
        if not np.all((labels == 0) | (labels == 1)):
            raise MalformedCsv(f"{path}: labels must be 0 or 1")
    try:
        return SeriesFrame(values, timestamps, labels, [header[i] for i in var_idx])
    except ValueError as exc:
        raise MalformedCsv(f"{path}: {exc}") from None


def _forward_fill(col: np.ndarray, name: str, path) -> np.ndarray:
    good = np.isfinite(col)
    if not good[0]:
        raise MalformedCsv(f"{path}: column {name!r} starts with a missing value; nothing to forward-fill")
    idx = np.where(good, np.arange(len(col)), 0)
    np.maximum.accumulate(idx, out=idx)
    return col[idx]


def write_series_csv(frame: SeriesFrame, path, include_labels: bool = True, comment: str = None):
    """Write ``frame`` in the layout :func:`load_series_csv` reads."""
    path = Path(path)
    header = []
    cols = []
    if frame.timestamps is not None:
        header.append(TIMESTAMP_COLUMN)
        cols.append([_fmt_ts(v) for v in frame.timestamps])
    for name, row in zip(frame.names, frame.values):
        header.append(name)
        cols.append([repr(float(v)) for v in row])
    if include_labels and frame.labels is not None:
        header.append(LABEL_COLUMN)
        cols.append([str(int(v)) for v in frame.labels])
    with path.open("w", newline="", encoding="utf-8") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(zip(*cols))
    return path


def _fmt_ts(v: float) -> str:
    return str(int(v)) if float(v).is_integer() else repr(float(v))


@dataclass
class WindowSegment:
    """The ``b + h`` observations ending at anchor ``t``.

    Window view ``j`` is the sub-sequence ``[t - j - h, t - j]`` (inclusive).
    """

    t: int
    h: int
    b: int
    data: np.ndarray
    timestamps: Optional[np.ndarray] = None

    @property
    def start(self) -> int:
        return self.t - self.b + 1 - self.h

    @property
    def length(self) -> int:
        return self.b + self.h

    def window(self, j: int) -> np.ndarray:
        if not 0 <= j < self.b:
            raise OutOfRange(f"window index {j} not in [0, {self.b})")
        stop = self.length - j
        return self.data[:, stop - self.h - 1 : stop]

    def window_bounds(self, j: int) -> tuple[int, int]:
        return self.t - j - self.h, self.t - j


def make_segment(frame: SeriesFrame, t: int, h: int, b: int) -> WindowSegment:
    if h < 1 or b < 1:
        raise OutOfRange(f"need h >= 1 and b >= 1, got h={h}, b={b}")
    start = t - b + 1 - h
    if start < 0 or t >= frame.length:
        raise OutOfRange(f"segment [{start}, {t}] does not fit in a series of length {frame.length}")
    ts = None if frame.timestamps is None else frame.timestamps[start : t + 1]
    return WindowSegment(t, h, b, frame.values[:, start : t + 1], ts)


@dataclass
class NormalizedSegment:
    data: np.ndarray
    mean: np.ndarray
    std: np.ndarray
    epsilon: float
    segment: Optional[WindowSegment] = field(default=None, repr=False)

    @property
    def h(self) -> int:
        return self.segment.h

    def denormalize(self) -> np.ndarray:
        return self.data * self.std[..., None] + self.mean[..., None]


def normalize_rows(x: np.ndarray, epsilon: float = 1e-5):
    """Standardize along the last axis with population std.

    Rows whose std is at most ``epsilon`` become zeros and keep a unit scale.
    Returns ``(normalized, mean, scale)``.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    x = np.asarray(x, dtype=np.float64)
    mean = x.mean(axis=-1)
    centered = x - mean[..., None]
    std = np.sqrt(np.mean(centered * centered, axis=-1))
    flat = std <= epsilon
    scale = np.where(flat, 1.0, std)
    out = centered / scale[..., None]
    out[flat] = 0.0
    return out, mean, scale


def instance_normalize(segment: WindowSegment, epsilon: float = 1e-5) -> NormalizedSegment:
    data, mean, scale = normalize_rows(segment.data, epsilon)
    return NormalizedSegment(data, mean, scale, epsilon, segment)


def encode_time_attributes(timestamps: Optional[Sequence[float]], length: int = None) -> np.ndarray:
    """Cyclical hour-of-day and day-of-week encodings, shape ``(F, T)``.

    Rows are ``sin/cos`` of the hour phase then ``sin/cos`` of the weekday
    phase (Monday 00:00 UTC is phase zero). Absent timestamps give ``F = 0``.
    """
    if timestamps is None:
        return np.zeros((0, 0 if length is None else length))
    ts = np.asarray(timestamps, dtype=np.float64)
    day_phase = 2 * np.pi * np.mod(ts, _SECONDS_PER_DAY) / _SECONDS_PER_DAY
    days = ts / _SECONDS_PER_DAY
    week_phase = 2 * np.pi * np.mod(days + _EPOCH_WEEKDAY, 7.0) / 7.0
    return np.stack([np.sin(day_phase), np.cos(day_phase), np.sin(week_phase), np.cos(week_phase)])


def future_anomaly_targets(labels, f: int, h: int = 0, exclude_contaminated: bool = True) -> np.ndarray:
    """Per-timestamp prediction targets.

    ``target[t] = 1`` iff a label in ``[t + 1, t + f]`` is 1. Timestamps whose
    look-forward runs past the end are :data:`EXCLUDED`, as are (optionally)
    those whose current window ``[t - h, t]`` already holds an anomaly.
    """
    if isinstance(labels, SeriesFrame):
        labels = labels.labels
    if labels is None:
        raise MissingLabels("targets need point labels")
    if f < 1:
        raise OutOfRange("look-forward f must be >= 1")
    lab = np.asarray(labels, dtype=np.int64)
    T = len(lab)
    csum = np.concatenate([[0], np.cumsum(lab)])
    t = np.arange(T)
    out = np.full(T, EXCLUDED, dtype=np.int64)
    ok = t + f <= T - 1
    out[ok] = (csum[t[ok] + f + 1] - csum[t[ok] + 1] > 0).astype(np.int64)
    if exclude_contaminated:
        lo = np.maximum(t - h, 0)
        dirty = csum[t + 1] - csum[lo] > 0
        out[dirty] = EXCLUDED
    return out
