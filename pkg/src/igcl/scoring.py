"""Sliding-window anomaly-prediction scores, thresholds and early warnings."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
import torch
from numpy.lib.stride_tricks import sliding_window_view

from .errors import EmptyScores, InsufficientHistory, MissingLabels, ShapeMismatch
from .memory import MemoryBank
from .objective import sim
from .series import SeriesFrame, WindowSegment, encode_time_attributes, normalize_rows

# Fixed batch size so every anchor is always encoded in an identically shaped batch.
CHUNK = 64


@dataclass
class ScoreSeries:
    """Per-timestamp scores; ``NaN`` where ``excluded``."""

    scores: np.ndarray
    excluded: np.ndarray
    delta: Optional[float] = None

    @property
    def flags(self) -> np.ndarray:
        if self.delta is None:
            raise ValueError("no threshold set")
        with np.errstate(invalid="ignore"):
            return ((self.scores >= self.delta) & ~self.excluded).astype(np.int8)

    @property
    def valid_scores(self) -> np.ndarray:
        return self.scores[~self.excluded]


def scores_from_sims(neg_sims, pos_sims) -> np.ndarray:
    """``sum_j Sim(z_t, z-_{t,j}) - sum_j Sim(z_t, z_{t-j})`` along the last axis."""
    return np.sum(neg_sims, axis=-1) - np.sum(pos_sims, axis=-1)


def _score_batch(model, bank: MemoryBank, x: np.ndarray, aux: Optional[np.ndarray]) -> np.ndarray:
    """Scores for normalized segments ``x (n, N, L)``."""
    cfg = model.cfg
    n, N, L = x.shape
    K = len(bank)
    P = cfg.n_pos
    if L - 1 - P < 0:
        raise InsufficientHistory(f"segment length {L} leaves no room for {P} positives")
    dtype = model.dtype
    xt = torch.as_tensor(x, dtype=dtype)
    at = None if aux is None or model.n_aux == 0 else torch.as_tensor(aux, dtype=dtype)
    with torch.no_grad():
        z = model.encoder(xt, at)
        z_t = z[:, :, -1]
        z_prev = z[:, :, L - 1 - P : L - 1].flip(-1).transpose(1, 2)
        pos = sim(z_t.unsqueeze(1), z_prev, cfg.similarity).double().numpy()
        if K == 0:
            neg = np.zeros((n, 0))
        else:
            pats = torch.as_tensor(bank.stacked(), dtype=dtype)
            if bank.literal:
                negs = pats.unsqueeze(0).expand(n, K, N, L)
            else:
                W = pats.shape[-1]
                negs = xt.unsqueeze(1) + torch.nn.functional.pad(pats, (L - W, 0)).unsqueeze(0)
            na = None if at is None else at.unsqueeze(1).expand(n, K, *at.shape[1:]).reshape(n * K, *at.shape[1:])
            zn = model.encoder(negs.reshape(n * K, N, L), na)[:, :, -1].reshape(n, K, -1)
            neg = sim(z_t.unsqueeze(1), zn, cfg.similarity).double().numpy()
    return scores_from_sims(neg, pos)


def anomaly_score(ckpt, segment: WindowSegment) -> float:
    """Score of the anchor at the end of ``segment`` under a frozen bank."""
    cfg = ckpt.cfg
    if segment.length < cfg.segment_length:
        raise InsufficientHistory(f"segment length {segment.length} < b + h = {cfg.segment_length}")
    data = segment.data[:, -cfg.segment_length :]
    x, _, _ = normalize_rows(data, cfg.epsilon)
    aux = None
    if ckpt.n_aux:
        aux = encode_time_attributes(segment.timestamps[-cfg.segment_length :])[None]
    return float(_score_batch(ckpt.model(), ckpt.bank, x[None], aux)[0])


def anchor_indices(length: int, segment_length: int, stride: int = 1) -> np.ndarray:
    return np.arange(segment_length - 1, length, stride)


def score_series(ckpt, frame: SeriesFrame, stride: int = 1, delta: Optional[float] = None) -> ScoreSeries:
    """Score every ``stride``-th timestamp that has ``b + h`` points of history.

    Each score only reads data at or before its timestamp.
    """
    if stride < 1:
        raise ValueError("stride must be >= 1")
    cfg = ckpt.cfg
    L = cfg.segment_length
    T = frame.length
    scores = np.full(T, np.nan)
    excluded = np.ones(T, dtype=bool)
    idx = anchor_indices(T, L, stride)
    if len(idx):
        windows = sliding_window_view(frame.values, L, axis=1)  # (N, T-L+1, L)
        aux_all = None
        if ckpt.n_aux:
            if frame.timestamps is None:
                raise ShapeMismatch("model was trained with time attributes but the frame has no timestamps")
            aux_all = encode_time_attributes(frame.timestamps)
        model, bank = ckpt.model(), ckpt.bank
        for c in range(0, len(idx), CHUNK):
            chunk = idx[c : c + CHUNK]
            padded = np.concatenate([chunk, np.repeat(chunk[-1:], CHUNK - len(chunk))])
            x, _, _ = normalize_rows(windows[:, padded - L + 1].transpose(1, 0, 2), cfg.epsilon)
            aux = None
            if aux_all is not None:
                aux = sliding_window_view(aux_all, L, axis=1)[:, padded - L + 1].transpose(1, 0, 2)
            s = _score_batch(model, bank, x, aux)
            scores[chunk] = s[: len(chunk)]
            excluded[chunk] = False
    if delta is None:
        delta = ckpt.delta
    return ScoreSeries(scores, excluded, delta)


def calibrate_threshold(scores, mode: str = "quantile", q: float = 0.95, targets=None) -> float:
    """Pick ``delta`` from calibration scores.

    ``quantile``: the lower empirical ``q``-quantile (unsupervised).
    ``best-f1``: the observed score maximizing F1 against ``targets``.
    """
    if isinstance(scores, ScoreSeries):
        keep = ~scores.excluded
        if targets is not None:
            targets = np.asarray(targets)[keep]
        scores = scores.scores[keep]
    scores = np.asarray(scores, dtype=np.float64)
    if scores.size == 0:
        raise EmptyScores("no calibration scores")
    if mode == "quantile":
        if not 0 < q <= 1:
            raise ValueError("q must be in (0, 1]")
        return float(np.quantile(scores, q, method="lower"))
    if mode == "best-f1":
        from .evaluation import best_f1_sweep

        if targets is None:
            raise MissingLabels("best-f1 calibration needs targets")
        return best_f1_sweep(scores, targets)[0]
    raise ValueError(f"unknown calibration mode {mode!r}")


@dataclass
class EarlyWarning:
    onset: int
    first_flag: Optional[int]
    lead: Optional[int]


def label_onsets(labels) -> np.ndarray:
    lab = np.asarray(labels).astype(bool)
    prev = np.concatenate([[False], lab[:-1]])
    return np.flatnonzero(lab & ~prev)


def early_warnings(series: ScoreSeries, labels, h: int, f: int) -> list[EarlyWarning]:
    """Earliest flag in ``[onset - h - f, onset)`` for every labelled anomaly onset.

    Onsets without a flag in that range produce no record.
    """
    if labels is None:
        raise MissingLabels("early warnings need labels")
    flags = series.flags
    out = []
    for onset in label_onsets(labels):
        lo = max(0, onset - h - f)
        hits = np.flatnonzero(flags[lo:onset])
        if hits.size:
            first = int(lo + hits[0])
            out.append(EarlyWarning(int(onset), first, int(onset - first)))
    return out


def write_scores_csv(series: ScoreSeries, path, header_note: str = "") -> Path:
    path = Path(path)
    flags = series.flags if series.delta is not None else np.zeros(len(series.scores), dtype=np.int8)
    with path.open("w", newline="", encoding="utf-8") as fh:
        fh.write(f"# delta={series.delta!r}{' ' + header_note if header_note else ''}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "score", "flag", "excluded"])
        for t, (s, fl, ex) in enumerate(zip(series.scores, flags, series.excluded)):
            w.writerow([t, "nan" if ex else repr(float(s)), int(fl), int(ex)])
    return path


def read_scores_csv(path) -> ScoreSeries:
    path = Path(path)
    delta = None
    rows = []
    with path.open(newline="", encoding="utf-8") as fh:
        for line in fh:
            if line.startswith("#"):
                for tok in line[1:].split():
                    if tok.startswith("delta="):
                        val = tok.split("=", 1)[1]
                        delta = None if val == "None" else float(val)
                continue
            rows.append(line)
    reader = csv.DictReader(rows)
    if reader.fieldnames != ["t", "score", "flag", "excluded"]:
        raise ValueError(f"{path}: unexpected columns {reader.fieldnames}")
    recs = list(reader)
    scores = np.array([float(r["score"]) for r in recs])
    excluded = np.array([r["excluded"] == "1" for r in recs], dtype=bool)
    return ScoreSeries(scores, excluded, delta)


def write_warnings_csv(warnings, path) -> Path:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["onset", "first_flag", "lead"])
        for rec in warnings:
            w.writerow([rec.onset, rec.first_flag, rec.lead])
    return path
