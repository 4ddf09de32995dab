"""Pointwise P/R/F1 and ROC-AUC against future-anomaly targets.

No point adjustment is applied anywhere: every timestamp is judged on its
own flag and target.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np
from scipy.stats import rankdata

from .errors import LengthMismatch, SingleClass
from .series import EXCLUDED


def _keep(*arrays):
    """Mask of positions where no array is EXCLUDED or NaN."""
    keep = np.ones(len(arrays[0]), dtype=bool)
    for a in arrays:
        a = np.asarray(a, dtype=np.float64)
        keep &= (a != EXCLUDED) & ~np.isnan(a)
    return keep


def _keep_scored(scores, targets):
    """Scores are real-valued, so only NaN marks them as missing."""
    return ~np.isnan(np.asarray(scores, dtype=np.float64)) & _keep(targets)


def confusion_counts(flags, targets) -> tuple[int, int, int, int]:
    """``(TP, FP, FN, TN)`` skipping positions EXCLUDED in either input."""
    flags, targets = np.asarray(flags), np.asarray(targets)
    if flags.shape != targets.shape:
        raise LengthMismatch(f"{flags.shape} flags vs {targets.shape} targets")
    keep = _keep(flags, targets)
    f, t = flags[keep].astype(bool), targets[keep].astype(bool)
    tp = int(np.sum(f & t))
    fp = int(np.sum(f & ~t))
    fn = int(np.sum(~f & t))
    tn = int(np.sum(~f & ~t))
    return tp, fp, fn, tn


def precision_recall_f1(counts) -> tuple[float, float, float]:
    tp, fp, fn = counts[0], counts[1], counts[2]
    p = tp / (tp + fp) if tp + fp else 0.0
    r = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * tp / (2 * tp + fp + fn) if tp else 0.0
    return p, r, f1


def _scored(scores, targets):
    scores, targets = np.asarray(scores, dtype=np.float64), np.asarray(targets)
    if scores.shape != targets.shape:
        raise LengthMismatch(f"{scores.shape} scores vs {targets.shape} targets")
    keep = _keep_scored(scores, targets)
    s, t = scores[keep], targets[keep].astype(bool)
    if t.all() or not t.any():
        raise SingleClass("targets need both classes")
    return s, t


def roc_auc(scores, targets) -> float:
    """Probability that a random positive outranks a random negative (ties count 1/2)."""
    s, t = _scored(scores, targets)
    ranks = rankdata(s)
    n_pos, n_neg = int(t.sum()), int((~t).sum())
    return float((ranks[t].sum() - n_pos * (n_pos + 1) / 2) / (n_pos * n_neg))


def best_f1_sweep(scores, targets) -> tuple[float, float]:
    """Exact F1 maximization over thresholds at the observed scores (and +inf).

    A timestamp is flagged when ``score >= delta``; ties in F1 resolve to the
    smallest threshold.
    """
    s, t = _scored(scores, targets)
    order = np.argsort(-s, kind="stable")
    s_sorted, t_sorted = s[order], t[order]
    tp = np.cumsum(t_sorted)
    fp = np.cumsum(~t_sorted)
    # last index of each run of equal scores: flagging at that score flags the whole run
    last = np.flatnonzero(np.r_[s_sorted[1:] != s_sorted[:-1], True])
    n_pos = int(t.sum())
    tp_c, fp_c = tp[last], fp[last]
    f1 = 2 * tp_c / (tp_c + fp_c + n_pos)
    thresholds = s_sorted[last]
    best = f1.max()
    if best <= 0:
        return float(np.inf), 0.0
    cand = thresholds[f1 == best]
    return float(cand.min()), float(best)


@dataclass
class EvalReport:
    precision: float
    recall: float
    f1: float
    roc_auc: Optional[float]
    delta: Optional[float]
    tp: int
    fp: int
    fn: int
    tn: int
    excluded: int
    best_f1: Optional[float] = None
    best_delta: Optional[float] = None
    best_precision: Optional[float] = None
    best_recall: Optional[float] = None
    config: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = asdict(self)
        return {
            "fixed_delta": {k: d[k] for k in ("delta", "precision", "recall", "f1", "tp", "fp", "fn", "tn")},
            "best_f1": {"delta": self.best_delta, "f1": self.best_f1, "precision": self.best_precision,
                        "recall": self.best_recall},
            "roc_auc": self.roc_auc,
            "excluded": self.excluded,
            "config": self.config,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, default=_json_default)

    def to_table(self) -> str:
        def fmt(v):
            return "-" if v is None else f"{v:.4f}" if isinstance(v, float) else str(v)

        rows = [
            ("block", "delta", "precision", "recall", "f1"),
            ("fixed", fmt(self.delta), fmt(self.precision), fmt(self.recall), fmt(self.f1)),
            ("best-f1", fmt(self.best_delta), fmt(self.best_precision), fmt(self.best_recall), fmt(self.best_f1)),
        ]
        widths = [max(len(r[i]) for r in rows) for i in range(5)]
        lines = ["  ".join(c.ljust(w) for c, w in zip(r, widths)) for r in rows]
        lines.append(f"roc_auc={fmt(self.roc_auc)}  TP={self.tp} FP={self.fp} FN={self.fn} TN={self.tn}"
                     f"  excluded={self.excluded}")
        return "\n".join(lines)


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    raise TypeError(type(o))


def evaluate(scores, targets, delta: Optional[float], config: Optional[dict] = None) -> EvalReport:
    """Full report: fixed-``delta`` block, best-F1 block and ROC-AUC."""
    scores = np.asarray(scores, dtype=np.float64)
    targets = np.asarray(targets)
    keep = _keep_scored(scores, targets)
    excluded = int((~keep).sum())
    if delta is None:
        flags = np.full(len(scores), EXCLUDED)
        flags[keep] = 0
        counts = (0, 0, int(targets[keep].sum()), int((targets[keep] == 0).sum()))
    else:
        flags = np.where(keep, scores >= delta, EXCLUDED)
        counts = confusion_counts(flags, np.where(keep, targets, EXCLUDED))
    p, r, f1 = precision_recall_f1(counts)
    try:
        auc = roc_auc(scores, targets)
        best_delta, best = best_f1_sweep(scores, targets)
        bflags = np.where(keep, scores >= best_delta, EXCLUDED)
        bp, br, _ = precision_recall_f1(confusion_counts(bflags, np.where(keep, targets, EXCLUDED)))
    except SingleClass:
        auc = best_delta = best = bp = br = None
    return EvalReport(p, r, f1, auc, delta, *counts, excluded, best, best_delta, bp, br, dict(config or {}))
