"""Similarities and the contrastive objective over temporal positives and generated negatives."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch

from .errors import InsufficientHistory, ShapeMismatch

SIM_KINDS = ("cosine", "negative-euclidean")
COS_EPS = 1e-12


@dataclass
class ObjectiveConfig:
    tau: float = 0.1
    n_pos: int = 3
    lam: float = 0.1
    similarity: str = "cosine"

    def __post_init__(self):
        if self.tau <= 0:
            raise ValueError("temperature must be positive")
        if self.n_pos < 1:
            raise ValueError("need at least one positive")
        if self.lam < 0:
            raise ValueError("regularization weight must be >= 0")
        if self.similarity not in SIM_KINDS:
            raise ValueError(f"unknown similarity {self.similarity!r}")


def sim(a, b, kind: str = "cosine"):
    """Similarity along the last axis, broadcasting leading axes. Higher = closer."""
    if a.shape[-1] != b.shape[-1]:
        raise ShapeMismatch(f"dimension mismatch: {a.shape[-1]} vs {b.shape[-1]}")
    if isinstance(a, torch.Tensor) or isinstance(b, torch.Tensor):
        a, b = torch.as_tensor(a), torch.as_tensor(b)
        if kind == "cosine":
            denom = (a.norm(dim=-1) * b.norm(dim=-1)).clamp_min(COS_EPS)
            return (a * b).sum(-1) / denom
        if kind == "negative-euclidean":
            return -torch.linalg.vector_norm(a - b, dim=-1)
    else:
        a, b = np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64)
        if kind == "cosine":
            denom = np.maximum(np.linalg.norm(a, axis=-1) * np.linalg.norm(b, axis=-1), COS_EPS)
            return np.sum(a * b, axis=-1) / denom
        if kind == "negative-euclidean":
            return -np.linalg.norm(a - b, axis=-1)
    raise ValueError(f"unknown similarity {kind!r}")


def similarity(a, b, kind: str = "cosine") -> float:
    """Scalar similarity of two vectors."""
    a, b = np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ShapeMismatch(f"expected two vectors of equal length, got {a.shape} and {b.shape}")
    return float(sim(a, b, kind))


def contrastive_loss(anchors, positives, negatives, tau: float = 0.1, kind: str = "cosine",
                     reduction: str = "sum"):
    """InfoNCE-style loss with several temporal positives and K + 1 negatives.

    Shapes: ``anchors (A, d)``, ``positives (A, P, d)``, ``negatives (A, K+1, d)``.
    Per anchor the loss is ``-log(sum_pos e^{s/tau} / (sum_neg e^{s/tau} + sum_pos e^{s/tau}))``,
    evaluated with log-sum-exp.
    """
    anchors, positives, negatives = (torch.as_tensor(x) for x in (anchors, positives, negatives))
    if positives.dim() != 3 or negatives.dim() != 3 or anchors.dim() != 2:
        raise ShapeMismatch("expected anchors (A, d), positives (A, P, d), negatives (A, K+1, d)")
    if not (anchors.shape[0] == positives.shape[0] == negatives.shape[0]):
        raise ShapeMismatch("anchor counts differ")
    pos = sim(anchors.unsqueeze(1), positives, kind) / tau
    neg = sim(anchors.unsqueeze(1), negatives, kind) / tau
    per_anchor = torch.logsumexp(torch.cat([neg, pos], dim=1), dim=1) - torch.logsumexp(pos, dim=1)
    if reduction == "none":
        return per_anchor
    if reduction == "mean":
        return per_anchor.mean()
    return per_anchor.sum()


def anchor_columns(length: int, h: int, n_pos: int) -> np.ndarray:
    """Indices of the last ``h + 1`` columns; each needs ``n_pos`` earlier columns."""
    first = length - h - 1
    if first - n_pos < 0:
        raise InsufficientHistory(
            f"segment of length {length} cannot give {n_pos} positives to the first of {h + 1} anchors"
        )
    return np.arange(first, length)


def gather_terms(clean: torch.Tensor, negatives: torch.Tensor, h: int, n_pos: int):
    """Pick anchor, positive and negative columns from encoded tracks.

    ``clean`` is ``(d, L)`` and ``negatives`` ``(M, d, L)``. Returns tensors
    shaped for :func:`contrastive_loss`.
    """
    L = clean.shape[-1]
    if negatives.shape[-1] != L or negatives.shape[-2] != clean.shape[-2]:
        raise ShapeMismatch("negative tracks do not match the clean track")
    idx = torch.as_tensor(anchor_columns(L, h, n_pos))
    anchors = clean[:, idx].T
    offsets = torch.arange(1, n_pos + 1)
    positives = clean[:, idx[:, None] - offsets[None, :]].permute(1, 2, 0)
    negs = negatives[:, :, idx].permute(2, 0, 1)
    return anchors, positives, negs


def total_loss(l_c, l_r, lam: float):
    return l_c + lam * l_r
