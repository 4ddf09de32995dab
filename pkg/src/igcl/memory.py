"""Importance-scored memory bank of accumulated precursor perturbations."""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import torch

from .diffusion import PrecursorPattern, array_payload, inject_pattern
from .errors import ShapeMismatch
from .objective import sim


@dataclass
class MemoryEntry:
    """An ``(N, W)`` perturbation added to the last ``W`` columns of a segment.

    In literal mode ``pattern`` is a whole stored negative segment instead.
    """

    pattern: np.ndarray
    importance: float = 0.0
    age: int = -1

    def support(self) -> set:
        return set(np.flatnonzero(np.any(self.pattern != 0, axis=1)).tolist())


@dataclass
class MemoryBank:
    capacity: int
    literal: bool = False
    entries: list = field(default_factory=list)
    inserted: int = 0

    def __post_init__(self):
        if self.capacity < 0:
            raise ValueError("capacity must be >= 0")

    def __len__(self):
        return len(self.entries)

    @property
    def importances(self) -> np.ndarray:
        return np.array([e.importance for e in self.entries], dtype=np.float64)

    def snapshot(self) -> "MemoryBank":
        return copy.deepcopy(self)

    def stacked(self) -> np.ndarray:
        if not self.entries:
            return np.zeros((0, 0, 0))
        return np.stack([e.pattern for e in self.entries])

    def broadcast_inject(self, pattern: PrecursorPattern):
        """Add ``pattern`` to every stored entry on variable ``pattern.var``."""
        values = pattern.detached().values
        W = values.shape[-1]
        for e in self.entries:
            if e.pattern.shape[-1] < W or not 0 <= pattern.var < e.pattern.shape[0]:
                raise ShapeMismatch(f"pattern of length {W} on var {pattern.var} does not fit entry {e.pattern.shape}")
            e.pattern[pattern.var, e.pattern.shape[-1] - W :] += values
        return self

    def negative_windows(self, segment, current: Optional[PrecursorPattern] = None):
        """Negatives for ``segment`` (an ``(N, L)`` array or tensor).

        Row 0 holds the segment with ``current`` injected (omitted when
        ``current`` is None); row ``j`` holds the segment plus stored entry
        ``j`` (or the stored window itself in literal mode).
        """
        data = array_payload(segment)
        is_tensor = isinstance(data, torch.Tensor)
        N, L = data.shape[-2], data.shape[-1]
        rows = []
        if current is not None:
            rows.append(inject_pattern(data, current))
        for e in self.entries:
            W = e.pattern.shape[-1]
            if e.pattern.shape[0] != N or W > L or (self.literal and W != L):
                raise ShapeMismatch(f"entry {e.pattern.shape} does not fit segment ({N}, {L})")
            if self.literal:
                rows.append(torch.as_tensor(e.pattern, dtype=data.dtype) if is_tensor else e.pattern.copy())
                continue
            if is_tensor:
                pat = torch.as_tensor(e.pattern, dtype=data.dtype)
                rows.append(data + torch.nn.functional.pad(pat, (L - W, 0)))
            else:
                out = np.array(data, dtype=np.float64, copy=True)
                out[:, L - W :] += e.pattern
                rows.append(out)
        if not rows:
            return data.new_zeros((0, N, L)) if is_tensor else np.zeros((0, N, L))
        return torch.stack(rows) if is_tensor else np.stack(rows)

    def update_importance(self, anchor_reps, negative_reps, kind: str = "cosine") -> np.ndarray:
        """Set ``I_j = sum_i Sim(z+_i, z-_{i,j})`` for every entry.

        ``anchor_reps`` is ``(A, d)`` and ``negative_reps`` ``(len(bank), A, d)``.
        """
        scores = importance_scores(anchor_reps, negative_reps, kind)
        if len(scores) != len(self.entries):
            raise ShapeMismatch(f"{len(scores)} scores for {len(self.entries)} entries")
        for e, s in zip(self.entries, scores):
            e.importance = float(s)
        return scores

    def insert_and_evict(self, entry: MemoryEntry) -> Optional[MemoryEntry]:
        """Append ``entry``; once over capacity drop the least important one.

        Ties go to the oldest entry. Returns the evicted entry, if any.
        """
        entry.age = self.inserted
        self.inserted += 1
        self.entries.append(entry)
        if len(self.entries) <= self.capacity:
            return None
        victim = min(range(len(self.entries)), key=lambda j: (self.entries[j].importance, self.entries[j].age))
        return self.entries.pop(victim)


def importance_scores(anchor_reps, negative_reps, kind: str = "cosine") -> np.ndarray:
    a = anchor_reps.detach().double().numpy() if isinstance(anchor_reps, torch.Tensor) else np.asarray(anchor_reps, dtype=np.float64)
    n = negative_reps.detach().double().numpy() if isinstance(negative_reps, torch.Tensor) else np.asarray(negative_reps, dtype=np.float64)
    if n.ndim != 3 or n.shape[1:] != a.shape:
        raise ShapeMismatch(f"negative reps {n.shape} do not match anchors {a.shape}")
    return sim(a[None], n, kind).sum(axis=1)
