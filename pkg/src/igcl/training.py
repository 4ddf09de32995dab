"""Joint optimization of the precursor generator and the context encoder."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import torch

from .checkpoint import Checkpoint
from .config import TrainConfig
from .diffusion import PrecursorPattern, draw_noise
from .errors import NonFiniteLoss
from .memory import MemoryBank, MemoryEntry, importance_scores
from .model import IGCLModel, segment_objective
from .objective import anchor_columns
from .scoring import calibrate_threshold, score_series
from .series import SeriesFrame, WindowSegment, encode_time_attributes, instance_normalize, make_segment

log = logging.getLogger(__name__)


@dataclass
class TrainState:
    model: IGCLModel
    bank: MemoryBank
    optimizer: torch.optim.Optimizer
    rng: np.random.Generator
    noise_gen: torch.Generator
    step: int = 0
    history: list = field(default_factory=list)

    @property
    def cfg(self) -> TrainConfig:
        return self.model.cfg


def init_state(cfg: TrainConfig, n_vars: int, n_aux: int) -> TrainState:
    model = IGCLModel.initialize(cfg, n_vars, n_aux)
    optimizer = torch.optim.Adam(model.parameters(), lr=cfg.lr)
    noise_gen = torch.Generator().manual_seed(cfg.seed + 1)
    return TrainState(model, MemoryBank(cfg.bank_size, cfg.store_literal_windows), optimizer,
                      np.random.default_rng(cfg.seed), noise_gen)


def _prepare(state: TrainState, segments: list[WindowSegment]):
    cfg = state.cfg
    data = np.stack([instance_normalize(s, cfg.epsilon).data for s in segments])
    x = torch.as_tensor(data, dtype=state.model.dtype)
    aux = None
    if state.model.n_aux:
        aux = torch.as_tensor(np.stack([encode_time_attributes(s.timestamps) for s in segments]),
                              dtype=state.model.dtype)
    return x, aux


def train_step(state: TrainState, segments, var: Optional[int] = None) -> dict:
    """One optimization step followed by memory-bank maintenance.

    Order: normalize, pick a variable, generate a pattern, build negatives
    from it and the bank, encode, compute ``L_c + lam * L_r``, take an Adam
    step, inject the pattern into the bank, rescore importances with the
    updated encoder, then insert the new candidate and evict the weakest.
    """
    if isinstance(segments, WindowSegment):
        segments = [segments]
    cfg = state.cfg
    model, bank = state.model, state.bank
    x, aux = _prepare(state, segments)
    B, N, L = x.shape
    if var is None:
        var = int(state.rng.integers(N))
    noise = draw_noise(cfg.diffusion_steps, (B, cfg.window), state.noise_gen, model.dtype)

    model.train()
    state.optimizer.zero_grad(set_to_none=True)
    res = segment_objective(model, x, aux, var, noise, bank)
    if not torch.isfinite(res.loss):
        raise NonFiniteLoss(
            f"non-finite loss at step {state.step}",
            {"step": state.step, "l_c": float(res.l_c.detach()), "l_r": float(res.l_r.detach()), "var": var,
             "bank_fill": len(bank)},
        )
    res.loss.backward()
    torch.nn.utils.clip_grad_norm_(model.parameters(), cfg.grad_clip)
    state.optimizer.step()

    pattern = PrecursorPattern(var, res.pattern[0].detach().double().numpy())
    bank.broadcast_inject(pattern)
    if bank.literal:
        candidate = bank.negative_windows(x[0].detach().double().numpy(), pattern)[0]
    else:
        candidate = np.zeros((N, cfg.window))
        candidate[var] = pattern.values
    entry = MemoryEntry(candidate)
    scores = _rescore(model, bank, entry, x, aux)
    for e, s in zip(bank.entries, scores[:-1]):
        e.importance = float(s)
    entry.importance = float(scores[-1])
    evicted = bank.insert_and_evict(entry)

    state.step += 1
    rec = {
        "step": state.step,
        "var": var,
        "l_c": float(res.l_c.detach()),
        "l_r": float(res.l_r.detach()),
        "loss": float(res.loss.detach()),
        "evicted_importance": None if evicted is None else evicted.importance,
        "bank_fill": len(bank),
    }
    state.history.append(rec)
    return rec


def _rescore(model: IGCLModel, bank: MemoryBank, candidate: MemoryEntry, x, aux) -> np.ndarray:
    """Importance of every bank entry plus ``candidate`` under the current encoder.

    With several segments per step the per-segment scores are averaged.
    """
    cfg = model.cfg
    probe = MemoryBank(bank.capacity + 1, bank.literal, entries=list(bank.entries) + [candidate])
    B = x.shape[0]
    total = np.zeros(len(probe))
    model.eval()
    with torch.no_grad():
        for k in range(B):
            xk = x[k].detach()
            negs = probe.negative_windows(xk)
            z = model.encoder(torch.cat([xk[None], negs]), None if aux is None else aux[k])
            idx = torch.as_tensor(anchor_columns(z.shape[-1], cfg.h, cfg.n_pos))
            anchors = z[0][:, idx].T
            neg = z[1:][:, :, idx].transpose(1, 2)
            total += importance_scores(anchors, neg, cfg.similarity)
    return total / B


def steps_per_epoch(cfg: TrainConfig, length: int) -> int:
    """Explicit ``steps_per_epoch`` or enough steps to draw ``length // (b + h)`` segments."""
    if cfg.steps_per_epoch:
        return cfg.steps_per_epoch
    return max(1, (length // cfg.segment_length) // cfg.batch_anchors)


def fit(frame: SeriesFrame, cfg: TrainConfig, progress: Optional[Callable[[int, dict], None]] = None) -> TrainState:
    """Train on ``frame`` (labels, if any, are ignored)."""
    L = cfg.segment_length
    if frame.length < L:
        raise ValueError(f"training series of length {frame.length} is shorter than b + h = {L}")
    n_aux = 0 if frame.timestamps is None else 4
    state = init_state(cfg, frame.n_vars, n_aux)
    frame = SeriesFrame(frame.values, frame.timestamps, None, list(frame.names))
    n_steps = steps_per_epoch(cfg, frame.length)
    for epoch in range(cfg.epochs):
        recs = []
        for _ in range(n_steps):
            anchors = state.rng.integers(L - 1, frame.length, size=cfg.batch_anchors)
            segs = [make_segment(frame, int(t), cfg.h, cfg.b) for t in anchors]
            recs.append(train_step(state, segs))
        summary = {
            "epoch": epoch + 1,
            "l_c": float(np.mean([r["l_c"] for r in recs])),
            "l_r": float(np.mean([r["l_r"] for r in recs])),
            "loss": float(np.mean([r["loss"] for r in recs])),
            "bank_fill": len(state.bank),
        }
        log.info("epoch %(epoch)d  L_c=%(l_c).4f  L_r=%(l_r).4f  bank=%(bank_fill)d", summary)
        if progress is not None:
            progress(epoch + 1, summary)
    return state


def to_checkpoint(state: TrainState, frame: SeriesFrame) -> Checkpoint:
    """Freeze the state and calibrate the default threshold on ``frame``."""
    cfg = state.cfg
    ckpt = Checkpoint.from_model(state.model, state.bank, frame.names)
    scores = score_series(ckpt, frame.without_labels(), stride=cfg.calibration_stride)
    valid = scores.valid_scores
    if valid.size:
        ckpt.calibration_scores = valid.astype(np.float32)
        ckpt.delta = calibrate_threshold(ckpt.calibration_scores.astype(np.float64), "quantile",
                                         cfg.calibration_quantile)
    return ckpt


def train(frame: SeriesFrame, cfg: TrainConfig, progress=None) -> Checkpoint:
    frame = frame.without_labels()
    return to_checkpoint(fit(frame, cfg, progress), frame)
