"""The joint generator + encoder module and the per-segment objective."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
import torch
from torch import nn

from .config import TrainConfig
from .diffusion import Denoiser, DiffusionNoise, PrecursorPattern, make_schedule, reverse_sample_pattern, variance_regularization
from .encoder import ContextEncoder
from .memory import MemoryBank
from .objective import contrastive_loss, gather_terms, total_loss

DTYPES = {"float32": torch.float32, "float64": torch.float64}


class IGCLModel(nn.Module):
    def __init__(self, cfg: TrainConfig, n_vars: int, n_aux: int = 0):
        super().__init__()
        self.cfg = cfg
        self.n_vars, self.n_aux = n_vars, n_aux
        self.encoder = ContextEncoder(n_vars, n_aux, cfg.d, cfg.h, cfg.kernels, cfg.plain_tcn)
        self.denoiser = Denoiser(cfg.window)
        self.schedule = make_schedule(cfg.diffusion_steps, cfg.beta_min, cfg.beta_max)

    @classmethod
    def initialize(cls, cfg: TrainConfig, n_vars: int, n_aux: int = 0, seed: Optional[int] = None):
        """Build with a private RNG so global torch state is untouched."""
        with torch.random.fork_rng():
            torch.manual_seed(cfg.seed if seed is None else seed)
            model = cls(cfg, n_vars, n_aux)
        return model.to(DTYPES[cfg.dtype])

    @property
    def dtype(self):
        return next(self.parameters()).dtype


@dataclass
class ObjectiveResult:
    loss: torch.Tensor
    l_c: torch.Tensor
    l_r: torch.Tensor
    pattern: torch.Tensor
    sigmas: list
    z: torch.Tensor


def segment_objective(model: IGCLModel, x: torch.Tensor, aux: Optional[torch.Tensor], var: int,
                      noise: DiffusionNoise, bank: MemoryBank, cfg: Optional[TrainConfig] = None) -> ObjectiveResult:
    """``L = L_c + lam * L_r`` averaged over a batch of normalized segments.

    ``x`` is ``(B, N, L)``; one pattern is generated per segment for variable
    ``var``, conditioned on that segment's last window of ``var``. Negatives
    are the current pattern plus every bank entry.
    """
    cfg = cfg or model.cfg
    B, N, L = x.shape
    W = cfg.window
    cond = x[:, var, L - W :]
    pattern, sigmas = reverse_sample_pattern(model.denoiser, model.schedule, cond, var, noise=noise)
    raw = pattern.values
    if cfg.generator_signal == "detached":
        pattern = PrecursorPattern(var, raw.detach())
    elif cfg.generator_signal == "adversarial":
        pattern = PrecursorPattern(var, _reverse_grad(raw))
    l_c = 0.0
    zs = []
    for k in range(B):
        negs = bank.negative_windows(x[k], PrecursorPattern(var, pattern.values[k]))
        batch = torch.cat([x[k : k + 1], negs])
        a = None if aux is None else aux[k]
        z = model.encoder(batch, a)
        anchors, pos, neg = gather_terms(z[0], z[1:], cfg.h, cfg.n_pos)
        l_c = l_c + contrastive_loss(anchors, pos, neg, cfg.tau, cfg.similarity)
        zs.append(z)
    l_c = l_c / B
    l_r = variance_regularization(sigmas)
    return ObjectiveResult(total_loss(l_c, l_r, cfg.lam), l_c, l_r, raw, sigmas, torch.stack(zs))


def segment_tensors(model: IGCLModel, data: np.ndarray, aux: Optional[np.ndarray]):
    x = torch.as_tensor(np.asarray(data), dtype=model.dtype)
    a = None if aux is None or model.n_aux == 0 else torch.as_tensor(np.asarray(aux), dtype=model.dtype)
    return x, a


class _GradReverse(torch.autograd.Function):
    @staticmethod
    def forward(ctx, x):
        return x.view_as(x)

    @staticmethod
    def backward(ctx, g):
        return -g


def _reverse_grad(x: torch.Tensor) -> torch.Tensor:
    return _GradReverse.apply(x)
