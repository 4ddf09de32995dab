"""Overlapping-window dilated TCN producing one representation per timestamp.

Every column of the output track summarises the pair of successive
sub-sequences ending at that timestamp, so a single causal pass over a
segment yields all anchor, positive and negative representations at once.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import torch
from torch import nn
from torch.nn import functional as F

from .diffusion import array_payload, init_uniform_fan_in
from .errors import ShapeMismatch

NORM_EPS = 1e-12


def n_layers(kernel: int, h: int) -> int:
    """Smallest ``L`` with ``kernel ** L >= 2 * (h + 1)``."""
    if kernel < 2:
        raise ValueError("kernel size must be >= 2")
    target = 2 * (h + 1)
    L, span = 0, 1
    while span < target:
        span *= kernel
        L += 1
    return max(L, 1)


class TCNBranch(nn.Module):
    """``L`` causal dilated convolutions with kernel ``k`` and dilation ``k**l``.

    Each layer computes ``y(t) = sum_i filter(i) x(t - k**l * i)`` with zero
    padding on the left. Unless ``plain`` is set, the layer output is
    ``x + relu(y)``; the plain variant is the bare linear recursion.
    """

    def __init__(self, d: int, kernel: int, layers: int, plain: bool = False):
        super().__init__()
        self.kernel = kernel
        self.plain = plain
        self.convs = nn.ModuleList(
            nn.Conv1d(d, d, kernel, dilation=kernel ** l) for l in range(layers)
        )

    @property
    def receptive_field(self) -> int:
        return self.kernel ** len(self.convs)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        for conv in self.convs:
            y = conv(F.pad(x, ((self.kernel - 1) * conv.dilation[0], 0)))
            x = y if self.plain else x + F.relu(y)
        return x


class ContextEncoder(nn.Module):
    def __init__(self, n_vars: int, n_aux: int, d: int, h: int, kernels: Sequence[int] = (2, 3),
                 plain_tcn: bool = False):
        super().__init__()
        self.n_vars, self.n_aux, self.d, self.h = n_vars, n_aux, d, h
        self.embedding = nn.Linear(n_vars + n_aux, d)
        self.branches = nn.ModuleList(TCNBranch(d, k, n_layers(k, h), plain_tcn) for k in kernels)
        init_uniform_fan_in(self)

    @property
    def receptive_field(self) -> int:
        return max(b.receptive_field for b in self.branches)

    def embed(self, x: torch.Tensor, aux: Optional[torch.Tensor] = None) -> torch.Tensor:
        """``relu(W_e concat(x_t, a_t) + bias)`` per column: ``(B, N, T) -> (B, d, T)``."""
        if x.shape[-2] != self.n_vars:
            raise ShapeMismatch(f"expected {self.n_vars} variables, got {x.shape[-2]}")
        if self.n_aux:
            if aux is None or aux.shape[-2] != self.n_aux:
                raise ShapeMismatch(f"expected {self.n_aux} auxiliary rows")
            if aux.shape[-1] != x.shape[-1]:
                raise ShapeMismatch("auxiliary width does not match segment width")
            aux = aux.to(x.dtype)
            if aux.dim() < x.dim():
                aux = aux.expand(*x.shape[:-2], *aux.shape[-2:])
            x = torch.cat([x, aux], dim=-2)
        elif aux is not None and aux.shape[-2] != 0:
            raise ShapeMismatch("encoder was built without auxiliary attributes")
        return F.relu(self.embedding(x.transpose(-1, -2))).transpose(-1, -2)

    def forward(self, x: torch.Tensor, aux: Optional[torch.Tensor] = None) -> torch.Tensor:
        squeeze = x.dim() == 2
        if squeeze:
            x = x.unsqueeze(0)
        v = self.embed(x, aux)
        pooled = sum(branch(v) for branch in self.branches) / len(self.branches)
        z = pooled / pooled.norm(dim=1, keepdim=True).clamp_min(NORM_EPS)
        return z[0] if squeeze else z


@dataclass
class RepresentationTrack:
    """``(d, L)`` representations and a mask of columns with a full receptive field."""

    data: torch.Tensor
    valid: np.ndarray


def encode_track(encoder: ContextEncoder, segment, aux=None) -> RepresentationTrack:
    data = array_payload(segment)
    param = next(encoder.parameters())
    x = torch.as_tensor(np.asarray(data) if isinstance(data, np.ndarray) else data).to(param.dtype)
    a = None
    if aux is not None:
        a = torch.as_tensor(np.asarray(aux) if isinstance(aux, np.ndarray) else aux).to(param.dtype)
    z = encoder(x, a)
    length = x.shape[-1]
    valid = np.arange(length) >= encoder.receptive_field - 1
    return RepresentationTrack(z, valid)
