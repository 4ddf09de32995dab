"""Precursor pattern generation by reverse denoising from Gaussian noise.

A small MLP predicts ``(mu, sigma)`` for every step and the pattern is
obtained with the reparameterized update

    x_{s-1} = (x_s - sqrt(beta_s) * (sigma_s * eps + mu_s)) / sqrt(1 - beta_s)

so gradients reach the MLP through ``mu`` and ``sigma`` while ``eps`` is
treated as a constant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Union

import numpy as np
import torch
from torch import nn
from torch.nn import functional as F

from .errors import BadRange, NonPositiveSigma, ShapeMismatch

SIGMA_FLOOR = 1e-6


@dataclass
class NoiseSchedule:
    betas: np.ndarray

    @property
    def steps(self) -> int:
        return len(self.betas)


def make_schedule(steps: int, beta_min: float, beta_max: float) -> NoiseSchedule:
    """Linear schedule from ``beta_min`` to ``beta_max`` over ``steps``."""
    if steps < 1:
        raise BadRange("need at least one diffusion step")
    if not 0.0 <= beta_min <= beta_max < 1.0:
        raise BadRange(f"need 0 <= beta_min <= beta_max < 1, got ({beta_min}, {beta_max})")
    if steps == 1:
        return NoiseSchedule(np.array([beta_min], dtype=np.float64))
    return NoiseSchedule(np.linspace(beta_min, beta_max, steps))


def init_uniform_fan_in(module: nn.Module):
    """Weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)), biases zero."""
    for m in module.modules():
        if isinstance(m, (nn.Linear, nn.Conv1d)):
            fan_in = m.weight[0].numel()
            bound = 1.0 / math.sqrt(fan_in)
            nn.init.uniform_(m.weight, -bound, bound)
            if m.bias is not None:
                nn.init.zeros_(m.bias)


class Denoiser(nn.Module):
    """MLP over ``concat(x_s, s / S, cond)`` with separate mu and sigma heads."""

    def __init__(self, window: int, hidden: Optional[int] = None, depth: int = 2):
        super().__init__()
        self.window = window
        hidden = hidden or 4 * window
        dims = [2 * window + 1] + [hidden] * depth
        self.hidden = nn.ModuleList(nn.Linear(a, b) for a, b in zip(dims[:-1], dims[1:]))
        self.mu_head = nn.Linear(dims[-1], window)
        self.sigma_head = nn.Linear(dims[-1], window)
        init_uniform_fan_in(self)

    def forward(self, x_s: torch.Tensor, step_frac: float, cond: torch.Tensor):
        if x_s.shape[-1] != self.window or cond.shape[-1] != self.window:
            raise ShapeMismatch(
                f"denoiser expects length {self.window}, got x_s {tuple(x_s.shape)} and cond {tuple(cond.shape)}"
            )
        s = torch.full((*x_s.shape[:-1], 1), float(step_frac), dtype=x_s.dtype)
        z = torch.cat([x_s, s, cond.to(x_s.dtype)], dim=-1)
        for layer in self.hidden:
            z = F.relu(layer(z))
        mu = self.mu_head(z)
        sigma = F.softplus(self.sigma_head(z)) + SIGMA_FLOOR
        return mu, sigma


def denoiser_forward(denoiser: Denoiser, x_s, s: int, cond, steps: int):
    """Evaluate the denoiser at step ``s`` (1-based) of ``steps``."""
    if not 1 <= s <= steps:
        raise BadRange(f"step {s} outside [1, {steps}]")
    return denoiser(torch.as_tensor(x_s), s / steps, torch.as_tensor(cond))


@dataclass
class PrecursorPattern:
    """A perturbation of length ``h + 1`` for variable ``var``."""

    var: int
    values: Union[np.ndarray, torch.Tensor]

    @property
    def length(self) -> int:
        return self.values.shape[-1]

    def detached(self) -> "PrecursorPattern":
        v = self.values
        if isinstance(v, torch.Tensor):
            v = v.detach().cpu().numpy().astype(np.float64)
        return PrecursorPattern(self.var, np.array(v, dtype=np.float64))


@dataclass
class DiffusionNoise:
    """Pre-drawn noise: the start state and one ``eps`` per step (index 0 is step S)."""

    x_start: torch.Tensor
    eps: list


def draw_noise(steps: int, shape, generator: Optional[torch.Generator] = None,
               dtype=torch.float64) -> DiffusionNoise:
    x = torch.randn(shape, generator=generator, dtype=dtype)
    eps = [torch.randn(shape, generator=generator, dtype=dtype) for _ in range(steps)]
    return DiffusionNoise(x, eps)


def reverse_sample_pattern(denoiser: Callable, schedule: NoiseSchedule, cond, var: int,
                           generator: Optional[torch.Generator] = None,
                           noise: Optional[DiffusionNoise] = None):
    """Run the reverse chain from ``x_S ~ N(0, I)`` down to ``x_0``.

    Returns the pattern and the list of per-step sigma tensors (ordered from
    step S down to step 1). ``cond`` may carry a leading batch dimension.
    """
    cond = torch.as_tensor(cond)
    dtype = cond.dtype if cond.is_floating_point() else torch.get_default_dtype()
    S = schedule.steps
    if noise is None:
        noise = draw_noise(S, tuple(cond.shape), generator, dtype)
    x = noise.x_start.to(dtype)
    sigmas = []
    for n, s in enumerate(range(S, 0, -1)):
        beta = float(schedule.betas[s - 1])
        mu, sigma = denoiser(x, s / S, cond)
        sigmas.append(sigma)
        x = (x - math.sqrt(beta) * (sigma * noise.eps[n].to(dtype) + mu)) / math.sqrt(1.0 - beta)
    return PrecursorPattern(var, x), sigmas


def variance_regularization(sigma_trace: Sequence) -> Union[torch.Tensor, float]:
    """Sum over steps of the mean of ``0.5 * (-log sigma^2 + sigma^2 - 1)``.

    This is ``KL(N(mu, sigma^2) || N(mu, 1))`` per entry. Accepts tensors
    (differentiable result) or arrays (float result).
    """
    if len(sigma_trace) == 0:
        return 0.0
    if all(isinstance(s, torch.Tensor) for s in sigma_trace):
        total = None
        for sigma in sigma_trace:
            if not bool(torch.all(sigma > 0)):
                raise NonPositiveSigma("sigma must be strictly positive")
            var = sigma * sigma
            term = 0.5 * (-torch.log(var) + var - 1.0).mean()
            total = term if total is None else total + term
        return total
    total = 0.0
    for sigma in sigma_trace:
        sigma = np.asarray(sigma, dtype=np.float64)
        if not np.all(sigma > 0):
            raise NonPositiveSigma("sigma must be strictly positive")
        var = sigma * sigma
        total += float(np.mean(0.5 * (-np.log(var) + var - 1.0)))
    return total


def array_payload(obj):
    """The raw array of a segment object, or ``obj`` itself if it already is one."""
    if isinstance(obj, (np.ndarray, torch.Tensor)):
        return obj
    return getattr(obj, "data", obj)


def inject_pattern(segment, pattern: PrecursorPattern):
    """Add ``pattern`` to variable ``pattern.var`` over the last window.

    ``segment`` is an ``(..., N, L)`` array or tensor (or a normalized
    segment object exposing ``.data``). Returns a new object; tensors keep
    their autograd history.
    """
    data = array_payload(segment)
    if isinstance(data, np.ndarray) and not isinstance(pattern.values, torch.Tensor):
        values = np.asarray(pattern.values)
    else:
        data = torch.as_tensor(data)
        values = torch.as_tensor(pattern.values).to(data.dtype)
    W = values.shape[-1]
    n_vars, length = data.shape[-2], data.shape[-1]
    if W > length:
        raise ShapeMismatch(f"pattern length {W} exceeds segment length {length}")
    if not 0 <= pattern.var < n_vars:
        raise ShapeMismatch(f"variable {pattern.var} outside [0, {n_vars})")
    if segment is not data and hasattr(segment, "h") and W != segment.h + 1:
        raise ShapeMismatch(f"pattern length {W} != window length {segment.h + 1}")
    if isinstance(data, np.ndarray):
        out = data.copy()
        out[..., pattern.var, length - W :] += values
        return out
    full = F.pad(values, (length - W, 0))
    onehot = torch.zeros(n_vars, 1, dtype=data.dtype)
    onehot[pattern.var] = 1.0
    return data + onehot * full.unsqueeze(-2)
