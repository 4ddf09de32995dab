"""Training/run configuration."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError
from .objective import SIM_KINDS

GENERATOR_SIGNALS = ("joint", "detached", "adversarial")


@dataclass
class TrainConfig:
    h: int = 16
    b: int = 40
    f: int = 16
    n_pos: int = 3
    bank_size: int = 16
    tau: float = 0.1
    lam: float = 0.1
    d: int = 32
    kernels: tuple = (2, 3)
    diffusion_steps: int = 20
    beta_min: float = 1e-4
    beta_max: float = 0.1
    lr: float = 1e-3
    epochs: int = 10
    steps_per_epoch: int = 0  # 0: one pass of non-overlapping segments
    batch_anchors: int = 1
    seed: int = 0
    similarity: str = "cosine"
    plain_tcn: bool = False
    store_literal_windows: bool = False
    epsilon: float = 1e-5
    grad_clip: float = 5.0
    calibration_quantile: float = 0.95
    calibration_stride: int = 5
    dtype: str = "float32"
    generator_signal: str = "detached"

    def __post_init__(self):
        self.kernels = tuple(int(k) for k in self.kernels)
        self.validate()

    def validate(self):
        def need(cond, name, msg):
            if not cond:
                raise ConfigError(f"{name}: {msg}", name)

        need(self.h >= 1, "h", "must be >= 1")
        need(self.f >= 1, "f", "must be >= 1")
        need(self.n_pos >= 1, "n_pos", "must be >= 1")
        need(self.b >= self.h + self.n_pos + 1, "b", "must be >= h + n_pos + 1")
        need(self.bank_size >= 0, "bank_size", "must be >= 0")
        need(self.tau > 0, "tau", "must be > 0")
        need(self.lam >= 0, "lam", "must be >= 0")
        need(self.d >= 1, "d", "must be >= 1")
        need(len(self.kernels) > 0 and all(k >= 2 for k in self.kernels), "kernels", "need sizes >= 2")
        need(self.diffusion_steps >= 1, "diffusion_steps", "must be >= 1")
        need(0 <= self.beta_min <= self.beta_max < 1, "beta_max", "need 0 <= beta_min <= beta_max < 1")
        need(self.lr > 0, "lr", "must be > 0")
        need(self.epochs >= 0, "epochs", "must be >= 0")
        need(self.steps_per_epoch >= 0, "steps_per_epoch", "must be >= 0")
        need(self.batch_anchors >= 1, "batch_anchors", "must be >= 1")
        need(self.similarity in SIM_KINDS, "similarity", f"must be one of {SIM_KINDS}")
        need(self.epsilon > 0, "epsilon", "must be > 0")
        need(self.grad_clip > 0, "grad_clip", "must be > 0")
        need(0 < self.calibration_quantile <= 1, "calibration_quantile", "must be in (0, 1]")
        need(self.calibration_stride >= 1, "calibration_stride", "must be >= 1")
        need(self.dtype in ("float32", "float64"), "dtype", "must be float32 or float64")
        need(self.generator_signal in GENERATOR_SIGNALS, "generator_signal", f"must be one of {GENERATOR_SIGNALS}")

    @property
    def window(self) -> int:
        return self.h + 1

    @property
    def segment_length(self) -> int:
        return self.b + self.h

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["kernels"] = list(self.kernels)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        names = {f.name: f for f in dataclasses.fields(cls)}
        for key, value in d.items():
            if key not in names:
                raise ConfigError(f"{key}: unknown configuration key", key)
            default = names[key].default
            if isinstance(default, bool):
                ok = isinstance(value, bool)
            elif isinstance(default, int):
                ok = isinstance(value, int) and not isinstance(value, bool)
            elif isinstance(default, float):
                ok = isinstance(value, (int, float)) and not isinstance(value, bool)
            elif isinstance(default, tuple):
                ok = isinstance(value, (list, tuple)) and all(isinstance(k, int) for k in value)
            else:
                ok = isinstance(value, type(default))
            if not ok:
                raise ConfigError(f"{key}: bad value {value!r}", key)
        return cls(**d)

    def replace(self, **changes) -> "TrainConfig":
        return dataclasses.replace(self, **changes)


RUN_PATH_KEYS = ("data", "out")


def load_run_config(path) -> tuple[TrainConfig, dict]:
    """Read a run JSON: training keys plus optional path keys (``data``, ``out``)."""
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    paths = {k: doc.pop(k) for k in RUN_PATH_KEYS if k in doc}
    return TrainConfig.from_dict(doc), paths
