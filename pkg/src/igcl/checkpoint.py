"""Zip checkpoint: ``manifest.json`` plus one raw little-endian float32 buffer per tensor."""

from __future__ import annotations

import io
import json
import zipfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
import torch

from .config import TrainConfig
from .errors import CorruptCheckpoint, UnsupportedVersion
from .memory import MemoryBank, MemoryEntry
from .model import IGCLModel

FORMAT = "igcl-checkpoint"
VERSION = 1
_DTYPE = np.dtype("<f4")
_ZIP_DATE = (1980, 1, 1, 0, 0, 0)


@dataclass
class Checkpoint:
    """Everything needed to score new data: config, weights, bank, calibration."""

    cfg: TrainConfig
    n_vars: int
    n_aux: int
    params: dict
    bank: MemoryBank
    names: list = field(default_factory=list)
    calibration_scores: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=_DTYPE))
    delta: Optional[float] = None
    _model: Optional[IGCLModel] = field(default=None, repr=False, compare=False)

    @classmethod
    def from_model(cls, model: IGCLModel, bank: MemoryBank, names=None, calibration_scores=None,
                   delta=None) -> "Checkpoint":
        params = {k: v.detach().cpu().numpy().astype(_DTYPE) for k, v in model.state_dict().items()}
        bank = bank.snapshot()
        for e in bank.entries:
            e.pattern = e.pattern.astype(_DTYPE).astype(np.float64)
        scores = np.zeros(0) if calibration_scores is None else np.asarray(calibration_scores)
        return cls(model.cfg, model.n_vars, model.n_aux, params, bank, list(names or []),
                   scores.astype(_DTYPE), None if delta is None else float(delta))

    def model(self) -> IGCLModel:
        """Model in the stored float32 precision, built once and cached."""
        if self._model is None:
            m = IGCLModel(self.cfg.replace(dtype="float32"), self.n_vars, self.n_aux).to(torch.float32)
            m.load_state_dict({k: torch.from_numpy(np.array(v, dtype=np.float32)) for k, v in self.params.items()})
            m.eval()
            self._model = m
        return self._model

    def manifest(self) -> dict:
        tensors = [
            {"name": k, "file": f"params/{k}.bin", "shape": list(v.shape), "dtype": "<f4", "nbytes": int(v.size * 4)}
            for k, v in self.params.items()
        ]
        entries = [
            {"file": f"bank/entry_{j:04d}.bin", "shape": list(e.pattern.shape), "nbytes": int(e.pattern.size * 4),
             "importance": float(e.importance), "age": int(e.age)}
            for j, e in enumerate(self.bank.entries)
        ]
        return {
            "format": FORMAT,
            "version": VERSION,
            "config": self.cfg.to_dict(),
            "n_vars": self.n_vars,
            "n_aux": self.n_aux,
            "names": list(self.names),
            "normalization_epsilon": self.cfg.epsilon,
            "tensors": tensors,
            "bank": {"capacity": self.bank.capacity, "literal": self.bank.literal,
                     "inserted": self.bank.inserted, "entries": entries},
            "calibration": {"delta": self.delta, "quantile": self.cfg.calibration_quantile,
                            "file": "calibration/scores.bin", "shape": [int(self.calibration_scores.size)],
                            "nbytes": int(self.calibration_scores.size * 4)},
        }


def _buffer(arr) -> bytes:
    return np.ascontiguousarray(arr, dtype=_DTYPE).tobytes(order="C")


def save_checkpoint(ckpt: Checkpoint, path) -> Path:
    """Write ``ckpt``; identical checkpoints produce identical bytes."""
    path = Path(path)
    manifest = ckpt.manifest()
    files = [("manifest.json", json.dumps(manifest, indent=2, sort_keys=True).encode("utf-8"))]
    for t in manifest["tensors"]:
        files.append((t["file"], _buffer(ckpt.params[t["name"]])))
    for e, meta in zip(ckpt.bank.entries, manifest["bank"]["entries"]):
        files.append((meta["file"], _buffer(e.pattern)))
    files.append((manifest["calibration"]["file"], _buffer(ckpt.calibration_scores)))
    buf = io.BytesIO()
    with zipfile.ZipFile(buf, "w", zipfile.ZIP_STORED) as zf:
        for name, data in files:
            info = zipfile.ZipInfo(name, date_time=_ZIP_DATE)
            info.external_attr = 0o644 << 16
            zf.writestr(info, data)
    path.write_bytes(buf.getvalue())
    return path


def _read(zf: zipfile.ZipFile, name: str, shape, nbytes: int) -> np.ndarray:
    try:
        raw = zf.read(name)
    except KeyError:
        raise CorruptCheckpoint(f"missing buffer {name}") from None
    expected = int(np.prod(shape, dtype=np.int64)) * 4
    if len(raw) != nbytes or nbytes != expected:
        raise CorruptCheckpoint(f"buffer {name}: {len(raw)} bytes, manifest declares {nbytes} (shape needs {expected})")
    return np.frombuffer(raw, dtype=_DTYPE).reshape(shape).copy()


def load_checkpoint(path) -> Checkpoint:
    try:
        zf = zipfile.ZipFile(Path(path))
    except (zipfile.BadZipFile, OSError) as exc:
        raise CorruptCheckpoint(f"{path}: not a checkpoint archive ({exc})") from None
    with zf:
        try:
            manifest = json.loads(zf.read("manifest.json"))
        except KeyError:
            raise CorruptCheckpoint("manifest.json missing") from None
        except (json.JSONDecodeError, zipfile.BadZipFile) as exc:
            raise CorruptCheckpoint(f"unreadable manifest: {exc}") from None
        if manifest.get("format") != FORMAT:
            raise CorruptCheckpoint(f"unknown format {manifest.get('format')!r}")
        if manifest.get("version") != VERSION:
            raise UnsupportedVersion(f"checkpoint version {manifest.get('version')!r}, expected {VERSION}")
        try:
            cfg = TrainConfig.from_dict(manifest["config"])
            params = {t["name"]: _read(zf, t["file"], t["shape"], t["nbytes"]) for t in manifest["tensors"]}
            bm = manifest["bank"]
            bank = MemoryBank(bm["capacity"], bm["literal"], inserted=bm["inserted"])
            for e in bm["entries"]:
                pattern = _read(zf, e["file"], e["shape"], e["nbytes"]).astype(np.float64)
                bank.entries.append(MemoryEntry(pattern, e["importance"], e["age"]))
            cal = manifest["calibration"]
            scores = _read(zf, cal["file"], cal["shape"], cal["nbytes"])
        except (KeyError, TypeError) as exc:
            raise CorruptCheckpoint(f"malformed manifest: {exc}") from None
        except zipfile.BadZipFile as exc:
            raise CorruptCheckpoint(str(exc)) from None
    return Checkpoint(cfg, manifest["n_vars"], manifest["n_aux"], params, bank, manifest.get("names", []),
                      scores, cal["delta"])
