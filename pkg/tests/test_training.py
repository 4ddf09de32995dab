import json
import zipfile

import numpy as np
import pytest
import torch

from igcl.checkpoint import load_checkpoint, save_checkpoint
from igcl.config import TrainConfig, load_run_config
from igcl.errors import ConfigError, CorruptCheckpoint, NonFiniteLoss, UnsupportedVersion
from igcl.scoring import score_series
from igcl.series import make_segment
from igcl.training import fit, init_state, to_checkpoint, train, train_step


def test_config_validation():
    with pytest.raises(ConfigError) as info:
        TrainConfig(h=16, b=10)
    assert info.value.field == "b"
    with pytest.raises(ConfigError) as info:
        TrainConfig.from_dict({"h": 4, "bogus": 1})
    assert info.value.field == "bogus"
    with pytest.raises(ConfigError):
        TrainConfig.from_dict({"epochs": "ten"})
    cfg = TrainConfig.from_dict(TrainConfig(h=8, kernels=(2,)).to_dict())
    assert cfg.h == 8 and cfg.kernels == (2,)


def test_run_config_paths(tmp_path):
    p = tmp_path / "run.json"
    p.write_text(json.dumps({"h": 4, "b": 12, "data": "x.csv", "out": "m.ckpt"}))
    cfg, paths = load_run_config(p)
    assert cfg.h == 4 and paths == {"data": "x.csv", "out": "m.ckpt"}


def test_train_step_updates_and_fills_bank(tiny_cfg, small_frame):
    state = init_state(tiny_cfg, small_frame.n_vars, 4)
    before = {k: v.clone() for k, v in state.model.state_dict().items()}
    segs = [make_segment(small_frame, 100, tiny_cfg.h, tiny_cfg.b)]
    for i in range(4):
        rec = train_step(state, segs)
        assert np.isfinite(rec["loss"])
        assert rec["bank_fill"] == min(i + 1, tiny_cfg.bank_size)
    after = state.model.state_dict()
    assert any(not torch.equal(before[k], after[k]) for k in before)
    assert state.history[-1]["evicted_importance"] is not None


@pytest.mark.parametrize("signal", ["joint", "detached", "adversarial"])
def test_generator_signals_run(tiny_cfg, small_frame, signal):
    # with lam = 0 a detached generator receives no gradient at all
    state = init_state(tiny_cfg.replace(generator_signal=signal, lam=0.0), small_frame.n_vars, 4)
    den0 = [p.clone() for p in state.model.denoiser.mu_head.parameters()]
    train_step(state, make_segment(small_frame, 100, tiny_cfg.h, tiny_cfg.b))
    moved = any(not torch.equal(a, b) for a, b in zip(den0, state.model.denoiser.mu_head.parameters()))
    assert moved == (signal != "detached")


def test_literal_bank_and_batches(tiny_cfg, small_frame):
    cfg = tiny_cfg.replace(store_literal_windows=True, batch_anchors=3)
    st = fit(small_frame, cfg)
    assert all(e.pattern.shape == (3, cfg.segment_length) for e in st.bank.entries)


def test_nonfinite_loss_raises(tiny_cfg, small_frame):
    state = init_state(tiny_cfg, small_frame.n_vars, 4)
    with torch.no_grad():
        state.model.encoder.embedding.weight.fill_(float("nan"))
    with pytest.raises(NonFiniteLoss) as info:
        train_step(state, make_segment(small_frame, 100, tiny_cfg.h, tiny_cfg.b))
    assert "l_c" in info.value.diagnostics


def test_zero_epochs_gives_init_checkpoint(tiny_cfg, small_frame):
    ckpt = train(small_frame, tiny_cfg.replace(epochs=0))
    assert len(ckpt.bank) == 0 and ckpt.delta is not None


def test_checkpoint_roundtrip_and_bytes(tmp_path, tiny_cfg, small_frame):
    ckpt = train(small_frame, tiny_cfg)
    a = save_checkpoint(ckpt, tmp_path / "a.ckpt")
    loaded = load_checkpoint(a)
    b = save_checkpoint(loaded, tmp_path / "b.ckpt")
    assert a.read_bytes() == b.read_bytes()
    assert loaded.cfg == ckpt.cfg and loaded.delta == ckpt.delta
    np.testing.assert_array_equal(score_series(loaded, small_frame).scores, score_series(ckpt, small_frame).scores)


def test_checkpoint_is_bit_reproducible(tmp_path, tiny_cfg, small_frame):
    a = save_checkpoint(train(small_frame, tiny_cfg), tmp_path / "a.ckpt")
    b = save_checkpoint(train(small_frame, tiny_cfg), tmp_path / "b.ckpt")
    assert a.read_bytes() == b.read_bytes()


def _rewrite(src, dst, edit):
    with zipfile.ZipFile(src) as zin, zipfile.ZipFile(dst, "w") as zout:
        for item in zin.infolist():
            data = zin.read(item.filename)
            zout.writestr(item, edit(item.filename, data))


def test_checkpoint_errors(tmp_path, tiny_cfg, small_frame):
    path = save_checkpoint(train(small_frame, tiny_cfg.replace(epochs=0)), tmp_path / "m.ckpt")

    def bump(name, data):
        if name != "manifest.json":
            return data
        m = json.loads(data)
        m["version"] = 99
        return json.dumps(m).encode()

    _rewrite(path, tmp_path / "v.ckpt", bump)
    with pytest.raises(UnsupportedVersion):
        load_checkpoint(tmp_path / "v.ckpt")
    _rewrite(path, tmp_path / "t.ckpt", lambda n, d: d[:-4] if n.startswith("params/") else d)
    with pytest.raises(CorruptCheckpoint):
        load_checkpoint(tmp_path / "t.ckpt")
    (tmp_path / "junk.ckpt").write_bytes(b"not a zip")
    with pytest.raises(CorruptCheckpoint):
        load_checkpoint(tmp_path / "junk.ckpt")


def test_stored_config_wins(tmp_path, tiny_cfg, small_frame):
    path = save_checkpoint(train(small_frame, tiny_cfg.replace(epochs=0, h=5, b=13)), tmp_path / "m.ckpt")
    assert load_checkpoint(path).cfg.h == 5
