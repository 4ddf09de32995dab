import numpy as np
import pytest
import torch

from igcl.config import TrainConfig
from igcl.synth import generate_normal_series


@pytest.fixture
def tiny_cfg():
    return TrainConfig(h=4, b=12, f=4, n_pos=3, bank_size=2, d=8, kernels=(2,), diffusion_steps=3,
                       epochs=1, steps_per_epoch=5, calibration_stride=3)


@pytest.fixture
def small_frame():
    return generate_normal_series(3, 400, seed=7)


@pytest.fixture(autouse=True)
def _seed_torch():
    torch.manual_seed(0)
    np.random.seed(0)


ACCEPTANCE = {}


@pytest.fixture
def criterion():
    """Record one pass/fail line per acceptance criterion."""

    def record(number, ok, detail):
        line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
        ACCEPTANCE[number] = line
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[n])
