import math

import numpy as np
import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from igcl.errors import InsufficientHistory, ShapeMismatch
from igcl.objective import anchor_columns, contrastive_loss, gather_terms, sim, similarity

finite = st.floats(-10, 10, allow_nan=False)


@given(arrays(np.float64, 6, elements=finite), arrays(np.float64, 6, elements=finite))
def test_cosine_symmetric_and_bounded(a, b):
    s = similarity(a, b)
    assert s == pytest.approx(similarity(b, a))
    assert -1 - 1e-12 <= s <= 1 + 1e-12


def test_negative_euclidean():
    assert similarity([0, 0], [3, 4], "negative-euclidean") == -5.0


def test_sim_torch_and_numpy_agree():
    rng = np.random.default_rng(0)
    a, b = rng.normal(size=(4, 5)), rng.normal(size=(4, 5))
    for kind in ("cosine", "negative-euclidean"):
        np.testing.assert_allclose(sim(torch.as_tensor(a), torch.as_tensor(b), kind).numpy(), sim(a, b, kind))


def test_loss_is_stable_at_low_temperature():
    a = torch.tensor([[1.0, 0.0]], dtype=torch.float64)
    pos = torch.tensor([[[1.0, 0.0]]], dtype=torch.float64)
    neg = torch.tensor([[[-1.0, 0.0]]], dtype=torch.float64)
    loss = contrastive_loss(a, pos, neg, tau=1e-4)
    assert torch.isfinite(loss) and float(loss) == pytest.approx(0.0, abs=1e-12)


def test_loss_reductions():
    torch.manual_seed(0)
    a, p, n = torch.randn(4, 3), torch.randn(4, 2, 3), torch.randn(4, 5, 3)
    per = contrastive_loss(a, p, n, reduction="none")
    assert per.shape == (4,)
    assert torch.allclose(contrastive_loss(a, p, n), per.sum())
    assert torch.allclose(contrastive_loss(a, p, n, reduction="mean"), per.mean())
    with pytest.raises(ShapeMismatch):
        contrastive_loss(a, p[:3], n)


def test_anchor_columns():
    assert anchor_columns(12, 4, 3).tolist() == [7, 8, 9, 10, 11]
    with pytest.raises(InsufficientHistory):
        anchor_columns(7, 4, 3)


def test_gather_terms_picks_columns():
    L, d = 10, 2
    clean = torch.arange(L, dtype=torch.float64).repeat(d, 1)
    negs = 100 + clean.unsqueeze(0).repeat(3, 1, 1)
    a, p, n = gather_terms(clean, negs, h=2, n_pos=2)
    assert a[:, 0].tolist() == [7, 8, 9]
    assert p[0, :, 0].tolist() == [6, 5]
    assert n.shape == (3, 3, 2) and n[0, :, 0].tolist() == [107, 107, 107]


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 5), st.integers(0, 8), st.floats(0.05, 2.0))
def test_loss_gradient_direction(P, K, tau):
    """Moving a negative toward the anchor never lowers the loss."""
    rng = np.random.default_rng(P * 100 + K)
    a = torch.as_tensor(rng.normal(size=(1, 4)))
    pos = torch.as_tensor(rng.normal(size=(1, P, 4)))
    neg = torch.as_tensor(rng.normal(size=(1, K + 1, 4)))
    base = contrastive_loss(a, pos, neg, tau)
    closer = neg.clone()
    closer[0, 0] = a[0]
    assert float(contrastive_loss(a, pos, closer, tau)) >= float(base) - 1e-12
