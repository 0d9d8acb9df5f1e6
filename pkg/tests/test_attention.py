"""Electrode gating blocks: squeeze-excitation and pooled self-attention."""

import warnings

import numpy as np
import pytest

from eegaze.attention import (
    SaBlock,
    ScaleTrace,
    SeBlock,
    collect_scales,
    sa_forward,
    se_forward,
)
from eegaze.autodiff import Tensor, backward, linear, tsum


def _uniform_init(seed):
    rng = np.random.default_rng(seed)
    return lambda shape, fan_in: rng.uniform(-0.5, 0.5, shape) / np.sqrt(fan_in)


# ---------------------------------------------------------------------------
# squeeze-excitation


def test_se_zero_weights_scale_half():
    u = Tensor(np.random.default_rng(0).standard_normal((2, 4, 3, 5)))
    out, s = se_forward(u, SeBlock(4, ratio=2))
    np.testing.assert_array_equal(s.data, np.full((2, 4), 0.5))
    np.testing.assert_allclose(out.data, 0.5 * u.data, atol=1e-15)


def test_se_scales_strictly_inside_unit_interval():
    u = Tensor(np.random.default_rng(1).standard_normal((3, 8, 4, 6)) * 5)
    _, s = se_forward(u, SeBlock(8, ratio=4, init=_uniform_init(2)))
    assert (s.data > 0).all() and (s.data < 1).all()


def test_se_ratio_constant_per_electrode():
    rng = np.random.default_rng(3)
    u_data = rng.standard_normal((2, 6, 5, 7))
    u_data[np.abs(u_data) < 1e-3] += 1.0  # keep ratios well-defined
    u = Tensor(u_data)
    out, s = se_forward(u, SeBlock(6, ratio=3, init=_uniform_init(4)))
    ratio = out.data / u_data
    expect = np.broadcast_to(s.data[:, :, None, None], u_data.shape)
    assert np.abs(ratio - expect).max() < 1e-12


def test_se_hidden_width_and_validation():
    blk = SeBlock(16, ratio=4)
    assert blk.w1.shape == (4, 16) and blk.w2.shape == (16, 4)
    with pytest.raises(ValueError):
        SeBlock(8, ratio=0)
    with pytest.warns(UserWarning):
        blk_small = SeBlock(2, ratio=4)
    assert blk_small.w1.shape == (1, 2)  # hidden clamps to 1


def test_se_input_validation():
    blk = SeBlock(4)
    with pytest.raises(ValueError):
        se_forward(Tensor(np.zeros((2, 4, 3))), blk)  # rank 3
    with pytest.raises(ValueError):
        se_forward(Tensor(np.zeros((2, 5, 3, 4))), blk)  # electrode mismatch


def test_se_records_trace_and_backprops():
    u = Tensor(np.random.default_rng(5).standard_normal((2, 4, 3, 5)), requires_grad=True)
    trace = ScaleTrace()
    out, _ = se_forward(u, SeBlock(4, ratio=2, init=_uniform_init(6)), trace, layer_index=3)
    assert len(trace) == 1
    entry = collect_scales(trace)[0]
    assert entry.source == "se" and entry.layer_index == 3 and entry.values.shape == (2, 4)
    backward(tsum(out))
    assert np.abs(u.grad).sum() > 0


def test_collect_scales_requires_trace():
    with pytest.raises(ValueError):
        collect_scales(None)


# ---------------------------------------------------------------------------
# self-attention


def test_sa_zero_weights_give_uniform_attention():
    j = 5
    u = Tensor(np.random.default_rng(0).standard_normal((2, j, 8)))
    x, z, m = sa_forward(u, SaBlock(8, 4))
    np.testing.assert_allclose(m.data, np.full((2, j, j), 1 / j), atol=1e-15)
    np.testing.assert_allclose(z.data, np.full((2, j), 1 / (1 + np.exp(-1 / j))), atol=1e-12)
    np.testing.assert_array_equal(x.data, np.zeros((2, j, 4)))  # W_v = 0


def test_sa_rows_stochastic_and_scales_bounded():
    rng = np.random.default_rng(7)
    u = Tensor(rng.standard_normal((3, 6, 16)) * 4)
    _, z, m = sa_forward(u, SaBlock(16, 8, init=_uniform_init(8)))
    np.testing.assert_allclose(m.data.sum(axis=-1), np.ones((3, 6)), atol=1e-9)
    assert (m.data >= 0).all()
    assert (z.data > 0).all() and (z.data < 1).all()
    # pooled column mass lives in (0, 1), so the squashed gate sits in
    # (sigmoid(0), sigmoid(1))
    assert (z.data > 0.5).all() and (z.data < 1 / (1 + np.exp(-1.0))).all()


def test_sa_output_is_gated_value():
    rng = np.random.default_rng(9)
    u = Tensor(rng.standard_normal((2, 4, 8)))
    blk = SaBlock(8, 4, init=_uniform_init(10))
    x, z, _ = sa_forward(u, blk)
    v = linear(u, blk.w_v)
    np.testing.assert_allclose(x.data, z.data[:, :, None] * v.data, atol=1e-12)


def test_sa_identical_embeddings_share_one_gate():
    row = np.random.default_rng(11).standard_normal(8)
    u = Tensor(np.broadcast_to(row, (1, 5, 8)).copy())
    _, z, m = sa_forward(u, SaBlock(8, 4, init=_uniform_init(12)))
    np.testing.assert_allclose(m.data, np.full((1, 5, 5), 0.2), atol=1e-12)
    assert np.ptp(z.data) < 1e-12


def test_sa_permutation_equivariance():
    rng = np.random.default_rng(13)
    u = rng.standard_normal((2, 6, 8))
    blk = SaBlock(8, 4, init=_uniform_init(14))
    perm = rng.permutation(6)
    xp, zp, mp = sa_forward(Tensor(u[:, perm]), blk)
    x, z, m = sa_forward(Tensor(u), blk)
    np.testing.assert_allclose(zp.data, z.data[:, perm], atol=1e-12)
    np.testing.assert_allclose(mp.data, m.data[:, perm][:, :, perm], atol=1e-12)
    np.testing.assert_allclose(xp.data, x.data[:, perm], atol=1e-12)


def test_sa_row_pooling_collapses_to_constant():
    # rows sum to 1, so pooling along rows sees 1/J everywhere; the
    # columns default is the axis that actually distinguishes electrodes
    rng = np.random.default_rng(15)
    u = Tensor(rng.standard_normal((2, 6, 8)) * 3)
    _, z, _ = sa_forward(u, SaBlock(8, 4, pool_axis="rows", init=_uniform_init(16)))
    np.testing.assert_allclose(z.data, np.full((2, 6), 1 / (1 + np.exp(-1 / 6))), atol=1e-9)


def test_sa_validation():
    with pytest.raises(ValueError):
        SaBlock(8, 4, pool_axis="diag")
    blk = SaBlock(8, 4)
    with pytest.raises(ValueError):
        sa_forward(Tensor(np.zeros((2, 8))), blk)  # rank 2
    with pytest.raises(ValueError):
        sa_forward(Tensor(np.zeros((2, 4, 16))), blk)  # d_model mismatch


def test_sa_trace_and_determinism():
    rng = np.random.default_rng(17)
    u_data = rng.standard_normal((2, 4, 8))
    blk = SaBlock(8, 4, init=_uniform_init(18))
    trace = ScaleTrace()
    _, z1, _ = sa_forward(Tensor(u_data), blk, trace, layer_index=0)
    assert collect_scales(trace)[0].source == "sa"
    _, z2, _ = sa_forward(Tensor(u_data.copy()), blk)
    assert np.array_equal(z1.data, z2.data)


def test_sa_gradients_reach_all_projections():
    rng = np.random.default_rng(19)
    u = Tensor(rng.standard_normal((2, 4, 8)), requires_grad=True)
    blk = SaBlock(8, 4, init=_uniform_init(20))
    for _, p in blk.parameters():
        p.zero_grad()
    x, _, _ = sa_forward(u, blk)
    backward(tsum(x))
    for name, p in blk.parameters():
        assert np.abs(p.grad).sum() > 0, name
    assert np.abs(u.grad).sum() > 0
