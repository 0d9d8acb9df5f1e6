"""Network assembly: shapes, pooling schedule, variants, checkpoints."""

import dataclasses

import numpy as np
import pytest

from eegaze import binio
from eegaze.autodiff import no_grad
from eegaze.model import (
    AttentionCnn,
    ModelConfig,
    load_checkpoint,
    save_checkpoint,
    temporal_lengths,
    variant_label,
)


def tiny_config(**overrides):
    base = dict(
        n_electrodes=4,
        n_timepoints=32,
        n_conv_blocks=3,
        residual_period=3,
        hidden_features=8,
        kernel_size=5,
        d_model=16,
        sa_dk=8,
        se_ratio=2,
        task="position",
        dtype="float64",
        seed=0,
    )
    base.update(overrides)
    return ModelConfig(**base)


def batch(cfg, n=2, seed=0):
    rng = np.random.default_rng(seed)
    return rng.standard_normal((n, cfg.n_electrodes, cfg.n_timepoints)).astype(cfg.np_dtype)


# ---------------------------------------------------------------------------
# config and pooling schedule


def test_temporal_lengths_halve_once_per_group():
    cfg = tiny_config(n_timepoints=500, n_conv_blocks=12, residual_period=3)
    assert temporal_lengths(cfg) == [500, 250, 125, 62, 31]


def test_validate_rejects_bad_configs():
    with pytest.raises(ValueError):
        tiny_config(n_conv_blocks=4, residual_period=3).validate()  # not divisible
    with pytest.raises(ValueError):
        tiny_config(task="saccade").validate()
    with pytest.raises(ValueError):
        tiny_config(dtype="float16").validate()
    with pytest.raises(ValueError):
        tiny_config(seed=-1).validate()
    with pytest.raises(ValueError):
        # 8 timepoints cannot survive 4 halvings
        tiny_config(n_timepoints=8, n_conv_blocks=12, residual_period=3).validate()


def test_variant_labels():
    assert variant_label(False, False) == "CNN"
    assert variant_label(True, False) == "CNN + SE"
    assert variant_label(False, True) == "CNN + SA"
    assert variant_label(True, True) == "CNN + both"


# ---------------------------------------------------------------------------
# forward pass


@pytest.mark.parametrize("task,out_dim", [("position", 2), ("amplitude", 1), ("angle", 1)])
def test_output_shapes_per_task(task, out_dim):
    cfg = tiny_config(task=task)
    model = AttentionCnn(cfg)
    pred, _ = model.forward(batch(cfg, 3), training=True)
    assert pred.shape == (3, out_dim)
    assert np.isfinite(pred.data).all()


def test_input_validation():
    cfg = tiny_config()
    model = AttentionCnn(cfg)
    with pytest.raises(ValueError):
        model.forward(np.zeros((2, 5, 32)))  # wrong electrode count
    with pytest.raises(ValueError):
        model.forward(np.zeros((2, 4, 31)))  # wrong length
    with pytest.raises(ValueError):
        model.forward(np.zeros((4, 32)))  # missing batch dim


def test_even_kernel_keeps_length_schedule():
    cfg = tiny_config(kernel_size=6)
    model = AttentionCnn(cfg)
    pred, _ = model.forward(batch(cfg), training=True)
    assert pred.shape == (2, 2)


def test_scale_trace_one_se_entry_per_block_plus_sa():
    cfg = tiny_config(n_conv_blocks=6, residual_period=3)
    model = AttentionCnn(cfg)
    _, trace = model.forward(batch(cfg), training=True, record_scales=True)
    se_entries = [e for e in trace if e.source == "se"]
    sa_entries = [e for e in trace if e.source == "sa"]
    assert [e.layer_index for e in se_entries] == list(range(6))
    assert len(sa_entries) == 1 and sa_entries[0].layer_index == 6
    for e in trace:
        assert e.values.shape == (2, 4)
        assert (e.values > 0).all() and (e.values < 1).all()


def test_se_block_is_shared_across_insertion_points():
    model = AttentionCnn(tiny_config(n_conv_blocks=6, residual_period=3))
    se_params = [p for name, p in model.named_parameters() if name.startswith("se.")]
    assert len(se_params) == 2  # one bottleneck, not one per block


def test_head_width_depends_on_attention_variant():
    cfg = tiny_config()
    with_sa = AttentionCnn(cfg)
    without = AttentionCnn(dataclasses.replace(cfg, use_sa=False))
    assert with_sa.head_w.shape[1] == 4 * cfg.sa_dk
    assert without.head_w.shape[1] == 4 * cfg.d_model


def test_variants_share_backbone_initialization():
    model = AttentionCnn(tiny_config())
    plain = model.variant(False, False)
    conv_names = [n for n, _ in model.named_parameters() if n.startswith("block")]
    full = dict(model.named_parameters())
    bare = dict(plain.named_parameters())
    for name in conv_names:
        np.testing.assert_array_equal(full[name].data, bare[name].data)
    assert "se.w1" in full and "se.w1" not in bare


def test_trace_disabled_returns_none():
    model = AttentionCnn(tiny_config())
    _, trace = model.forward(batch(tiny_config()), training=True, record_scales=False)
    assert trace is None


def test_non_finite_output_raises():
    cfg = tiny_config()
    model = AttentionCnn(cfg)
    model.head_w.data[:] = 1e308
    with np.errstate(over="ignore", invalid="ignore"), pytest.raises(FloatingPointError):
        model.forward(batch(cfg) * 1e60, training=True)


# ---------------------------------------------------------------------------
# initialization


def test_init_deterministic_per_seed():
    a = AttentionCnn(tiny_config(seed=7))
    b = AttentionCnn(tiny_config(seed=7))
    c = AttentionCnn(tiny_config(seed=8))
    for (na, pa), (_, pb) in zip(a.named_parameters(), b.named_parameters()):
        np.testing.assert_array_equal(pa.data, pb.data, err_msg=na)
    randomized = dict(c.named_parameters())
    for name, pa in a.named_parameters():
        if "weight" in name or name.startswith(("se.", "sa.")):
            assert not np.array_equal(pa.data, randomized[name].data), name


def test_init_streams_differ_between_blocks():
    model = AttentionCnn(tiny_config(n_conv_blocks=6, residual_period=3, n_timepoints=64))
    params = dict(model.named_parameters())
    w1 = params["block1.conv.weight"].data
    w2 = params["block2.conv.weight"].data
    assert w1.shape == w2.shape and not np.array_equal(w1, w2)


def test_init_bounds_follow_fan_in():
    cfg = tiny_config()
    model = AttentionCnn(cfg)
    params = dict(model.named_parameters())
    head = params["head.weight"].data
    fan_in = head.shape[1]
    gain = 1.0
    limit = gain * np.sqrt(3.0 / fan_in)
    assert np.abs(head).max() <= limit
    assert np.abs(head).max() > 0.5 * limit  # actually fills the range


def test_predict_matches_eval_forward():
    cfg = tiny_config()
    model = AttentionCnn(cfg)
    x = batch(cfg, 5)
    model.forward(x, training=True)  # prime batch-norm running stats
    with no_grad():
        ref, _ = model.forward(x, training=False)
    np.testing.assert_array_equal(model.predict(x), ref.data)
    # splitting batches reorders GEMM accumulation; values agree to rounding
    np.testing.assert_allclose(model.predict(x, batch_size=2), ref.data, atol=1e-12)


# ---------------------------------------------------------------------------
# checkpoints


def trained_model(cfg=None):
    cfg = cfg or tiny_config()
    model = AttentionCnn(cfg)
    model.forward(batch(cfg, 6), training=True)
    return model


def test_checkpoint_round_trip_bit_exact(tmp_path):
    model = trained_model()
    path = tmp_path / "m.ckpt"
    save_checkpoint(model, path)
    clone = load_checkpoint(path)
    for (name, p), (_, q) in zip(model.named_parameters(), clone.named_parameters()):
        np.testing.assert_array_equal(p.data, q.data, err_msg=name)
    for (name, a), (_, b) in zip(model.state_arrays(), clone.state_arrays()):
        np.testing.assert_array_equal(a, b, err_msg=name)
    x = batch(tiny_config(), 3, seed=5)
    np.testing.assert_array_equal(model.predict(x), clone.predict(x))


def test_checkpoint_save_is_byte_stable(tmp_path):
    model = trained_model()
    p1, p2 = tmp_path / "a.ckpt", tmp_path / "b.ckpt"
    save_checkpoint(model, p1)
    save_checkpoint(load_checkpoint(p1), p2)
    assert p1.read_bytes() == p2.read_bytes()


def test_checkpoint_float32_round_trip(tmp_path):
    cfg = tiny_config(dtype="float32")
    model = trained_model(cfg)
    path = tmp_path / "m32.ckpt"
    save_checkpoint(model, path)
    clone = load_checkpoint(path)
    for (name, p), (_, q) in zip(model.named_parameters(), clone.named_parameters()):
        assert q.data.dtype == np.float32
        np.testing.assert_array_equal(p.data, q.data, err_msg=name)


def test_checkpoint_corruption_errors_are_distinct(tmp_path):
    model = trained_model()
    path = tmp_path / "m.ckpt"
    save_checkpoint(model, path)
    blob = path.read_bytes()

    bad_magic = tmp_path / "magic.ckpt"
    bad_magic.write_bytes(b"XXXX" + blob[4:])
    with pytest.raises(binio.BadMagicError):
        load_checkpoint(bad_magic)

    bad_version = tmp_path / "version.ckpt"
    bad_version.write_bytes(blob[:4] + (99).to_bytes(2, "little") + blob[6:])
    with pytest.raises(binio.VersionError):
        load_checkpoint(bad_version)

    truncated = tmp_path / "trunc.ckpt"
    truncated.write_bytes(blob[: len(blob) // 2])
    with pytest.raises(binio.TruncatedFileError):
        load_checkpoint(truncated)
