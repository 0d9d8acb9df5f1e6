"""The full attention CNN: residual temporal conv groups with electrode attention.

Layout keeps the electrode axis alive end to end: activations are
[B, J, F, T] and convolutions run per electrode with shared kernels, so
electrode-wise attention can act at every depth. Each residual group is
`residual_period` conv blocks (conv, batch norm, leaky ReLU) with a single
k=2 s=2 max-pool closing the group and a 1x1-conv skip path pooled the
same way, so the temporal length halves once per group. One shared SE
block rescales electrodes after every conv block; one SA block acts on
per-electrode feature vectors right before the prediction head.
"""

from __future__ import annotations

import dataclasses
import io
import zlib
from dataclasses import dataclass

import numpy as np

from . import binio
from .attention import SaBlock, ScaleTrace, SeBlock, sa_forward, se_forward
from .autodiff import (
    BatchNormState,
    Tensor,
    add,
    batchnorm,
    conv1d,
    crop_time,
    leaky_relu,
    linear,
    maxpool1d,
    no_grad,
    reshape,
)


def _leaky_gain(slope: float = 0.01) -> float:
    # Kaiming gain for a leaky-ReLU nonlinearity
    return float(np.sqrt(2.0 / (1.0 + slope * slope)))

CHECKPOINT_MAGIC = b"ACNN"
CHECKPOINT_VERSION = 1
LEAKY_SLOPE = 0.01

TASKS = ("position", "amplitude", "angle")
_HEAD_DIMS = {"position": 2, "amplitude": 1, "angle": 1}


@dataclass
class ModelConfig:
    n_electrodes: int
    n_timepoints: int
    n_conv_blocks: int = 12
    residual_period: int = 3
    hidden_features: int = 64
    kernel_size: int = 64
    use_se: bool = True
    use_sa: bool = True
    task: str = "position"
    se_ratio: int = 4
    sa_dk: int = 64
    d_model: int = 128
    sa_pool_axis: str = "columns"
    seed: int = 0
    dtype: str = "float64"

    def validate(self):
        if self.n_electrodes < 1 or self.n_timepoints < 1:
            raise ValueError("n_electrodes and n_timepoints must be positive")
        if self.n_conv_blocks < 1 or self.residual_period < 1:
            raise ValueError("n_conv_blocks and residual_period must be positive")
        if self.n_conv_blocks % self.residual_period != 0:
            raise ValueError(
                f"n_conv_blocks ({self.n_conv_blocks}) must be divisible by "
                f"residual_period ({self.residual_period})"
            )
        if self.kernel_size < 1 or self.hidden_features < 1:
            raise ValueError("kernel_size and hidden_features must be >= 1")
        if self.task not in TASKS:
            raise ValueError(f"task must be one of {TASKS}, got {self.task!r}")
        if self.se_ratio < 1 or self.sa_dk < 1 or self.d_model < 1:
            raise ValueError("se_ratio, sa_dk and d_model must be >= 1")
        if self.dtype not in ("float32", "float64"):
            raise ValueError("dtype must be float32 or float64")
        if self.sa_pool_axis not in ("columns", "rows"):
            raise ValueError("sa_pool_axis must be 'columns' or 'rows'")
        if self.seed < 0:
            raise ValueError("seed must be nonnegative")
        lengths = temporal_lengths(self)
        if lengths[-1] < 1:
            raise ValueError(f"temporal length collapses to {lengths[-1]} after pooling: {lengths}")

    @property
    def n_groups(self) -> int:
        return self.n_conv_blocks // self.residual_period

    @property
    def np_dtype(self):
        return np.float32 if self.dtype == "float32" else np.float64

    def to_key_values(self) -> str:
        parts = []
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            if isinstance(v, bool):
                v = int(v)
            parts.append(f"{f.name}={v}")
        return "\n".join(parts) + "\n"

    @classmethod
    def from_key_values(cls, text: str) -> "ModelConfig":
        raw = {}
        for line in text.splitlines():
            line = line.strip()
            if not line:
                continue
            key, _, val = line.partition("=")
            raw[key] = val
        kwargs = {}
        for f in dataclasses.fields(cls):
            if f.name not in raw:
                raise binio.FormatError(f"checkpoint config missing key {f.name!r}")
            val = raw[f.name]
            if f.type == "bool":
                kwargs[f.name] = bool(int(val))
            elif f.type == "int":
                kwargs[f.name] = int(val)
            else:
                kwargs[f.name] = val
        return cls(**kwargs)


def temporal_lengths(config: ModelConfig) -> list[int]:
    """Temporal length before and after each residual group's pool."""
    lengths = [config.n_timepoints]
    t = config.n_timepoints
    for _ in range(config.n_groups):
        t = (t - 2) // 2 + 1
        lengths.append(t)
    return lengths


def variant_label(use_se: bool, use_sa: bool) -> str:
    if use_se and use_sa:
        return "CNN + both"
    if use_se:
        return "CNN + SE"
    if use_sa:
        return "CNN + SA"
    return "CNN"


class _ConvBlock:
    def __init__(self, weight, bias, gamma, beta, bn_state, has_pool):
        self.weight = weight
        self.bias = bias
        self.gamma = gamma
        self.beta = beta
        self.bn_state = bn_state
        self.has_pool = has_pool


class AttentionCnn:
    """Builds deterministically from a ModelConfig; see module docstring."""

    def __init__(self, config: ModelConfig):
        config.validate()
        self.config = config
        dt = config.np_dtype
        J, F, K = config.n_electrodes, config.hidden_features, config.kernel_size
        self._params: list[tuple[str, Tensor]] = []

        self.blocks: list[_ConvBlock] = []
        self.skips: list[tuple[Tensor, Tensor]] = []
        for b in range(config.n_conv_blocks):
            c_in = 1 if b == 0 else F
            name = f"block{b}"
            w = self._new_param(f"{name}.conv.weight", (F, c_in, K), fan_in=c_in * K, gain=_leaky_gain())
            bias = self._zero_param(f"{name}.conv.bias", (F,))
            gamma = self._const_param(f"{name}.bn.gamma", (F,), 1.0)
            beta = self._zero_param(f"{name}.bn.beta", (F,))
            is_group_final = (b + 1) % config.residual_period == 0
            self.blocks.append(_ConvBlock(w, bias, gamma, beta, BatchNormState(F), is_group_final))
        for g in range(config.n_groups):
            c_in = 1 if g == 0 else F
            w = self._new_param(f"skip{g}.weight", (F, c_in, 1), fan_in=c_in, gain=1.0)
            bias = self._zero_param(f"skip{g}.bias", (F,))
            self.skips.append((w, bias))

        self.se: SeBlock | None = None
        if config.use_se:
            self.se = SeBlock(J, config.se_ratio, dtype=dt)
            self.se.w1.data = self._init_array("se.w1", self.se.w1.shape, fan_in=J, gain=1.0)
            self.se.w2.data = self._init_array("se.w2", self.se.w2.shape, fan_in=self.se.w1.shape[0], gain=1.0)
            self._params.extend(self.se.parameters())

        # The per-electrode projection to d_model is part of the backbone in
        # every variant; attention blocks only add parameters on top of it.
        t_final = temporal_lengths(config)[-1]
        feat_dim = F * t_final
        self.proj_w = self._new_param("proj.weight", (config.d_model, feat_dim), fan_in=feat_dim, gain=1.0)
        self.proj_b = self._zero_param("proj.bias", (config.d_model,))
        self.sa: SaBlock | None = None
        if config.use_sa:
            self.sa = SaBlock(config.d_model, config.sa_dk, pool_axis=config.sa_pool_axis, dtype=dt)
            for pname, p in self.sa.parameters():
                p.data = self._init_array(pname, p.shape, fan_in=config.d_model, gain=1.0)
            self._params.extend(self.sa.parameters())
            head_in = J * config.sa_dk
        else:
            head_in = J * config.d_model
        out_dim = _HEAD_DIMS[config.task]
        self.head_w = self._new_param("head.weight", (out_dim, head_in), fan_in=head_in, gain=1.0)
        self.head_b = self._zero_param("head.bias", (out_dim,))

    # -- parameter bookkeeping ------------------------------------------------

    def _init_array(self, name: str, shape, fan_in: int, gain: float) -> np.ndarray:
        rng = np.random.default_rng(np.random.SeedSequence(entropy=self.config.seed, spawn_key=(zlib.crc32(name.encode()),)))
        limit = gain * np.sqrt(3.0 / fan_in)
        return rng.uniform(-limit, limit, size=shape).astype(self.config.np_dtype)

    def _new_param(self, name: str, shape, fan_in: int, gain: float) -> Tensor:
        t = Tensor(self._init_array(name, shape, fan_in, gain), requires_grad=True)
        self._params.append((name, t))
        return t

    def _zero_param(self, name: str, shape) -> Tensor:
        t = Tensor(np.zeros(shape, dtype=self.config.np_dtype), requires_grad=True)
        self._params.append((name, t))
        return t

    def _const_param(self, name: str, shape, value: float) -> Tensor:
        t = Tensor(np.full(shape, value, dtype=self.config.np_dtype), requires_grad=True)
        self._params.append((name, t))
        return t

    def named_parameters(self) -> list[tuple[str, Tensor]]:
        return list(self._params)

    def parameters(self) -> list[Tensor]:
        return [t for _, t in self._params]

    def n_parameters(self) -> int:
        return sum(t.size for t in self.parameters())

    def state_arrays(self) -> list[tuple[str, np.ndarray]]:
        """Non-trainable state (batch-norm running stats), in fixed order."""
        out = []
        for i, blk in enumerate(self.blocks):
            if blk.bn_state.initialized:
                out.append((f"block{i}.bn.running_mean", blk.bn_state.running_mean))
                out.append((f"block{i}.bn.running_var", blk.bn_state.running_var))
        return out

    # -- forward ---------------------------------------------------------------

    def forward(self, x, training: bool = False, record_scales: bool = False):
        """Run the network on x[B, J, T].

        Returns (prediction tensor, scale trace or None). Predictions:
        position [B, 2] pixels, amplitude [B, 1] pixels, angle [B, 1]
        radians (unconstrained; the loss handles wrapping).
        """
        cfg = self.config
        if not isinstance(x, Tensor):
            x = Tensor(np.asarray(x, dtype=cfg.np_dtype))
        if x.ndim != 3 or x.shape[1] != cfg.n_electrodes or x.shape[2] != cfg.n_timepoints:
            raise ValueError(
                f"input must be [B, {cfg.n_electrodes}, {cfg.n_timepoints}], got {tuple(x.shape)}"
            )
        B, J = x.shape[0], cfg.n_electrodes
        F, K = cfg.hidden_features, cfg.kernel_size
        trace = ScaleTrace() if record_scales else None

        h = reshape(x, (B * J, 1, cfg.n_timepoints))
        t_cur = cfg.n_timepoints
        for g in range(cfg.n_groups):
            skip_w, skip_b = self.skips[g]
            skip = maxpool1d(conv1d(h, skip_w, skip_b, stride=1, padding=0), 2, 2)
            for j in range(cfg.residual_period):
                bidx = g * cfg.residual_period + j
                blk = self.blocks[bidx]
                # Even K with symmetric K//2 padding yields t_cur + 1 samples;
                # crop back so only pooling changes the temporal length.
                h = conv1d(h, blk.weight, blk.bias, stride=1, padding=K // 2)
                h = crop_time(h, t_cur)
                h = batchnorm(h, blk.gamma, blk.beta, blk.bn_state, training)
                h = leaky_relu(h, LEAKY_SLOPE)
                if blk.has_pool:
                    h = maxpool1d(h, 2, 2)
                    t_cur = (t_cur - 2) // 2 + 1
                if self.se is not None:
                    u4, _ = se_forward(reshape(h, (B, J, F, t_cur)), self.se, trace, layer_index=bidx)
                    h = reshape(u4, (B * J, F, t_cur))
            h = add(h, skip)

        feats = reshape(h, (B, J, F * t_cur))
        proj = linear(feats, self.proj_w, self.proj_b)
        if self.sa is not None:
            attended, _, _ = sa_forward(proj, self.sa, trace, layer_index=cfg.n_conv_blocks)
            flat = reshape(attended, (B, J * cfg.sa_dk))
        else:
            flat = reshape(proj, (B, J * cfg.d_model))
        pred = linear(flat, self.head_w, self.head_b)
        if not np.isfinite(pred.data).all():
            raise FloatingPointError("non-finite values in model output")
        return pred, trace

    def predict(self, signals: np.ndarray, batch_size: int = 256) -> np.ndarray:
        """Eval-mode predictions over an array of samples, without autodiff."""
        outs = []
        with no_grad():
            for start in range(0, signals.shape[0], batch_size):
                pred, _ = self.forward(signals[start : start + batch_size], training=False)
                outs.append(pred.data)
        return np.concatenate(outs, axis=0)

    def variant(self, use_se: bool, use_sa: bool) -> "AttentionCnn":
        """Same config and seed with attention blocks toggled; shared components
        re-initialize identically because parameter streams are keyed by name."""
        return AttentionCnn(dataclasses.replace(self.config, use_se=use_se, use_sa=use_sa))


def save_checkpoint(model: AttentionCnn, path):
    """Write the binary checkpoint (magic ACNN, config block, named f64 tensors)."""
    buf = io.BytesIO()
    w = binio.Writer(buf)
    w.raw(CHECKPOINT_MAGIC)
    w.u16(CHECKPOINT_VERSION)
    cfg_block = model.config.to_key_values().encode("utf-8")
    w.u32(len(cfg_block))
    w.raw(cfg_block)
    entries = [(n, t.data) for n, t in model.named_parameters()] + model.state_arrays()
    for name, arr in entries:
        nb = name.encode("utf-8")
        w.u16(len(nb))
        w.raw(nb)
        w.u8(arr.ndim)
        for d in arr.shape:
            w.u32(d)
        w.f64_array(arr.reshape(-1))
    with open(path, "wb") as f:
        f.write(buf.getvalue())


def load_checkpoint(path) -> AttentionCnn:
    """Rebuild a model from a checkpoint; bit-exact against a following save."""
    with open(path, "rb") as f:
        r = binio.Reader(f)
        r.expect_magic(CHECKPOINT_MAGIC)
        version = r.u16()
        if version != CHECKPOINT_VERSION:
            raise binio.VersionError(f"unsupported checkpoint version {version}")
        cfg_len = r.u32()
        config = ModelConfig.from_key_values(r.read_exact(cfg_len).decode("utf-8"))
        model = AttentionCnn(config)
        params = dict(model.named_parameters())
        loaded = set()
        while not r.at_eof():
            name_len = r.u16()
            name = r.read_exact(name_len).decode("utf-8")
            rank = r.u8()
            dims = tuple(r.u32() for _ in range(rank))
            count = int(np.prod(dims)) if dims else 1
            data = r.f64_array(count).reshape(dims)
            if name in params:
                if params[name].data.shape != dims:
                    raise binio.FormatError(f"checkpoint tensor {name!r} has shape {dims}, expected {params[name].data.shape}")
                params[name].data = data.astype(config.np_dtype)
            elif name.endswith(".running_mean") or name.endswith(".running_var"):
                bidx = int(name.split(".")[0].removeprefix("block"))
                st = model.blocks[bidx].bn_state
                if name.endswith("mean"):
                    st.running_mean = data
                else:
                    st.running_var = data
                st.initialized = True
            else:
                raise binio.FormatError(f"unknown tensor {name!r} in checkpoint")
            loaded.add(name)
        missing = {n for n, _ in model.named_parameters()} - loaded
        if missing:
            raise binio.TruncatedFileError(f"checkpoint missing tensors: {sorted(missing)[:3]}...")
        return model
