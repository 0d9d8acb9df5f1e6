"""Electrode-wise attention blocks.

Two mechanisms produce per-electrode scales in (0, 1) that both reweight
features and explain predictions:

* squeeze-excitation: pool each electrode's features to a scalar, pass the
  electrode vector through a bottleneck MLP, sigmoid out a scale.
* pooled self-attention: electrode-to-electrode scaled dot-product
  attention whose J x J matrix is pooled to one sigmoid scale per
  electrode and applied to the value projection.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .autodiff import Tensor, bmm, linear, mean, mul_scalar, relu, scale_channels, sigmoid, softmax_rows


@dataclass
class ElectrodeScales:
    """One recorded scale vector: values[B, J] in (0, 1)."""

    values: np.ndarray
    source: str  # "se" or "sa"
    layer_index: int


class ScaleTrace:
    """Append-only record of attention scales for one forward pass."""

    def __init__(self):
        self.entries: list[ElectrodeScales] = []

    def record(self, values: np.ndarray, source: str, layer_index: int):
        self.entries.append(ElectrodeScales(values.copy(), source, layer_index))

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)


def collect_scales(trace: ScaleTrace | None) -> list[ElectrodeScales]:
    """All recorded scale vectors in network order (SE per layer, then SA)."""
    if trace is None:
        raise ValueError("scale recording was disabled for this forward pass")
    return list(trace.entries)


class SeBlock:
    """Squeeze-excitation over electrodes; one instance is shared network-wide.

    W1: [hidden, J], W2: [J, hidden], hidden = max(1, J // ratio). The
    bottleneck has no biases, matching the gating formulation
    sigmoid(W2 relu(W1 z)).
    """

    def __init__(self, n_electrodes: int, ratio: int = 4, init=None, dtype=np.float64):
        if ratio < 1:
            raise ValueError("SeBlock: ratio must be >= 1")
        if n_electrodes < ratio:
            warnings.warn(
                f"SE reduction ratio {ratio} exceeds electrode count {n_electrodes}; "
                "clamping hidden width to 1",
                stacklevel=2,
            )
        self.n_electrodes = n_electrodes
        self.ratio = ratio
        hidden = max(1, n_electrodes // ratio)
        if init is None:
            init = lambda shape, fan_in: np.zeros(shape)
        self.w1 = Tensor(init((hidden, n_electrodes), n_electrodes).astype(dtype), requires_grad=True)
        self.w2 = Tensor(init((n_electrodes, hidden), hidden).astype(dtype), requires_grad=True)

    def parameters(self):
        return [("se.w1", self.w1), ("se.w2", self.w2)]


def se_forward(
    u: Tensor, block: SeBlock, trace: ScaleTrace | None = None, layer_index: int = 0
) -> tuple[Tensor, Tensor]:
    """Squeeze u[B, J, F, T] to per-electrode scales and rescale.

    Returns (scaled features, scales s[B, J]). Every feature of electrode
    j is multiplied by the same s[b, j], so output/input ratios are
    constant per electrode.
    """
    if u.ndim != 4:
        raise ValueError(f"se_forward expects [B, J, F, T], got rank {u.ndim}")
    if u.shape[1] != block.n_electrodes:
        raise ValueError(f"se_forward: {u.shape[1]} electrodes but block built for {block.n_electrodes}")
    z = mean(u, axes=(2, 3))  # [B, J] per-electrode mean over features and time
    s = sigmoid(linear(relu(linear(z, block.w1)), block.w2))
    if trace is not None:
        trace.record(s.data, "se", layer_index)
    return scale_channels(u, s), s


class SaBlock:
    """Scaled dot-product attention over electrodes, pooled to a scale vector.

    Query/key/value maps are bias-free linear projections from d_model to
    d_k. The J x J attention matrix is averaged along one axis (columns by
    default: attention each electrode receives), squashed by a sigmoid,
    and multiplied into V.
    """

    def __init__(self, d_model: int, d_k: int, pool_axis: str = "columns", init=None, dtype=np.float64):
        if pool_axis not in ("columns", "rows"):
            raise ValueError("SaBlock: pool_axis must be 'columns' or 'rows'")
        if init is None:
            init = lambda shape, fan_in: np.zeros(shape)
        self.d_model = d_model
        self.d_k = d_k
        self.pool_axis = pool_axis
        self.w_q = Tensor(init((d_k, d_model), d_model).astype(dtype), requires_grad=True)
        self.w_k = Tensor(init((d_k, d_model), d_model).astype(dtype), requires_grad=True)
        self.w_v = Tensor(init((d_k, d_model), d_model).astype(dtype), requires_grad=True)

    def parameters(self):
        return [("sa.w_q", self.w_q), ("sa.w_k", self.w_k), ("sa.w_v", self.w_v)]


def sa_forward(
    u: Tensor, block: SaBlock, trace: ScaleTrace | None = None, layer_index: int = 0
) -> tuple[Tensor, Tensor, Tensor]:
    """Attend electrodes to each other; scale V by the pooled attention.

    u: [B, J, d_model]. Returns (x[B, J, d_k], z_att[B, J], m_att[B, J, J])
    where m_att rows sum to 1 and x[b, j] = z_att[b, j] * v[b, j].
    """
    if u.ndim != 3:
        raise ValueError(f"sa_forward expects [B, J, d_model], got rank {u.ndim}")
    if u.shape[-1] != block.d_model:
        raise ValueError(f"sa_forward: feature dim {u.shape[-1]} != d_model {block.d_model}")
    q = linear(u, block.w_q)
    k = linear(u, block.w_k)
    v = linear(u, block.w_v)
    logits = mul_scalar(bmm(q, k, transpose_b=True), 1.0 / math.sqrt(block.d_k))
    m_att = softmax_rows(logits)  # [B, J, J], row-stochastic
    pool_over = 1 if block.pool_axis == "columns" else 2  # column mean = attention received
    z_att = sigmoid(mean(m_att, axes=(pool_over,)))
    if trace is not None:
        trace.record(z_att.data, "sa", layer_index)
    return scale_channels(v, z_att), z_att, m_att
