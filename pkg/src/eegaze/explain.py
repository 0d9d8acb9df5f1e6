"""Post-hoc explainability: attention summaries and relevance propagation.

Two complementary routes, mirroring how the model itself is built. For
attention variants, the per-electrode scales recorded during a forward
pass are summarized, min-max normalized, thresholded into "important"
electrodes, and compared between annotated-noisy and clean electrodes.
For the attention-free CNN, epsilon-rule relevance propagation walks the
trained network backward and attributes the prediction to individual
electrode-timepoint inputs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .attention import ElectrodeScales
from .autodiff import no_grad
from .data import EegDataset
from .model import LEAKY_SLOPE, AttentionCnn

SUMMARY_MODES = ("sa_only", "se_mean", "all_mean")

# Published real-data fractions below tau=0.05, quoted as context only.
REFERENCE_FRAC_BELOW = {"clean": 0.19, "noisy": 0.42}


def attention_summary(trace: list[ElectrodeScales], mode: str = "sa_only") -> np.ndarray:
    """Collapse recorded per-layer scales to one [B, J] vector per sample.

    sa_only returns the SA gate, se_mean the mean over the SE vectors,
    all_mean the mean over everything recorded.
    """
    if mode not in SUMMARY_MODES:
        raise ValueError(f"mode must be one of {SUMMARY_MODES}, got {mode!r}")
    if not trace:
        raise ValueError("attention_summary: empty trace")
    if mode == "sa_only":
        picked = [e.values for e in trace if e.source == "sa"]
    elif mode == "se_mean":
        picked = [e.values for e in trace if e.source == "se"]
    else:
        picked = [e.values for e in trace]
    if not picked:
        raise ValueError(f"attention_summary: no scales from the requested source for mode {mode!r}")
    return np.mean(picked, axis=0)


def normalize_attention(raw: np.ndarray) -> np.ndarray:
    """Min-max normalize per sample; a constant vector maps to all 0.5."""
    raw = np.asarray(raw, dtype=np.float64)
    squeeze = raw.ndim == 1
    a = raw[None, :] if squeeze else raw
    if a.ndim != 2 or a.shape[1] < 2:
        raise ValueError("normalize_attention expects [J] or [B, J] with J >= 2")
    lo = a.min(axis=1, keepdims=True)
    hi = a.max(axis=1, keepdims=True)
    span = hi - lo
    flat = (span == 0).reshape(-1)
    out = np.empty_like(a)
    out[flat] = 0.5
    if (~flat).any():
        out[~flat] = (a[~flat] - lo[~flat]) / span[~flat]
    return out[0] if squeeze else out


def important_electrodes(a: np.ndarray) -> set[int]:
    """Electrodes whose sequence-mean attention strictly exceeds the global mean."""
    a = np.asarray(a, dtype=np.float64)
    if a.ndim == 1:
        a = a[None, :]
    if a.ndim != 2 or a.shape[0] < 1:
        raise ValueError("important_electrodes expects [N, J] with N >= 1")
    per_electrode = a.mean(axis=0)
    threshold = per_electrode.mean()
    return {int(j) for j in np.nonzero(per_electrode > threshold)[0]}


def noisy_attention_stats(
    attention: np.ndarray, noisy_sets: list, tau: float = 0.05
) -> dict:
    """Compare normalized attention of annotated-noisy vs clean electrodes.

    Only samples featuring at least one noisy electrode qualify; values are
    pooled per electrode-instance across those samples. Empty groups are
    reported as absent keys rather than zeros.
    """
    attention = np.asarray(attention, dtype=np.float64)
    if attention.ndim != 2 or attention.shape[0] != len(noisy_sets):
        raise ValueError("attention must be [N, J] aligned with noisy_sets")
    if not any(noisy_sets):
        raise ValueError("no noisy annotations in the dataset")
    noisy_vals, clean_vals = [], []
    n_electrodes = attention.shape[1]
    for a, bad in zip(attention, noisy_sets):
        if not bad:
            continue
        bad = set(bad)
        for j in range(n_electrodes):
            (noisy_vals if j in bad else clean_vals).append(a[j])
    out = {"tau": tau, "n_qualifying_samples": int(sum(1 for b in noisy_sets if b))}
    if noisy_vals:
        nv = np.asarray(noisy_vals)
        out["mean_noisy"] = float(nv.mean())
        out["frac_below_noisy"] = float((nv < tau).mean())
    if clean_vals:
        cv = np.asarray(clean_vals)
        out["mean_clean"] = float(cv.mean())
        out["frac_below_clean"] = float((cv < tau).mean())
    out["reference_frac_below"] = dict(REFERENCE_FRAC_BELOW)
    return out


@dataclass
class AttentionReport:
    """Normalized attention over a dataset plus derived statistics."""

    mode: str
    attention: np.ndarray = field(repr=False)  # [N, J] normalized
    important: set[int] = field(default_factory=set)
    noisy_stats: dict | None = None

    def to_dict(self) -> dict:
        out = {
            "mode": self.mode,
            "n_samples": int(self.attention.shape[0]),
            "n_electrodes": int(self.attention.shape[1]),
            "mean_attention_per_electrode": [float(v) for v in self.attention.mean(axis=0)],
            "important_electrodes": sorted(self.important),
        }
        if self.noisy_stats is not None:
            out["noisy_stats"] = self.noisy_stats
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def attention_report(
    model: AttentionCnn,
    ds: EegDataset,
    mode: str = "sa_only",
    tau: float = 0.05,
    batch_size: int = 64,
) -> AttentionReport:
    """Run the model over a dataset and assemble the attention statistics."""
    signals = ds.signals_array().astype(model.config.np_dtype)
    rows = []
    with no_grad():
        for s in range(0, signals.shape[0], batch_size):
            _, trace = model.forward(signals[s : s + batch_size], training=False, record_scales=True)
            rows.append(attention_summary(list(trace), mode))
    raw = np.concatenate(rows, axis=0)
    norm = normalize_attention(raw)
    noisy_sets = [s.noisy_electrodes for s in ds.samples]
    stats = noisy_attention_stats(norm, noisy_sets, tau) if any(noisy_sets) else None
    return AttentionReport(mode=mode, attention=norm, important=important_electrodes(norm), noisy_stats=stats)


# ---------------------------------------------------------------------------
# epsilon-rule relevance propagation for the attention-free CNN


@dataclass
class RelevanceMap:
    """Input relevance for one prediction component of one sample."""

    relevance: np.ndarray  # [J, T]
    output_component: int
    output_value: float
    eps: float

    @property
    def per_electrode(self) -> np.ndarray:
        return self.relevance.sum(axis=1)

    @property
    def leakage(self) -> float:
        denom = max(abs(self.output_value), 1e-300)
        return abs(self.relevance.sum() - self.output_value) / denom

    def to_dict(self) -> dict:
        return {
            "output_component": self.output_component,
            "output_value": self.output_value,
            "eps": self.eps,
            "leakage": self.leakage,
            "per_electrode_relevance": [float(v) for v in self.per_electrode],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def _stab(denom: np.ndarray, eps: float) -> np.ndarray:
    return denom + eps * np.where(denom >= 0, 1.0, -1.0)


def _fold_bn(blk) -> tuple[np.ndarray, np.ndarray]:
    """Eval-mode conv+batchnorm collapsed to one convolution."""
    st = blk.bn_state
    if not st.initialized:
        raise RuntimeError("lrp_epsilon requires eval mode (batch-norm statistics uninitialized)")
    scale = blk.gamma.data.astype(np.float64) / np.sqrt(st.running_var + st.eps)
    w = blk.weight.data.astype(np.float64) * scale[:, None, None]
    b = (blk.bias.data.astype(np.float64) - st.running_mean) * scale + blk.beta.data.astype(np.float64)
    return w, b


def _conv_fwd(x: np.ndarray, w: np.ndarray, b: np.ndarray, padding: int) -> np.ndarray:
    c, t = x.shape
    f, _, k = w.shape
    xp = np.pad(x, ((0, 0), (padding, padding))) if padding else x
    t_out = t + 2 * padding - k + 1
    out = np.empty((f, t_out))
    for j in range(t_out):
        out[:, j] = np.tensordot(w, xp[:, j : j + k], axes=([1, 2], [0, 1]))
    return out + b[:, None]


def _conv_lrp(x: np.ndarray, w: np.ndarray, z_inputs: np.ndarray, r_out: np.ndarray, eps: float, padding: int) -> np.ndarray:
    """Distribute r_out over conv inputs by the epsilon rule (bias kept at layer)."""
    ratio = r_out / _stab(z_inputs, eps)
    c, t = x.shape
    f, _, k = w.shape
    t_out = z_inputs.shape[1]
    rp = np.zeros((c, t + 2 * padding))
    xp = np.pad(x, ((0, 0), (padding, padding))) if padding else x
    for j in range(t_out):
        # contribution of window j: x_i * w_fi * ratio_fj summed over f
        rp[:, j : j + k] += xp[:, j : j + k] * np.tensordot(ratio[:, j], w, axes=(0, 0))
    return rp[:, padding : padding + t] if padding else rp


def lrp_epsilon(model: AttentionCnn, x: np.ndarray, output_component: int = 0, eps: float = 1e-6) -> RelevanceMap:
    """Epsilon-rule relevance of one output component w.r.t. every input value.

    Defined for the attention-free variant only: conv (with batch norm
    folded in), max pool (winner takes all), leaky ReLU (pass-through),
    the residual adds split proportionally, and the linear layers. Bias
    relevance stays at its layer (the denominators sum input
    contributions only), so total relevance matches the output up to
    epsilon leakage.
    """
    cfg = model.config
    if cfg.use_se or cfg.use_sa:
        raise ValueError("lrp_epsilon supports the attention-free CNN variant only")
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (cfg.n_electrodes, cfg.n_timepoints):
        raise ValueError(f"input must be [{cfg.n_electrodes}, {cfg.n_timepoints}], got {x.shape}")
    out_dim = model.head_w.data.shape[0]
    if not 0 <= output_component < out_dim:
        raise ValueError(f"output_component must be in [0, {out_dim})")

    J, K = cfg.n_electrodes, cfg.kernel_size
    pad = K // 2

    # Forward replay with caches. Convolution never mixes electrodes, so
    # everything runs per electrode on [J, C, T] stacks.
    groups = []
    h = x[:, None, :]  # [J, 1, T]
    for g in range(cfg.n_groups):
        gctx = {"input": h}
        skip_w = model.skips[g][0].data.astype(np.float64)
        skip_b = model.skips[g][1].data.astype(np.float64)
        skip_nb = np.stack([_conv_fwd(h[j], skip_w, np.zeros(skip_w.shape[0]), 0) for j in range(J)])
        skip_pooled, skip_arg = _maxpool_fwd(skip_nb + skip_b[None, :, None], 2, 2)
        gctx["skip"] = {"x": h, "w": skip_w, "z_nb": skip_nb, "arg": skip_arg, "pooled": skip_pooled}
        blocks = []
        for jblk in range(cfg.residual_period):
            blk = model.blocks[g * cfg.residual_period + jblk]
            w_eff, b_eff = _fold_bn(blk)
            t_in = h.shape[2]
            z_nb = np.stack([_conv_fwd(h[j], w_eff, np.zeros(w_eff.shape[0]), pad) for j in range(J)])
            z = (z_nb + b_eff[None, :, None])[:, :, :t_in]  # crop the even-kernel extra sample
            bctx = {"x": h, "w": w_eff, "z_nb": z_nb, "t_in": t_in}
            h = np.where(z > 0, z, LEAKY_SLOPE * z)
            if blk.has_pool:
                bctx["pool_t_in"] = h.shape[2]
                h, bctx["pool_arg"] = _maxpool_fwd(h, 2, 2)
            blocks.append(bctx)
        gctx["blocks"] = blocks
        gctx["main_out"] = h
        h = h + skip_pooled
        groups.append(gctx)

    feats = h.reshape(J, -1)  # [J, F * t_final]
    proj_w = model.proj_w.data.astype(np.float64)
    proj = feats @ proj_w.T + model.proj_b.data.astype(np.float64)
    head_w = model.head_w.data.astype(np.float64)
    flat = proj.reshape(-1)
    out = head_w @ flat + model.head_b.data.astype(np.float64)
    output_value = float(out[output_component])

    # Head: single-output epsilon rule seeded with the output value itself.
    z_head = head_w[output_component] * flat
    r_flat = z_head / _stab(z_head.sum(), eps) * output_value
    r_proj = r_flat.reshape(J, -1)

    # Projection, per electrode.
    z_inputs = feats @ proj_w.T
    r = (feats * ((r_proj / _stab(z_inputs, eps)) @ proj_w)).reshape(h.shape)

    for gctx in reversed(groups):
        main, skip = gctx["main_out"], gctx["skip"]["pooled"]
        denom = _stab(main + skip, eps)
        r_main = r * main / denom
        r_skip = r * skip / denom

        sk = gctx["skip"]
        r_sz = _maxpool_lrp(r_skip, sk["arg"], sk["z_nb"].shape[2], 2, 2)
        r_skip_in = np.stack(
            [_conv_lrp(sk["x"][j], sk["w"], sk["z_nb"][j], r_sz[j], eps, 0) for j in range(J)]
        )

        for bctx in reversed(gctx["blocks"]):
            if "pool_arg" in bctx:
                r_main = _maxpool_lrp(r_main, bctx["pool_arg"], bctx["pool_t_in"], 2, 2)
            # leaky ReLU: pass-through; conv: undo the crop, then epsilon rule
            r_full = np.zeros_like(bctx["z_nb"])
            r_full[:, :, : bctx["t_in"]] = r_main
            r_main = np.stack(
                [_conv_lrp(bctx["x"][j], bctx["w"], bctx["z_nb"][j], r_full[j], eps, pad) for j in range(J)]
            )
        r = r_main + r_skip_in

    return RelevanceMap(relevance=r[:, 0, :], output_component=output_component,
                        output_value=output_value, eps=eps)


def _maxpool_fwd(x: np.ndarray, k: int, stride: int) -> tuple[np.ndarray, np.ndarray]:
    j, c, t = x.shape
    t_out = (t - k) // stride + 1
    windows = np.stack([x[:, :, i * stride : i * stride + k] for i in range(t_out)], axis=2)
    arg = windows.argmax(axis=-1)
    out = np.take_along_axis(windows, arg[..., None], axis=-1)[..., 0]
    return out, arg


def _maxpool_lrp(r: np.ndarray, arg: np.ndarray, t_in: int, k: int, stride: int) -> np.ndarray:
    j, c, t_out = r.shape
    out = np.zeros((j, c, t_in))
    ji, ci, ti = np.mgrid[0:j, 0:c, 0:t_out]
    np.add.at(out, (ji, ci, ti * stride + arg), r)
    return out
