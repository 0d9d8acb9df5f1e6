"""Dense tensors with reverse-mode automatic differentiation.

Implements exactly the operations the attention CNN needs: temporal
convolution, max pooling, batch norm, the usual activations, linear maps,
reductions, and per-electrode feature scaling. Gradients flow through a
tape ordered by tensor construction; backward replays it in exact reverse
construction order, accumulating (never overwriting) into each input.
"""

from __future__ import annotations

import contextlib
import itertools

import numpy as np
import scipy.fft as _fft
from numpy.lib.stride_tricks import as_strided

_ids = itertools.count()
_grad_enabled = True


@contextlib.contextmanager
def no_grad():
    """Disable graph recording inside the block (inference / oracles)."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


class Tensor:
    """A dense n-d array of reals, optionally tracked on the gradient tape.

    `data` is always a float numpy array; `grad`, once populated, has the
    same shape. Tensors created by operations on tracked inputs carry the
    closure that routes gradients back to their parents.
    """

    __slots__ = ("data", "requires_grad", "grad", "_parents", "_backward", "_node_id")

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        arr = np.asarray(data, dtype=dtype)
        if not np.issubdtype(arr.dtype, np.floating):
            arr = arr.astype(np.float64)
        self.data = arr
        self.requires_grad = requires_grad
        self.grad = None
        self._parents = ()
        self._backward = None
        self._node_id = next(_ids)

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    @property
    def dtype(self):
        return self.data.dtype

    def item(self) -> float:
        return float(self.data.reshape(-1)[0])

    def zero_grad(self):
        self.grad = np.zeros_like(self.data)

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    # Only the arithmetic the model and losses actually use; no general
    # broadcasting beyond same-shape and python scalars.
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __neg__(self):
        return mul_scalar(self, -1.0)

    def __mul__(self, other):
        if isinstance(other, Tensor):
            return mul(self, other)
        return mul_scalar(self, float(other))

    def __rmul__(self, other):
        return mul_scalar(self, float(other))

    def __truediv__(self, other):
        return mul_scalar(self, 1.0 / float(other))

    def sum(self, axes=None):
        return tsum(self, axes)

    def mean(self, axes=None):
        return mean(self, axes)


def apply_op(out_data: np.ndarray, parents, backward) -> Tensor:
    """Wrap an op result, recording `backward` if any parent is tracked.

    `backward(grad_out)` must return one gradient array (or None) per
    parent, in order. Extension point for composite ops defined outside
    this module (losses, attention scaling).
    """
    out = Tensor(out_data)
    if _grad_enabled and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward
    return out


def backward(loss: Tensor):
    """Accumulate d(loss)/d(t) into `t.grad` for every tracked tensor.

    Traverses the reachable graph in exact reverse construction order, so
    repeated calls on identical graphs are bitwise deterministic.
    """
    if loss.data.size != 1:
        raise ValueError(f"backward requires a scalar loss, got shape {loss.data.shape}")
    if loss._backward is None:
        raise RuntimeError("backward called with no computation graph (forward not run?)")

    nodes = []
    seen = set()
    stack = [loss]
    while stack:
        t = stack.pop()
        if id(t) in seen:
            continue
        seen.add(id(t))
        nodes.append(t)
        stack.extend(t._parents)
    nodes.sort(key=lambda t: t._node_id, reverse=True)

    for t in nodes:
        if t._backward is not None:
            t.grad = None  # intermediates start fresh each pass
        elif t.requires_grad and t.grad is None:
            t.grad = np.zeros_like(t.data)
    loss.grad = np.ones_like(loss.data)

    for t in nodes:
        if t._backward is None or t.grad is None:
            continue
        grads = t._backward(t.grad)
        t.grad = None  # free the buffer as soon as parents are served
        for parent, g in zip(t._parents, grads):
            if g is None or not (parent.requires_grad or parent._backward is not None):
                continue
            if parent.grad is None:
                # copy: closures may hand the same array to several parents
                parent.grad = g.copy()
            else:
                parent.grad += g


# ---------------------------------------------------------------------------
# elementwise arithmetic


def _as_const(x, like: np.ndarray) -> Tensor:
    if isinstance(x, Tensor):
        return x
    return Tensor(np.full_like(like, float(x)))


def add(a: Tensor, b) -> Tensor:
    b = _as_const(b, a.data)
    if a.data.shape != b.data.shape:
        raise ValueError(f"add shape mismatch: {a.data.shape} vs {b.data.shape}")
    return apply_op(a.data + b.data, (a, b), lambda g: (g, g))


def sub(a: Tensor, b) -> Tensor:
    b = _as_const(b, a.data)
    if a.data.shape != b.data.shape:
        raise ValueError(f"sub shape mismatch: {a.data.shape} vs {b.data.shape}")
    return apply_op(a.data - b.data, (a, b), lambda g: (g, -g))


def mul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.shape != b.data.shape:
        raise ValueError(f"mul shape mismatch: {a.data.shape} vs {b.data.shape}")
    ad, bd = a.data, b.data
    return apply_op(ad * bd, (a, b), lambda g: (g * bd, g * ad))


def mul_scalar(a: Tensor, c: float) -> Tensor:
    return apply_op(a.data * c, (a,), lambda g: (g * c,))


def reshape(a: Tensor, shape) -> Tensor:
    old = a.data.shape
    return apply_op(a.data.reshape(shape), (a,), lambda g: (g.reshape(old),))


def crop_time(a: Tensor, length: int) -> Tensor:
    """Keep the first `length` entries of the last axis.

    Same-padding with an even kernel yields one extra output sample; the
    model crops it so pooling alone controls temporal length.
    """
    t = a.data.shape[-1]
    if not (1 <= length <= t):
        raise ValueError(f"crop_time: length {length} not in [1, {t}]")
    if length == t:
        return a
    in_shape = a.data.shape

    def back(g):
        dx = np.zeros(in_shape, dtype=g.dtype)
        dx[..., :length] = g
        return (dx,)

    return apply_op(a.data[..., :length].copy(), (a,), back)


def tsum(a: Tensor, axes=None) -> Tensor:
    """Sum over `axes` (all axes when None)."""
    in_shape = a.data.shape
    if axes is None:
        return apply_op(
            np.array(a.data.sum(), dtype=a.data.dtype),
            (a,),
            lambda g: (np.broadcast_to(g, in_shape).copy(),),
        )
    axes = tuple(axes) if not isinstance(axes, int) else (axes,)

    def back(g):
        expanded = np.expand_dims(g, axes)
        return (np.broadcast_to(expanded, in_shape).copy(),)

    return apply_op(a.data.sum(axis=axes), (a,), back)


def mean(a: Tensor, axes=None) -> Tensor:
    """Arithmetic mean over `axes`; remaining axes keep their order.

    This is the global-average-pool primitive used by both attention
    blocks (squeeze over feature/time, pooling of the attention matrix).
    """
    if axes is None:
        axes = tuple(range(a.data.ndim))
    axes = tuple(axes) if not isinstance(axes, int) else (axes,)
    if len(axes) == 0:
        raise ValueError("mean requires a nonempty axis set")
    for ax in axes:
        if not (0 <= ax < a.data.ndim):
            raise ValueError(f"mean axis {ax} out of range for rank {a.data.ndim}")
    count = 1
    for ax in axes:
        count *= a.data.shape[ax]
    if count == 0:
        raise ValueError("mean over an empty axis")
    in_shape = a.data.shape

    def back(g):
        expanded = np.expand_dims(g, axes)
        return (np.broadcast_to(expanded, in_shape) / count,)

    return apply_op(a.data.mean(axis=axes), (a,), back)


# ---------------------------------------------------------------------------
# activations


def relu(x: Tensor) -> Tensor:
    mask = x.data > 0
    return apply_op(np.where(mask, x.data, x.data.dtype.type(0)), (x,),
                    lambda g: (g * mask,))


def leaky_relu(x: Tensor, slope: float = 0.01) -> Tensor:
    # factor built in x's dtype so float32 graphs stay float32
    one = x.data.dtype.type(1)
    factor = np.where(x.data > 0, one, x.data.dtype.type(slope))
    return apply_op(x.data * factor, (x,), lambda g: (g * factor,))


def _sigmoid(x: np.ndarray) -> np.ndarray:
    # split by sign to avoid exp overflow
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    e = np.exp(x[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def sigmoid(x: Tensor) -> Tensor:
    y = _sigmoid(x.data)
    return apply_op(y, (x,), lambda g: (g * y * (1.0 - y),))


def softmax_rows(x: Tensor) -> Tensor:
    """Softmax along the last axis; rows of the output sum to 1."""
    if x.data.ndim < 1:
        raise ValueError("softmax_rows requires rank >= 1")
    shifted = x.data - x.data.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=-1, keepdims=True)

    def back(g):
        dot = (g * y).sum(axis=-1, keepdims=True)
        return ((g - dot) * y,)

    return apply_op(y, (x,), back)


# ---------------------------------------------------------------------------
# linear algebra


def linear(x: Tensor, w: Tensor, b: Tensor | None = None) -> Tensor:
    """Affine map on the last axis: x[..., D_in] @ w[D_out, D_in].T + b."""
    if x.data.shape[-1] != w.data.shape[1]:
        raise ValueError(f"linear: input dim {x.data.shape[-1]} != weight dim {w.data.shape[1]}")
    if b is not None and b.data.shape != (w.data.shape[0],):
        raise ValueError(f"linear: bias shape {b.data.shape} != ({w.data.shape[0]},)")
    xd, wd = x.data, w.data
    out = xd @ wd.T
    if b is not None:
        out = out + b.data

    def back(g):
        g2 = g.reshape(-1, wd.shape[0])
        x2 = xd.reshape(-1, wd.shape[1])
        dx = (g2 @ wd).reshape(xd.shape)
        dw = g2.T @ x2
        db = g2.sum(axis=0) if b is not None else None
        return (dx, dw, db) if b is not None else (dx, dw)

    parents = (x, w, b) if b is not None else (x, w)
    return apply_op(out, parents, back)


def bmm(a: Tensor, b: Tensor, transpose_b: bool = False) -> Tensor:
    """Batched matmul a[B,M,K] @ b[B,K,N] (or b[B,N,K] with transpose_b)."""
    ad, bd = a.data, b.data
    bmat = np.swapaxes(bd, -1, -2) if transpose_b else bd
    if ad.shape[-1] != bmat.shape[-2] or ad.shape[0] != bd.shape[0]:
        raise ValueError(f"bmm shape mismatch: {ad.shape} vs {bd.shape}")
    out = ad @ bmat

    def back(g):
        da = g @ np.swapaxes(bmat, -1, -2)
        db_ = np.swapaxes(ad, -1, -2) @ g
        if transpose_b:
            db_ = np.swapaxes(db_, -1, -2)
        return (da, db_)

    return apply_op(out, (a, b), back)


def scale_channels(u: Tensor, s: Tensor) -> Tensor:
    """Multiply u[B, J, ...] by per-(batch, electrode) scales s[B, J].

    The attention primitive: every trailing feature of electrode j in
    sample b is scaled by the same s[b, j].
    """
    if s.data.shape != u.data.shape[:2]:
        raise ValueError(f"scale_channels: scales {s.data.shape} != leading dims of {u.data.shape}")
    extra = u.data.ndim - 2
    s_b = s.data.reshape(s.data.shape + (1,) * extra)
    ud = u.data

    def back(g):
        du = g * s_b
        ds = (g * ud).sum(axis=tuple(range(2, ud.ndim))) if extra else g * ud
        return (du, ds)

    return apply_op(ud * s_b, (u, s), back)


# ---------------------------------------------------------------------------
# convolution / pooling / batch norm


def _conv_out_len(t: int, k: int, stride: int, padding: int) -> int:
    return (t + 2 * padding - k) // stride + 1


def _pad_last(x: np.ndarray, left: int, right: int) -> np.ndarray:
    if left == 0 and right == 0:
        return x
    n, c, t = x.shape
    out = np.zeros((n, c, t + left + right), dtype=x.dtype)
    out[:, :, left : left + t] = x
    return out


def _im2col(x: np.ndarray, k: int, stride: int, padding: int) -> np.ndarray:
    """x[N, C, T] -> columns [N, C * k, T_out] (copies).

    The window axis comes last so the gather runs along contiguous memory.
    """
    xp = _pad_last(x, padding, padding)
    n, c, tp = xp.shape
    t_out = (tp - k) // stride + 1
    s0, s1, s2 = xp.strides
    view = as_strided(xp, (n, c, k, t_out), (s0, s1, s2, s2 * stride))
    return np.ascontiguousarray(view).reshape(n, c * k, t_out)


def conv1d(x: Tensor, w: Tensor, b: Tensor | None, stride: int = 1, padding: int = 0) -> Tensor:
    """Temporal convolution: x[N, C_in, T], w[F_out, C_in, K] -> [N, F_out, T'].

    The leading axis is never mixed, so per-electrode convolution is just
    a reshape of the batch/electrode axes into N.
    """
    n, c_in, t = x.data.shape
    f_out, c_w, k = w.data.shape
    if c_w != c_in:
        raise ValueError(f"conv1d: input channels {c_in} != kernel channels {c_w}")
    if stride < 1:
        raise ValueError("conv1d: stride must be >= 1")
    if k > t + 2 * padding:
        raise ValueError(f"conv1d: kernel {k} longer than padded input {t + 2 * padding}")
    t_out = _conv_out_len(t, k, stride, padding)
    if t_out < 1:
        raise ValueError("conv1d: empty output")
    if b is not None and b.data.shape != (f_out,):
        raise ValueError(f"conv1d: bias shape {b.data.shape} != ({f_out},)")

    xd, wd = x.data, w.data
    if (
        stride == 1
        and k > 1
        and padding <= k - 1
        and xd.dtype == np.float32
        and xd.size >= (1 << 15)
    ):
        # big single-precision batches: spectral convolution beats im2col
        return _conv1d_fft(x, w, b, padding)
    wmat = wd.reshape(f_out, c_in * k)
    cols = _im2col(xd, k, stride, padding)
    out = np.matmul(wmat, cols)
    if b is not None:
        out += b.data[:, None]

    def back(g):
        dw = np.matmul(g, cols.transpose(0, 2, 1)).sum(axis=0).reshape(f_out, c_in, k)
        db = g.sum(axis=(0, 2)) if b is not None else None
        if stride == 1 and padding <= k - 1:
            # dx is the correlation of g with the flipped kernel: one GEMM
            # instead of a k-step scatter loop.
            gp = _pad_last(g, k - 1, k - 1)[:, :, padding:]
            s0, s1, s2 = gp.strides
            gview = as_strided(gp, (n, f_out, k, t), (s0, s1, s2, s2))
            gcols = np.ascontiguousarray(gview).reshape(n, f_out * k, t)
            wflip = wd[:, :, ::-1].transpose(1, 0, 2).reshape(c_in, f_out * k)
            dx = np.matmul(wflip, gcols)
        else:
            dcols = np.matmul(wmat.T, g).reshape(n, c_in, k, t_out)
            dxp = np.zeros((n, c_in, t + 2 * padding), dtype=xd.dtype)
            for j in range(k):
                dxp[:, :, j : j + stride * t_out : stride] += dcols[:, :, j, :]
            dx = dxp[:, :, padding : padding + t] if padding else dxp
        return (dx, dw, db) if b is not None else (dx, dw)

    parents = (x, w, b) if b is not None else (x, w)
    return apply_op(out, parents, back)


def _conv1d_fft(x: Tensor, w: Tensor, b: Tensor | None, padding: int) -> Tensor:
    """Stride-1 convolution through real FFTs (single-precision fast path).

    Same linear map as the im2col path up to float rounding: the channel
    mix happens per frequency bin, so each layer costs two transforms and
    one batched GEMM instead of a k-times-duplicated gather.
    """
    n, c_in, t = x.data.shape
    f_out, _, k = w.data.shape
    p = padding
    xd, wd = x.data, w.data
    L = _fft.next_fast_len(t + k - 1, real=True)

    X = _fft.rfft(xd, L, axis=-1)
    Xb = np.ascontiguousarray(X.transpose(2, 0, 1))  # [bin, n, c]
    wf = _fft.rfft(wd[:, :, ::-1], L, axis=-1)
    Yb = np.matmul(Xb, np.ascontiguousarray(wf.transpose(2, 1, 0)))
    Y = np.ascontiguousarray(Yb.transpose(1, 2, 0))
    out = np.ascontiguousarray(
        _fft.irfft(Y, L, axis=-1)[:, :, k - 1 - p : k - 1 - p + t]
    )
    if b is not None:
        out += b.data[:, None]

    def back(g):
        G = _fft.rfft(g, L, axis=-1)
        Gb = np.ascontiguousarray(G.transpose(2, 0, 1))  # [bin, n, f]
        # dx: g convolved with the unflipped kernel, offset by the padding
        Wn = _fft.rfft(wd, L, axis=-1)
        DXb = np.matmul(Gb, np.ascontiguousarray(Wn.transpose(2, 0, 1)))
        DX = np.ascontiguousarray(DXb.transpose(1, 2, 0))
        dx = _fft.irfft(DX, L, axis=-1)[:, :, p : p + t]
        # dw: cross-correlation of x with g, row-summed inside the GEMM
        DWb = np.matmul(Xb.transpose(0, 2, 1), np.conj(Gb))  # [bin, c, f]
        dw_full = _fft.irfft(DWb.transpose(1, 2, 0), L, axis=-1)
        dw = dw_full[:, :, (np.arange(k) - p) % L].transpose(1, 0, 2)
        db = g.sum(axis=(0, 2)) if b is not None else None
        return (dx, dw, db) if b is not None else (dx, dw)

    parents = (x, w, b) if b is not None else (x, w)
    return apply_op(out, parents, back)


def maxpool1d(x: Tensor, k: int, stride: int) -> Tensor:
    """Max over sliding windows; gradient goes to the first max per window."""
    n, c, t = x.data.shape
    if k > t:
        raise ValueError(f"maxpool1d: window {k} > length {t}")
    if stride < 1:
        raise ValueError("maxpool1d: stride must be >= 1")
    t_out = (t - k) // stride + 1
    xd = x.data

    if k == 2 and stride == 2 and xd.flags.c_contiguous:
        # disjoint pairs: compare halves directly, no argmax materialized
        xw = xd[:, :, : 2 * t_out].reshape(n, c, t_out, 2)
        x0, x1 = xw[..., 0], xw[..., 1]
        out = np.maximum(x0, x1)

        def back_pairs(g):
            dx = np.zeros_like(xd)
            dw = dx[:, :, : 2 * t_out].reshape(n, c, t_out, 2)
            win0 = x0 >= x1  # ties go to the first element, like argmax
            np.multiply(g, win0, out=dw[..., 0])
            np.multiply(g, ~win0, out=dw[..., 1])
            return (dx,)

        return apply_op(out, (x,), back_pairs)

    s0, s1, s2 = xd.strides
    win = as_strided(xd, (n, c, t_out, k), (s0, s1, s2 * stride, s2))
    arg = win.argmax(axis=-1)  # np.argmax takes the first occurrence on ties
    out = np.take_along_axis(win, arg[..., None], axis=-1)[..., 0]

    def back(g):
        dx = np.zeros_like(xd)
        ni, ci, ti = np.mgrid[0:n, 0:c, 0:t_out]
        pos = ti * stride + arg
        if stride >= k:  # windows disjoint, indices unique
            dx[ni, ci, pos] = g
        else:
            np.add.at(dx, (ni, ci, pos), g)
        return (dx,)

    return apply_op(out, (x,), back)


class BatchNormState:
    """Running statistics for one batch-norm layer (per feature channel)."""

    def __init__(self, channels: int, momentum: float = 0.1, eps: float = 1e-5, dtype=np.float64):
        self.running_mean = np.zeros(channels, dtype=dtype)
        self.running_var = np.ones(channels, dtype=dtype)
        self.momentum = momentum
        self.eps = eps
        self.initialized = False


def batchnorm(x: Tensor, gamma: Tensor, beta: Tensor, state: BatchNormState, training: bool) -> Tensor:
    """Normalize x[N, C, T] per channel C over the (N, T) axes.

    N already folds batch and electrode axes together, so statistics run
    over batch, electrode, and time as required. Train mode uses batch
    statistics and updates the running ones (EMA); eval mode requires the
    running statistics to have been populated.
    """
    n, c, t = x.data.shape
    if gamma.data.shape != (c,) or beta.data.shape != (c,):
        raise ValueError(f"batchnorm: gamma/beta must have shape ({c},)")
    eps = state.eps
    xd = x.data

    if training:
        mu = xd.mean(axis=(0, 2))
        var = xd.var(axis=(0, 2))
        m = state.momentum
        state.running_mean = (1 - m) * state.running_mean + m * mu
        state.running_var = (1 - m) * state.running_var + m * var
        state.initialized = True
    else:
        if not state.initialized:
            raise RuntimeError("batchnorm: eval mode before any train-mode call (uninitialized stats)")
        mu = state.running_mean.astype(xd.dtype)
        var = state.running_var.astype(xd.dtype)

    ivar = 1.0 / np.sqrt(var + eps)
    # fold normalization and affine into one scale/shift pair per channel
    coeff = gamma.data * ivar
    out = xd * coeff[None, :, None]
    out += (beta.data - mu * coeff)[None, :, None]

    def back(g):
        sg = g.sum(axis=(0, 2))
        sgx = np.einsum("nct,nct->c", g, xd)
        dgamma = ivar * (sgx - mu * sg)
        dbeta = sg
        if training:
            count = n * t
            # dx = a*g + c*x + b elementwise, channel scalars from the
            # closed-form batch-norm gradient
            a = ivar * gamma.data
            cc = -ivar * a * dgamma / count
            bb = -a * sg / count - cc * mu
            dx = g * a[None, :, None]
            dx += xd * cc[None, :, None]
            dx += bb[None, :, None]
        else:
            dx = g * coeff[None, :, None]
        return (dx, dgamma, dbeta)

    return apply_op(out, (x, gamma, beta), back)


# ---------------------------------------------------------------------------
# numerical gradient oracle


def finite_diff_grad(f, x: Tensor, h: float = 1e-5) -> np.ndarray:
    """Central-difference gradient of a scalar function of one tensor.

    Double precision recommended; f must be pure in x (its value may not
    depend on prior calls).
    """
    if h <= 0:
        raise ValueError("finite_diff_grad: h must be positive")
    flat = x.data.reshape(-1)
    grad = np.zeros_like(flat)

    def eval_at() -> float:
        with no_grad():
            out = f(x)
        return out.item() if isinstance(out, Tensor) else float(out)

    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        fp = eval_at()
        flat[i] = orig - h
        fm = eval_at()
        flat[i] = orig
        grad[i] = (fp - fm) / (2 * h)
    return grad.reshape(x.data.shape)


def gradient_error(analytic: np.ndarray, numeric: np.ndarray, atol: float = 1e-9) -> float:
    """Worst elementwise relative error, ignoring pairs that agree within atol."""
    diff = np.abs(analytic - numeric)
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-12)
    rel = diff / denom
    rel[diff < atol] = 0.0
    return float(rel.max()) if rel.size else 0.0


def check_gradients(f, params, h: float = 1e-5, atol: float = 1e-9) -> float:
    """Compare backward() gradients of f(params) against finite differences.

    `f` maps the parameter list to a scalar Tensor. Returns the worst
    relative error over all parameter elements.
    """
    loss = f(params)
    for p in params:
        p.zero_grad()
    backward(loss)
    worst = 0.0
    for idx, p in enumerate(params):
        def f_single(_x, _i=idx):
            return f(params)

        numeric = finite_diff_grad(f_single, p, h=h)
        worst = max(worst, gradient_error(p.grad, numeric, atol=atol))
    return worst
