"""Finite-difference verification battery over every op and the full model.

Each check contracts the op output against a fixed random coefficient
tensor, so the scalar is sensitive to every output element and stays at
unit scale (large scalars drown small gradients in central-difference
round-off). Everything runs in double precision.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .model import AttentionCnn, ModelConfig

PER_OP_TOL = 1e-6
END_TO_END_TOL = 1e-4


@dataclass
class CheckResult:
    name: str
    rel_err: float
    tol: float

    @property
    def ok(self) -> bool:
        return self.rel_err < self.tol

    def format_line(self) -> str:
        status = "ok" if self.ok else "FAIL"
        return f"{status:4s} {self.name:28s} rel err {self.rel_err:.3e} (tol {self.tol:.0e})"


def _tensor(rng, *shape, lo=-1.0, hi=1.0):
    return ad.Tensor(rng.uniform(lo, hi, size=shape), requires_grad=True)


def _contract(out, coef):
    return ad.tsum(ad.mul(out, ad.Tensor(coef)))


def _check(name, build, seed, tol=PER_OP_TOL) -> CheckResult:
    """build(rng) -> (params, f) with f mapping the param list to an op output."""
    rng = np.random.default_rng(seed)
    params, f = build(rng)
    coef = rng.uniform(-1.0, 1.0, size=f(params).data.shape)
    worst = ad.check_gradients(lambda ps: _contract(f(ps), coef), params)
    return CheckResult(name, worst, tol)


def _away_from_zero(rng, *shape):
    """Inputs bounded away from 0 so kinked activations see no FD crossing."""
    mag = rng.uniform(0.2, 1.0, size=shape)
    sign = np.where(rng.uniform(size=shape) < 0.5, -1.0, 1.0)
    return ad.Tensor(mag * sign, requires_grad=True)


def op_checks(seed: int = 0) -> list[CheckResult]:
    checks = [
        ("add", lambda rng: (
            [_tensor(rng, 3, 5), _tensor(rng, 3, 5)],
            lambda ps: ad.add(ps[0], ps[1]))),
        ("sub", lambda rng: (
            [_tensor(rng, 3, 5), _tensor(rng, 3, 5)],
            lambda ps: ad.sub(ps[0], ps[1]))),
        ("mul", lambda rng: (
            [_tensor(rng, 3, 5), _tensor(rng, 3, 5)],
            lambda ps: ad.mul(ps[0], ps[1]))),
        ("mul_scalar", lambda rng: (
            [_tensor(rng, 3, 5)],
            lambda ps: ad.mul_scalar(ps[0], 2.5))),
        ("reshape", lambda rng: (
            [_tensor(rng, 3, 4)],
            lambda ps: ad.reshape(ps[0], (2, 6)))),
        ("crop_time", lambda rng: (
            [_tensor(rng, 2, 3, 9)],
            lambda ps: ad.crop_time(ps[0], 7))),
        ("tsum_axes", lambda rng: (
            [_tensor(rng, 2, 3, 4)],
            lambda ps: ad.tsum(ps[0], axes=(0, 2)))),
        ("mean_axes", lambda rng: (
            [_tensor(rng, 2, 3, 4)],
            lambda ps: ad.mean(ps[0], axes=(1,)))),
        ("relu", lambda rng: (
            [_away_from_zero(rng, 4, 6)],
            lambda ps: ad.relu(ps[0]))),
        ("leaky_relu", lambda rng: (
            [_away_from_zero(rng, 4, 6)],
            lambda ps: ad.leaky_relu(ps[0]))),
        ("sigmoid", lambda rng: (
            [_tensor(rng, 4, 6)],
            lambda ps: ad.sigmoid(ps[0]))),
        ("softmax_rows", lambda rng: (
            [_tensor(rng, 4, 5)],
            lambda ps: ad.softmax_rows(ps[0]))),
        ("linear", lambda rng: (
            [_tensor(rng, 5, 4), _tensor(rng, 3, 4), _tensor(rng, 3)],
            lambda ps: ad.linear(ps[0], ps[1], ps[2]))),
        ("bmm", lambda rng: (
            [_tensor(rng, 2, 3, 4), _tensor(rng, 2, 4, 5)],
            lambda ps: ad.bmm(ps[0], ps[1]))),
        ("bmm_transpose", lambda rng: (
            [_tensor(rng, 2, 3, 4), _tensor(rng, 2, 5, 4)],
            lambda ps: ad.bmm(ps[0], ps[1], transpose_b=True))),
        ("scale_channels", lambda rng: (
            [_tensor(rng, 2, 3, 5), _tensor(rng, 2, 3, lo=0.1, hi=0.9)],
            lambda ps: ad.scale_channels(ps[0], ps[1]))),
        ("conv1d_same", lambda rng: (
            [_tensor(rng, 2, 3, 10), _tensor(rng, 4, 3, 5), _tensor(rng, 4)],
            lambda ps: ad.conv1d(ps[0], ps[1], ps[2], stride=1, padding=2))),
        ("conv1d_strided", lambda rng: (
            [_tensor(rng, 2, 3, 11), _tensor(rng, 4, 3, 4), _tensor(rng, 4)],
            lambda ps: ad.conv1d(ps[0], ps[1], ps[2], stride=2, padding=3))),
        ("conv1d_wide_pad", lambda rng: (
            [_tensor(rng, 2, 2, 8), _tensor(rng, 3, 2, 3), _tensor(rng, 3)],
            lambda ps: ad.conv1d(ps[0], ps[1], ps[2], stride=1, padding=4))),
        ("maxpool_2_2", lambda rng: (
            [_tensor(rng, 2, 3, 10)],
            lambda ps: ad.maxpool1d(ps[0], 2, 2))),
        ("maxpool_3_2", lambda rng: (
            [_tensor(rng, 2, 3, 11)],
            lambda ps: ad.maxpool1d(ps[0], 3, 2))),
    ]

    def bn_train(rng):
        x = _tensor(rng, 4, 3, 6)
        gamma = _tensor(rng, 3, lo=0.5, hi=1.5)
        beta = _tensor(rng, 3)
        state = ad.BatchNormState(3)
        return [x, gamma, beta], lambda ps: ad.batchnorm(ps[0], ps[1], ps[2], state, training=True)

    def bn_eval(rng):
        x = _tensor(rng, 4, 3, 6)
        gamma = _tensor(rng, 3, lo=0.5, hi=1.5)
        beta = _tensor(rng, 3)
        state = ad.BatchNormState(3)
        with ad.no_grad():
            ad.batchnorm(x, gamma, beta, state, training=True)  # populate running stats
        return [x, gamma, beta], lambda ps: ad.batchnorm(ps[0], ps[1], ps[2], state, training=False)

    checks.append(("batchnorm_train", bn_train))
    checks.append(("batchnorm_eval", bn_eval))
    return [_check(name, build, seed) for name, build in checks]


def end_to_end_check(seed: int = 0) -> CheckResult:
    """Whole-model gradient check: tiny double-precision variant with both
    attention paths active, scored through a unit-scale contraction."""
    cfg = ModelConfig(
        n_electrodes=4,
        n_timepoints=32,
        n_conv_blocks=3,
        residual_period=3,
        hidden_features=8,
        kernel_size=5,
        d_model=8,
        sa_dk=4,
        se_ratio=2,
        task="position",
        use_se=True,
        use_sa=True,
        dtype="float64",
        seed=seed,
    )
    model = AttentionCnn(cfg)
    rng = np.random.default_rng(seed + 1)
    x = rng.standard_normal((2, cfg.n_electrodes, cfg.n_timepoints))
    coef = rng.uniform(-1.0, 1.0, size=(2, 2))

    def f(_params):
        pred, _ = model.forward(x, training=True)
        return _contract(pred, coef)

    worst = ad.check_gradients(f, model.parameters())
    return CheckResult("end_to_end_tiny_model", worst, END_TO_END_TOL)


def run_battery(seed: int = 0) -> list[CheckResult]:
    return op_checks(seed) + [end_to_end_check(seed)]
