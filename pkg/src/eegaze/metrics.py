"""Training losses and evaluation metrics for gaze regression.

Angle quantities wrap at +-pi via atan2(sin, cos), so a prediction off by
a full turn costs nothing. Pixel errors convert to visual-angle degrees
through a fixed pixels-per-degree factor.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .autodiff import Tensor, apply_op

# Screen geometry of the source recordings is not published; this factor
# reproduces the published pixel-to-degree ratio (about 115.01 px / 2.39 deg).
DEFAULT_PX_PER_DEGREE = 48.12


def wrap_angle(a: np.ndarray) -> np.ndarray:
    """Map any angle into [-pi, pi] with correct wrapping."""
    return np.arctan2(np.sin(a), np.cos(a))


def _target_array(target, like: np.ndarray) -> np.ndarray:
    t = target.data if isinstance(target, Tensor) else np.asarray(target, dtype=like.dtype)
    if t.shape != like.shape:
        raise ValueError(f"loss shape mismatch: pred {like.shape} vs target {t.shape}")
    return t


def smooth_l1(pred: Tensor, target, beta: float = 1.0) -> Tensor:
    """Mean smooth-L1: quadratic within +-beta, linear outside.

    0.5*d^2/beta for |d| < beta, else |d| - 0.5*beta; mean over all
    elements.
    """
    if beta <= 0:
        raise ValueError("smooth_l1: beta must be positive")
    t = _target_array(target, pred.data)
    d = pred.data - t
    absd = np.abs(d)
    quad = absd < beta
    elems = np.where(quad, 0.5 * d * d / beta, absd - 0.5 * beta)
    n = d.size

    def back(g):
        gd = np.where(quad, d / beta, np.sign(d)) * (g / n)
        return (gd,)

    return apply_op(np.array(elems.mean(), dtype=pred.data.dtype), (pred,), back)


def angle_loss(pred: Tensor, target) -> Tensor:
    """Mean absolute wrapped angular difference |atan2(sin(p-t), cos(p-t))|.

    Range [0, pi]; gradient w.r.t. p is +-1/n away from the wrap points.
    """
    t = _target_array(target, pred.data)
    w = wrap_angle(pred.data - t)
    n = w.size

    def back(g):
        return (np.sign(w) * (g / n),)

    return apply_op(np.array(np.abs(w).mean(), dtype=pred.data.dtype), (pred,), back)


def euclidean_distance(pred: np.ndarray, target: np.ndarray) -> tuple[np.ndarray, float]:
    """Per-sample Euclidean distances between [B, 2] pixel coordinates, plus the mean."""
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape or pred.ndim != 2 or pred.shape[1] != 2:
        raise ValueError(f"euclidean_distance expects matching [B, 2], got {pred.shape} vs {target.shape}")
    d = np.sqrt(((pred - target) ** 2).sum(axis=1))
    return d, float(d.mean())


def px_to_visual_angle(px: float, px_per_degree: float = DEFAULT_PX_PER_DEGREE) -> float:
    """Convert a pixel distance to visual-angle degrees."""
    if px_per_degree <= 0:
        raise ValueError("px_to_visual_angle: px_per_degree must be positive")
    return px / px_per_degree


def rmse(pred: np.ndarray, target: np.ndarray) -> float:
    pred = np.asarray(pred, dtype=np.float64).reshape(-1)
    target = np.asarray(target, dtype=np.float64).reshape(-1)
    if pred.shape != target.shape:
        raise ValueError("rmse: shape mismatch")
    return float(np.sqrt(((pred - target) ** 2).mean()))


def rmse_angle(pred: np.ndarray, target: np.ndarray) -> float:
    """RMSE of the wrapped angular differences (radians, always <= pi)."""
    pred = np.asarray(pred, dtype=np.float64).reshape(-1)
    target = np.asarray(target, dtype=np.float64).reshape(-1)
    if pred.shape != target.shape:
        raise ValueError("rmse_angle: shape mismatch")
    w = wrap_angle(pred - target)
    return float(np.sqrt((w**2).mean()))


@dataclass
class MetricReport:
    """Evaluation summary for one task; per-sample errors kept for statistics."""

    task: str
    n_samples: int
    mean_euclidean_px: float | None = None
    mean_visual_angle_deg: float | None = None
    rmse_angle_rad: float | None = None
    rmse_amplitude_px: float | None = None
    per_sample_errors: np.ndarray = field(default=None, repr=False)

    def to_dict(self) -> dict:
        out = {"task": self.task, "n_samples": self.n_samples}
        for key in ("mean_euclidean_px", "mean_visual_angle_deg", "rmse_angle_rad", "rmse_amplitude_px"):
            val = getattr(self, key)
            if val is not None:
                out[key] = val
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def compute_metrics(
    task: str, pred: np.ndarray, target: np.ndarray, px_per_degree: float = DEFAULT_PX_PER_DEGREE
) -> MetricReport:
    """Build the MetricReport for a prediction batch of the given task."""
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if task == "position":
        per_sample, mean_px = euclidean_distance(pred, target)
        return MetricReport(
            task=task,
            n_samples=pred.shape[0],
            mean_euclidean_px=mean_px,
            mean_visual_angle_deg=px_to_visual_angle(mean_px, px_per_degree),
            per_sample_errors=per_sample,
        )
    if task == "angle":
        errs = np.abs(wrap_angle(pred.reshape(-1) - target.reshape(-1)))
        return MetricReport(
            task=task,
            n_samples=pred.shape[0],
            rmse_angle_rad=rmse_angle(pred, target),
            per_sample_errors=errs,
        )
    if task == "amplitude":
        errs = np.abs(pred.reshape(-1) - target.reshape(-1))
        return MetricReport(
            task=task,
            n_samples=pred.shape[0],
            rmse_amplitude_px=rmse(pred, target),
            per_sample_errors=errs,
        )
    raise ValueError(f"unknown task {task!r}")
