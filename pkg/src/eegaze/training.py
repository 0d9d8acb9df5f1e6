"""Deterministic training, evaluation, and the four-variant benchmark.

The protocol: subject-disjoint splits, smooth-L1 for position/amplitude
and wrapped angle loss for angle, Adam, model selection by the validation
task metric, test metrics computed once on the selected parameters.
Everything reported is a pure function of (configs, dataset bytes); wall
clock is kept on the result object but never serialized, so artifacts are
byte-reproducible.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .autodiff import backward, no_grad
from .data import EegDataset, split_by_subject, synth_generate
from .metrics import (
    DEFAULT_PX_PER_DEGREE,
    MetricReport,
    angle_loss,
    compute_metrics,
    smooth_l1,
)
from .model import AttentionCnn, ModelConfig, save_checkpoint, variant_label
from .optim import Adam, clip_grad_norm

# Dataset task providing the labels for each model task; direction datasets
# carry (amplitude, angle) and feed two separate single-output models.
_DS_TASK = {"position": "position", "amplitude": "direction", "angle": "direction"}
_LABEL_COLS = {"position": slice(0, 2), "amplitude": slice(0, 1), "angle": slice(1, 2)}

# Published results quoted alongside benchmark output for context only;
# nothing asserts against them (synthetic data is not the real benchmark).
REFERENCE_RESULTS = {
    "angle_rmse_rad": {
        "CNN": "0.1947±0.021",
        "CNN + SE": "0.1754±0.007",
        "CNN + SA": "0.1786±0.010",
        "CNN + both": "0.1707±0.011",
    },
    "amplitude_rmse_px": {
        "CNN": "57.4486±2.053",
        "CNN + SE": "55.1656±3.513",
        "CNN + SA": "52.1583±1.943",
        "CNN + both": "52.2782±1.169",
    },
    "euclidean_px": {
        "CNN": "115.0143±0.648 (2.39±0.010)",
        "CNN + SE": "109.5816±0.238 (2.27±0.004)",
        "CNN + SA": "112.3823±0.851 (2.33±0.013)",
        "CNN + both": "110.0523±0.670 (2.28±0.010)",
    },
}


@dataclass
class TrainConfig:
    batch_size: int = 32
    epochs: int = 50
    lr: float = 1e-4
    seed: int = 0
    clip_grad: float | None = None  # optional stability aid, off by default
    px_per_degree: float = DEFAULT_PX_PER_DEGREE

    def validate(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        # lr = 0 is allowed: it freezes parameters, which the no-op
        # training contract relies on.
        if self.lr < 0:
            raise ValueError("lr must be nonnegative")
        if self.clip_grad is not None and self.clip_grad <= 0:
            raise ValueError("clip_grad must be positive when set")


@dataclass
class RunMetrics:
    seed: int
    train_loss_per_epoch: list[float]
    val_metric_per_epoch: list[float]
    selected_epoch: int
    test_metrics: dict | None = None
    wall_clock_s: float = 0.0  # informational; excluded from serialization

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "train_loss_per_epoch": self.train_loss_per_epoch,
            "val_metric_per_epoch": self.val_metric_per_epoch,
            "selected_epoch": self.selected_epoch,
            "test_metrics": self.test_metrics,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def config_hash(model_cfg: ModelConfig, train_cfg: TrainConfig) -> str:
    """Short stable digest naming the run directory for this configuration."""
    payload = json.dumps(
        {"model": dataclasses.asdict(model_cfg), "train": dataclasses.asdict(train_cfg)},
        sort_keys=True,
    )
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:12]


def _check_compat(model_cfg: ModelConfig, ds: EegDataset, name: str):
    if ds.n_electrodes != model_cfg.n_electrodes or ds.n_timepoints != model_cfg.n_timepoints:
        raise ValueError(
            f"{name} dataset is [{ds.n_electrodes}, {ds.n_timepoints}] but model expects "
            f"[{model_cfg.n_electrodes}, {model_cfg.n_timepoints}]"
        )
    if ds.task != _DS_TASK[model_cfg.task]:
        raise ValueError(
            f"model task {model_cfg.task!r} needs a {_DS_TASK[model_cfg.task]!r} dataset, "
            f"{name} is {ds.task!r}"
        )


def _arrays(ds: EegDataset, model_cfg: ModelConfig) -> tuple[np.ndarray, np.ndarray]:
    x = ds.signals_array().astype(model_cfg.np_dtype)
    y = ds.labels_array().astype(np.float64)[:, _LABEL_COLS[model_cfg.task]]
    return x, y


def _loss(pred, target, task: str):
    return angle_loss(pred, target) if task == "angle" else smooth_l1(pred, target)


def _val_metric(report: MetricReport) -> float:
    if report.task == "position":
        return report.mean_euclidean_px
    if report.task == "angle":
        return report.rmse_angle_rad
    return report.rmse_amplitude_px


def _snapshot(model: AttentionCnn) -> dict:
    state = {name: p.data.copy() for name, p in model.named_parameters()}
    for i, blk in enumerate(model.blocks):
        st = blk.bn_state
        state[f"__bn{i}"] = (st.running_mean.copy(), st.running_var.copy(), st.initialized)
    return state


def _restore(model: AttentionCnn, state: dict):
    for name, p in model.named_parameters():
        p.data = state[name].copy()
    for i, blk in enumerate(model.blocks):
        mean_, var_, init = state[f"__bn{i}"]
        blk.bn_state.running_mean = mean_.copy()
        blk.bn_state.running_var = var_.copy()
        blk.bn_state.initialized = init


def train(
    model_cfg: ModelConfig,
    train_cfg: TrainConfig,
    train_ds: EegDataset,
    val_ds: EegDataset,
    run_dir=None,
) -> tuple[AttentionCnn, RunMetrics]:
    """Train and return (model restored to the best-validation epoch, metrics).

    Raises on subject overlap between train and val (leakage guard) and on
    non-finite loss. When run_dir is given, the best checkpoint and run
    metrics are written there.
    """
    train_cfg.validate()
    _check_compat(model_cfg, train_ds, "train")
    _check_compat(model_cfg, val_ds, "val")
    overlap = set(train_ds.subject_ids().tolist()) & set(val_ds.subject_ids().tolist())
    if overlap:
        raise ValueError(f"subject leakage between train and val splits: {sorted(overlap)}")
    if not train_ds.samples or not val_ds.samples:
        raise ValueError("train and val datasets must be nonempty")

    start = time.perf_counter()
    model = AttentionCnn(model_cfg)
    opt = Adam(model.parameters(), lr=train_cfg.lr)
    x_train, y_train = _arrays(train_ds, model_cfg)
    x_val, y_val = _arrays(val_ds, model_cfg)
    n = x_train.shape[0]

    losses_per_epoch: list[float] = []
    val_per_epoch: list[float] = []
    best_metric = np.inf
    best_epoch = -1
    best_state = None
    ckpt_path = None
    if run_dir is not None:
        run_dir = Path(run_dir)
        run_dir.mkdir(parents=True, exist_ok=True)
        ckpt_path = run_dir / "best.ckpt"

    for epoch in range(train_cfg.epochs):
        rng = np.random.default_rng(np.random.SeedSequence(entropy=train_cfg.seed, spawn_key=(epoch,)))
        order = rng.permutation(n)
        batch_losses = []
        for s in range(0, n, train_cfg.batch_size):
            idx = order[s : s + train_cfg.batch_size]
            pred, _ = model.forward(x_train[idx], training=True)
            loss = _loss(pred, y_train[idx], model_cfg.task)
            value = loss.item()
            if not np.isfinite(value):
                raise FloatingPointError(
                    f"non-finite training loss {value} at epoch {epoch}, batch {s // train_cfg.batch_size}"
                )
            opt.zero_grad()
            backward(loss)
            if train_cfg.clip_grad is not None:
                clip_grad_norm(model.parameters(), train_cfg.clip_grad)
            opt.step()
            batch_losses.append(value)
        losses_per_epoch.append(float(np.mean(batch_losses)))

        report = compute_metrics(
            model_cfg.task, model.predict(x_val), y_val, px_per_degree=train_cfg.px_per_degree
        )
        metric = _val_metric(report)
        val_per_epoch.append(metric)
        if metric < best_metric:
            best_metric = metric
            best_epoch = epoch
            best_state = _snapshot(model)
            if ckpt_path is not None:
                save_checkpoint(model, ckpt_path)

    _restore(model, best_state)
    metrics = RunMetrics(
        seed=train_cfg.seed,
        train_loss_per_epoch=losses_per_epoch,
        val_metric_per_epoch=val_per_epoch,
        selected_epoch=best_epoch,
        wall_clock_s=time.perf_counter() - start,
    )
    if run_dir is not None:
        (run_dir / "run_metrics.json").write_text(metrics.to_json(), encoding="utf-8")
    return model, metrics


VARIANTS = ((False, False), (True, False), (False, True), (True, True))

_METRIC_KEYS = {
    "position": ("euclidean_px", "visual_angle_deg"),
    "amplitude": ("amplitude_rmse_px",),
    "angle": ("angle_rmse_rad",),
}


@dataclass
class BenchmarkTable:
    """Mean ± std per variant row, with published values quoted as context."""

    task: str
    rows: list[dict] = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"task": self.task, "rows": self.rows, "metadata": self.metadata}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def format_text(self) -> str:
        """Delimited table, one row per variant."""
        metric_names = list(self.rows[0]["metrics"]) if self.rows else []
        lines = ["\t".join(["variant"] + metric_names)]
        for row in self.rows:
            cells = [row["label"]]
            for name in metric_names:
                m = row["metrics"][name]
                cells.append(f"{m['mean']:.4f}±{m['std']:.4f}")
            lines.append("\t".join(cells))
        return "\n".join(lines) + "\n"


def _report_values(report: MetricReport) -> dict[str, float]:
    if report.task == "position":
        return {
            "euclidean_px": report.mean_euclidean_px,
            "visual_angle_deg": report.mean_visual_angle_deg,
        }
    if report.task == "amplitude":
        return {"amplitude_rmse_px": report.rmse_amplitude_px}
    return {"angle_rmse_rad": report.rmse_angle_rad}


def run_benchmark(
    task: str,
    model_cfg: ModelConfig,
    train_cfg: TrainConfig,
    data_args: dict,
    n_seeds: int = 3,
    variants=VARIANTS,
    run_dir=None,
) -> BenchmarkTable:
    """Train every variant for n_seeds seeds and aggregate test metrics.

    `task` is the dataset task: "position" trains one model per run,
    "direction" trains separate amplitude and angle models on the same
    split. Datasets and splits are regenerated per seed, identically for
    all variants, so rows are comparable.
    """
    if n_seeds < 1:
        raise ValueError("n_seeds must be >= 1")
    if task not in ("position", "direction"):
        raise ValueError(f"benchmark task must be position or direction, got {task!r}")
    model_tasks = ["position"] if task == "position" else ["amplitude", "angle"]

    values: dict[str, dict[str, list[float]]] = {}
    for i in range(n_seeds):
        seed = train_cfg.seed + i
        ds = synth_generate(task, seed=seed, **data_args)
        tr, va, te = split_by_subject(ds, seed=seed)
        for use_se, use_sa in variants:
            label = variant_label(use_se, use_sa)
            for model_task in model_tasks:
                mcfg = dataclasses.replace(
                    model_cfg,
                    task=model_task,
                    use_se=use_se,
                    use_sa=use_sa,
                    seed=seed,
                    n_electrodes=ds.n_electrodes,
                    n_timepoints=ds.n_timepoints,
                )
                tcfg = dataclasses.replace(train_cfg, seed=seed)
                model, _ = train(mcfg, tcfg, tr, va)
                report = evaluate(model, te, px_per_degree=train_cfg.px_per_degree)
                for key, val in _report_values(report).items():
                    values.setdefault(label, {}).setdefault(key, []).append(val)

    rows = []
    for use_se, use_sa in variants:
        label = variant_label(use_se, use_sa)
        metrics = {}
        for key, vals in values[label].items():
            arr = np.asarray(vals, dtype=np.float64)
            metrics[key] = {
                "mean": float(arr.mean()),
                "std": float(arr.std()),
                "values": [float(v) for v in arr],
            }
        rows.append({"label": label, "metrics": metrics})

    reference = {
        key: REFERENCE_RESULTS[key]
        for key in (("euclidean_px",) if task == "position" else ("angle_rmse_rad", "amplitude_rmse_px"))
    }
    table = BenchmarkTable(
        task=task,
        rows=rows,
        metadata={
            "n_seeds": n_seeds,
            "reference_results": reference,
            "reference_note": "published values, quoted for context only; synthetic results are not comparable",
        },
    )
    if run_dir is not None:
        run_dir = Path(run_dir)
        run_dir.mkdir(parents=True, exist_ok=True)
        (run_dir / "benchmark.json").write_text(table.to_json(), encoding="utf-8")
        (run_dir / "benchmark.tsv").write_text(table.format_text(), encoding="utf-8")
    return table


def evaluate(model, test_ds: EegDataset, px_per_degree: float = DEFAULT_PX_PER_DEGREE) -> MetricReport:
    """Eval-mode metrics on a dataset; `model` needs predict() and a task.

    Accepts an AttentionCnn or any stub exposing the same two attributes
    (oracle predictors in tests use this).
    """
    task = model.config.task if isinstance(model, AttentionCnn) else model.task
    if test_ds.task != _DS_TASK[task]:
        raise ValueError(f"model task {task!r} incompatible with dataset task {test_ds.task!r}")
    x = test_ds.signals_array()
    if isinstance(model, AttentionCnn):
        x = x.astype(model.config.np_dtype)
    y = test_ds.labels_array().astype(np.float64)[:, _LABEL_COLS[task]]
    return compute_metrics(task, model.predict(x), y, px_per_degree=px_per_degree)
