"""EEG gaze estimation with a from-scratch convolutional attention network.

The package is organized bottom-up: a small reverse-mode autodiff engine
(`autodiff`), attention blocks built on it (`attention`), the residual
convolutional model (`model`), losses and gaze metrics (`metrics`),
synthetic data plus binary container formats (`data`, `binio`), the
training and benchmark protocol (`training`), post-hoc explainability
(`explain`), scalp-map rendering (`topomap`, `figures`), and the CLI
(`cli`).
"""

from .attention import SaBlock, ScaleTrace, SeBlock
from .autodiff import Tensor, backward, no_grad
from .data import (
    EegDataset,
    EegSample,
    ElectrodeLayout,
    default_layout,
    inject_noisy_electrodes,
    load_dataset,
    load_layout,
    save_dataset,
    save_layout,
    split_by_subject,
    synth_generate,
)
from .explain import (
    AttentionReport,
    RelevanceMap,
    attention_report,
    important_electrodes,
    lrp_epsilon,
    normalize_attention,
    noisy_attention_stats,
)
from .gradcheck import run_battery
from .metrics import MetricReport, angle_loss, compute_metrics, smooth_l1
from .model import (
    AttentionCnn,
    ModelConfig,
    load_checkpoint,
    save_checkpoint,
    temporal_lengths,
    variant_label,
)
from .optim import Adam
from .topomap import TopomapSpec, render_topomap, save_topomap
from .training import (
    BenchmarkTable,
    RunMetrics,
    TrainConfig,
    evaluate,
    run_benchmark,
    train,
)

__version__ = "0.1.0"

__all__ = [
    "Adam",
    "AttentionCnn",
    "AttentionReport",
    "BenchmarkTable",
    "EegDataset",
    "EegSample",
    "ElectrodeLayout",
    "MetricReport",
    "ModelConfig",
    "RelevanceMap",
    "RunMetrics",
    "SaBlock",
    "ScaleTrace",
    "SeBlock",
    "Tensor",
    "TopomapSpec",
    "TrainConfig",
    "angle_loss",
    "attention_report",
    "backward",
    "compute_metrics",
    "default_layout",
    "evaluate",
    "important_electrodes",
    "inject_noisy_electrodes",
    "load_checkpoint",
    "load_dataset",
    "load_layout",
    "lrp_epsilon",
    "no_grad",
    "noisy_attention_stats",
    "normalize_attention",
    "render_topomap",
    "run_battery",
    "run_benchmark",
    "save_checkpoint",
    "save_dataset",
    "save_layout",
    "save_topomap",
    "smooth_l1",
    "split_by_subject",
    "synth_generate",
    "temporal_lengths",
    "train",
    "variant_label",
]
