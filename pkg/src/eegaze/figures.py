"""Matplotlib report figures written next to the delimited/JSON artifacts.

Everything renders through the Agg backend with PNG metadata stripped, so
a fixed input produces identical bytes run after run.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

_DPI = 100
# Dropping the Software key keeps the PNG bytes free of library versioning.
_PNG_META = {"Software": None}


def _save(fig, path):
    fig.savefig(path, format="png", dpi=_DPI, metadata=_PNG_META)
    plt.close(fig)


def save_loss_curves(metrics, path) -> None:
    """Training loss and validation metric per epoch, side by side."""
    epochs = np.arange(len(metrics.train_loss_per_epoch))
    fig, (ax_l, ax_v) = plt.subplots(1, 2, figsize=(9, 3.6))
    ax_l.plot(epochs, metrics.train_loss_per_epoch, color="tab:blue")
    ax_l.set_xlabel("epoch")
    ax_l.set_ylabel("training loss")
    ax_v.plot(epochs, metrics.val_metric_per_epoch, color="tab:orange")
    ax_v.axvline(metrics.selected_epoch, color="gray", linestyle="--", linewidth=1)
    ax_v.set_xlabel("epoch")
    ax_v.set_ylabel("validation metric")
    fig.suptitle(f"seed {metrics.seed}, selected epoch {metrics.selected_epoch}")
    fig.tight_layout()
    _save(fig, path)


def save_benchmark_chart(table, path) -> None:
    """Mean with std error bars per variant, one panel per metric."""
    labels = [row["label"] for row in table.rows]
    metric_names = list(table.rows[0]["metrics"]) if table.rows else []
    fig, axes = plt.subplots(1, max(len(metric_names), 1), figsize=(4.5 * max(len(metric_names), 1), 3.8))
    if len(metric_names) <= 1:
        axes = [axes]
    xs = np.arange(len(labels))
    for ax, name in zip(axes, metric_names):
        means = [row["metrics"][name]["mean"] for row in table.rows]
        stds = [row["metrics"][name]["std"] for row in table.rows]
        ax.bar(xs, means, yerr=stds, capsize=4, color="tab:blue")
        ax.set_xticks(xs)
        ax.set_xticklabels(labels, rotation=20, ha="right")
        ax.set_ylabel(name)
    fig.suptitle(f"{table.task} benchmark, {table.metadata.get('n_seeds', '?')} seeds")
    fig.tight_layout()
    _save(fig, path)


def save_attention_histogram(report, path, tau: float = 0.05) -> None:
    """Distribution of normalized attention, split noisy/clean when annotated."""
    fig, ax = plt.subplots(figsize=(6, 3.8))
    bins = np.linspace(0.0, 1.0, 21)
    ax.hist(report.attention.reshape(-1), bins=bins, color="tab:blue", label="all electrodes")
    ax.axvline(tau, color="red", linestyle="--", linewidth=1, label=f"tau = {tau}")
    stats = report.noisy_stats
    if stats is not None:
        if "mean_noisy" in stats:
            ax.axvline(stats["mean_noisy"], color="darkred", linewidth=1.5, label="mean noisy")
        if "mean_clean" in stats:
            ax.axvline(stats["mean_clean"], color="darkgreen", linewidth=1.5, label="mean clean")
    ax.set_xlabel("normalized attention")
    ax.set_ylabel("electrode instances")
    ax.set_title(f"attention distribution ({report.mode})")
    ax.legend()
    fig.tight_layout()
    _save(fig, path)
