"""Command-line entry points: generate, train, eval, benchmark, explain, gradcheck.

Every subcommand is deterministic given its flags: artifacts carry no
timestamps or environment state, so reruns produce byte-identical files.
Flags are long-form; `--config path` points at a UTF-8 key=value file
(`#` starts a comment) whose entries fill in any flag not given on the
command line.

Exit codes: 0 success, 1 runtime failure (message on stderr), 2 usage.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .data import (
    default_layout,
    inject_noisy_electrodes,
    load_dataset,
    load_layout,
    save_dataset,
    save_layout,
    split_by_subject,
    synth_generate,
)
from .explain import SUMMARY_MODES, attention_report, lrp_epsilon
from .figures import save_attention_histogram, save_benchmark_chart, save_loss_curves
from .gradcheck import run_battery
from .metrics import DEFAULT_PX_PER_DEGREE
from .model import ModelConfig, load_checkpoint, variant_label
from .topomap import TopomapSpec, save_topomap
from .training import TrainConfig, evaluate, run_benchmark, train


def _parse_bool(text) -> bool:
    if isinstance(text, bool):
        return text
    low = str(text).strip().lower()
    if low in ("true", "1", "yes", "on"):
        return True
    if low in ("false", "0", "no", "off"):
        return False
    raise ValueError(f"expected a boolean (true/false), got {text!r}")


@dataclass
class Opt:
    """One long-form option: flag spelling, converter, default, validation."""

    name: str  # config key and argparse dest (underscores)
    type: object
    default: object = None
    help: str = ""
    required: bool = False
    choices: tuple | None = None

    @property
    def flag(self) -> str:
        return "--" + self.name.replace("_", "-")


_MODEL_OPTS = [
    Opt("task", str, "position", "model task", choices=("position", "amplitude", "angle")),
    Opt("blocks", int, 6, "number of convolution blocks"),
    Opt("residual_period", int, 3, "blocks per residual group"),
    Opt("features", int, 32, "convolution channels"),
    Opt("kernel_size", int, 15, "convolution kernel length"),
    Opt("d_model", int, 128, "per-electrode embedding width"),
    Opt("use_se", _parse_bool, True, "enable channel attention (true/false)"),
    Opt("use_sa", _parse_bool, True, "enable electrode self-attention (true/false)"),
    Opt("dtype", str, "float32", "parameter precision", choices=("float32", "float64")),
]

_TRAIN_OPTS = [
    Opt("epochs", int, 20, "training epochs"),
    Opt("batch_size", int, 8, "minibatch size"),
    Opt("lr", float, 1e-3, "Adam learning rate"),
    Opt("px_per_degree", float, DEFAULT_PX_PER_DEGREE, "pixel-to-visual-angle factor"),
]

_DATA_OPTS = [
    Opt("subjects", int, 10, "number of synthetic subjects"),
    Opt("samples_per_subject", int, 20, "samples per subject"),
    Opt("electrodes", int, 16, "electrode count"),
    Opt("timepoints", int, 64, "timepoints per sample"),
    Opt("noise_std", float, 10.0, "sensor noise standard deviation (microvolts)"),
]

OPTIONS = {
    "generate": [
        Opt("task", str, "position", "dataset task", choices=("position", "direction")),
        *_DATA_OPTS,
        Opt("seed", int, 0, "generation seed"),
        Opt("noisy_fraction", float, 0.0, "fraction of samples given artifact electrodes"),
        Opt("noisy_count", int, 0, "artifact electrodes per affected sample"),
        Opt("out", str, None, "output dataset file", required=True),
        Opt("layout_out", str, None, "also write the electrode layout CSV here"),
    ],
    "train": [
        Opt("data", str, None, "input dataset file", required=True),
        Opt("out_dir", str, None, "directory for checkpoint, metrics, figure", required=True),
        *_MODEL_OPTS,
        *_TRAIN_OPTS,
        Opt("seed", int, 0, "initialization and batching seed"),
        Opt("split_seed", int, None, "subject split seed (defaults to --seed)"),
    ],
    "eval": [
        Opt("checkpoint", str, None, "trained model checkpoint", required=True),
        Opt("data", str, None, "dataset file to evaluate on", required=True),
        Opt("px_per_degree", float, DEFAULT_PX_PER_DEGREE, "pixel-to-visual-angle factor"),
        Opt("out", str, None, "write the metric JSON here instead of stdout"),
    ],
    "benchmark": [
        Opt("task", str, "direction", "benchmark task", choices=("position", "direction")),
        Opt("seeds", int, 3, "number of seeds per variant"),
        Opt("seed", int, 0, "base seed"),
        Opt("out_dir", str, None, "directory for the table, JSON, and chart", required=True),
        *_DATA_OPTS,
        Opt("blocks", int, 3, "number of convolution blocks"),
        Opt("residual_period", int, 3, "blocks per residual group"),
        Opt("features", int, 16, "convolution channels"),
        Opt("kernel_size", int, 9, "convolution kernel length"),
        Opt("d_model", int, 128, "per-electrode embedding width"),
        Opt("dtype", str, "float32", "parameter precision", choices=("float32", "float64")),
        *_TRAIN_OPTS,
    ],
    "explain": [
        Opt("checkpoint", str, None, "trained model checkpoint", required=True),
        Opt("data", str, None, "dataset file to explain on", required=True),
        Opt("out_dir", str, None, "directory for JSON, SVG, and histogram", required=True),
        Opt("mode", str, "auto", "attention summary source, lrp, or auto",
            choices=("auto", "lrp") + SUMMARY_MODES),
        Opt("tau", float, 0.05, "low-attention threshold"),
        Opt("batch_size", int, 64, "forward batch size"),
        Opt("sample", int, 0, "sample index for relevance propagation"),
        Opt("component", int, 0, "output component for relevance propagation"),
        Opt("eps", float, 1e-6, "relevance stabilizer"),
        Opt("layout", str, None, "electrode layout CSV (defaults to the synthetic layout)"),
    ],
    "gradcheck": [
        Opt("seed", int, 0, "battery seed"),
    ],
}

_SUBCOMMAND_HELP = {
    "generate": "write a synthetic dataset file",
    "train": "train one model on a dataset file",
    "eval": "evaluate a checkpoint on a dataset file",
    "benchmark": "train all four variants over several seeds",
    "explain": "attention or relevance report with scalp maps",
    "gradcheck": "verify gradients against finite differences",
}


def _dedupe(opts: list[Opt]) -> list[Opt]:
    seen = {}
    for o in opts:
        seen[o.name] = o
    return list(seen.values())


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="eegaze", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, metavar="subcommand")
    for command, opts in OPTIONS.items():
        p = sub.add_parser(command, help=_SUBCOMMAND_HELP[command])
        p.add_argument("--config", default=None, help="key=value file supplying flag defaults")
        for o in _dedupe(opts):
            p.add_argument(o.flag, dest=o.name, type=str, default=None, help=o.help)
    return parser


def read_config(path) -> dict[str, str]:
    """Parse a UTF-8 key=value file; `#` starts a comment, blank lines skipped."""
    out = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ValueError(f"{path}:{lineno}: expected key=value, got {raw.strip()!r}")
        out[key.strip().replace("-", "_")] = value.strip()
    return out


def _resolve(args: argparse.Namespace, opts: list[Opt]) -> argparse.Namespace:
    """Layer defaults, then config file values, then explicit flags."""
    opts = _dedupe(opts)
    config = read_config(args.config) if args.config else {}
    known = {o.name for o in opts}
    unknown = sorted(set(config) - known)
    if unknown:
        raise ValueError(f"unknown config key(s) for {args.command}: {', '.join(unknown)}")
    merged = argparse.Namespace(command=args.command)
    for o in opts:
        raw = getattr(args, o.name)
        if raw is None and o.name in config:
            raw = config[o.name]
        if raw is None:
            value = o.default
        else:
            try:
                value = o.type(raw)
            except ValueError as e:
                raise ValueError(f"{o.flag}: {e}") from None
        if value is None and o.required:
            raise ValueError(f"{o.flag} is required")
        if o.choices is not None and value not in o.choices:
            raise ValueError(f"{o.flag} must be one of {', '.join(o.choices)}, got {value!r}")
        setattr(merged, o.name, value)
    return merged


# ---------------------------------------------------------------------------
# subcommand bodies


def cmd_generate(o) -> int:
    ds = synth_generate(
        o.task,
        o.subjects,
        o.samples_per_subject,
        o.electrodes,
        o.timepoints,
        noise_std=o.noise_std,
        seed=o.seed,
    )
    if o.noisy_fraction > 0 and o.noisy_count > 0:
        ds = inject_noisy_electrodes(ds, o.noisy_fraction, o.noisy_count, seed=o.seed)
    save_dataset(ds, o.out)
    if o.layout_out:
        save_layout(ds.layout, o.layout_out)
    print(
        f"wrote {o.out}: {len(ds.samples)} samples, "
        f"{ds.n_electrodes} electrodes x {ds.n_timepoints} timepoints, task {ds.task}"
    )
    return 0


def _model_config(o, n_electrodes: int, n_timepoints: int, task: str, seed: int) -> ModelConfig:
    return ModelConfig(
        n_electrodes=n_electrodes,
        n_timepoints=n_timepoints,
        n_conv_blocks=o.blocks,
        residual_period=o.residual_period,
        hidden_features=o.features,
        kernel_size=o.kernel_size,
        d_model=o.d_model,
        use_se=getattr(o, "use_se", True),
        use_sa=getattr(o, "use_sa", True),
        task=task,
        seed=seed,
        dtype=o.dtype,
    )


def cmd_train(o) -> int:
    ds = load_dataset(o.data)
    split_seed = o.seed if o.split_seed is None else o.split_seed
    train_ds, val_ds, test_ds = split_by_subject(ds, seed=split_seed)
    model_cfg = _model_config(o, ds.n_electrodes, ds.n_timepoints, o.task, o.seed)
    train_cfg = TrainConfig(
        batch_size=o.batch_size, epochs=o.epochs, lr=o.lr, seed=o.seed, px_per_degree=o.px_per_degree
    )
    out_dir = Path(o.out_dir)
    model, metrics = train(model_cfg, train_cfg, train_ds, val_ds, run_dir=out_dir)
    report = evaluate(model, test_ds, px_per_degree=o.px_per_degree)
    metrics.test_metrics = report.to_dict()
    (out_dir / "run_metrics.json").write_text(metrics.to_json(), encoding="utf-8")
    save_loss_curves(metrics, out_dir / "loss_curve.png")
    label = variant_label(model_cfg.use_se, model_cfg.use_sa)
    print(
        f"trained {label} ({model_cfg.task}): selected epoch {metrics.selected_epoch}, "
        f"val metric {metrics.val_metric_per_epoch[metrics.selected_epoch]:.4f}; "
        f"artifacts in {out_dir}"
    )
    return 0


def cmd_eval(o) -> int:
    model = load_checkpoint(o.checkpoint)
    ds = load_dataset(o.data)
    report = evaluate(model, ds, px_per_degree=o.px_per_degree)
    text = report.to_json()
    if o.out:
        Path(o.out).write_text(text, encoding="utf-8")
        print(f"wrote {o.out}")
    else:
        sys.stdout.write(text)
    return 0


def cmd_benchmark(o) -> int:
    model_cfg = _model_config(o, o.electrodes, o.timepoints, "position", o.seed)
    train_cfg = TrainConfig(
        batch_size=o.batch_size, epochs=o.epochs, lr=o.lr, seed=o.seed, px_per_degree=o.px_per_degree
    )
    data_args = {
        "n_subjects": o.subjects,
        "n_samples_per_subject": o.samples_per_subject,
        "n_electrodes": o.electrodes,
        "n_timepoints": o.timepoints,
        "noise_std": o.noise_std,
    }
    out_dir = Path(o.out_dir)
    table = run_benchmark(o.task, model_cfg, train_cfg, data_args, n_seeds=o.seeds, run_dir=out_dir)
    save_benchmark_chart(table, out_dir / "benchmark.png")
    sys.stdout.write(table.format_text())
    return 0


def cmd_explain(o) -> int:
    model = load_checkpoint(o.checkpoint)
    ds = load_dataset(o.data)
    layout = load_layout(o.layout) if o.layout else default_layout(ds.n_electrodes)
    if layout.n_electrodes != ds.n_electrodes:
        raise ValueError(
            f"layout has {layout.n_electrodes} electrodes but the dataset has {ds.n_electrodes}"
        )
    out_dir = Path(o.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    cfg = model.config

    mode = o.mode
    if mode == "auto":
        mode = "sa_only" if cfg.use_sa else ("se_mean" if cfg.use_se else "lrp")

    if mode == "lrp":
        if not 0 <= o.sample < len(ds.samples):
            raise ValueError(f"--sample must be in [0, {len(ds.samples)}), got {o.sample}")
        x = ds.samples[o.sample].signal.astype(np.float64)
        rmap = lrp_epsilon(model, x, output_component=o.component, eps=o.eps)
        (out_dir / "relevance.json").write_text(rmap.to_json(), encoding="utf-8")
        spec = TopomapSpec(
            layout,
            rmap.per_electrode,
            title=f"relevance, sample {o.sample}, component {o.component}",
        )
        save_topomap(spec, out_dir / "relevance_topomap.svg")
        print(
            f"relevance for sample {o.sample}, component {o.component}: "
            f"output {rmap.output_value:.4f}, leakage {rmap.leakage:.2e}; artifacts in {out_dir}"
        )
        return 0

    report = attention_report(model, ds, mode=mode, tau=o.tau, batch_size=o.batch_size)
    (out_dir / "attention.json").write_text(report.to_json(), encoding="utf-8")
    spec = TopomapSpec(
        layout,
        report.attention.mean(axis=0),
        highlights=frozenset(report.important),
        title=f"mean attention ({mode})",
    )
    save_topomap(spec, out_dir / "attention_topomap.svg")
    save_attention_histogram(report, out_dir / "attention_hist.png", tau=o.tau)
    print(
        f"attention over {report.attention.shape[0]} samples ({mode}): "
        f"{len(report.important)} important electrode(s); artifacts in {out_dir}"
    )
    return 0


def cmd_gradcheck(o) -> int:
    results = run_battery(seed=o.seed)
    for r in results:
        print(r.format_line())
    failures = [r for r in results if not r.ok]
    if failures:
        raise RuntimeError(f"{len(failures)} gradient check(s) exceeded tolerance")
    print(f"all {len(results)} gradient checks passed")
    return 0


_RUNNERS = {
    "generate": cmd_generate,
    "train": cmd_train,
    "eval": cmd_eval,
    "benchmark": cmd_benchmark,
    "explain": cmd_explain,
    "gradcheck": cmd_gradcheck,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        merged = _resolve(args, OPTIONS[args.command])
        return _RUNNERS[args.command](merged)
    except Exception as e:  # runtime failure contract: message on stderr, exit 1
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
