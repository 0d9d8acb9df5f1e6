"""End-to-end command-line behavior: artifacts, determinism, exit codes."""

import json

import numpy as np
import pytest

from eegaze.cli import main, read_config
from eegaze.data import load_dataset


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    """One shared tree: a dataset, an attention run, and a plain-CNN run."""
    root = tmp_path_factory.mktemp("cli")
    data = root / "synth.eegs"
    assert main([
        "generate", "--task", "position", "--subjects", "4",
        "--samples-per-subject", "6", "--electrodes", "4", "--timepoints", "16",
        "--seed", "3", "--noisy-fraction", "0.5", "--noisy-count", "1",
        "--out", str(data), "--layout-out", str(root / "layout.csv"),
    ]) == 0
    common = [
        "--data", str(data), "--blocks", "3", "--features", "4",
        "--kernel-size", "3", "--d-model", "8", "--epochs", "2",
        "--batch-size", "8", "--lr", "0.001", "--seed", "0",
    ]
    assert main(["train", "--out-dir", str(root / "run_sa"), *common]) == 0
    assert main([
        "train", "--out-dir", str(root / "run_cnn"), *common,
        "--use-se", "false", "--use-sa", "false",
    ]) == 0
    return root


def test_generate_writes_loadable_dataset(workdir, capsys):
    ds = load_dataset(workdir / "synth.eegs")
    assert len(ds.samples) == 24 and ds.n_electrodes == 4 and ds.task == "position"
    assert sum(bool(s.noisy_electrodes) for s in ds.samples) == 12
    assert (workdir / "layout.csv").exists()


def test_generate_byte_reproducible(workdir, tmp_path):
    args = [
        "generate", "--subjects", "4", "--samples-per-subject", "6",
        "--electrodes", "4", "--timepoints", "16", "--seed", "3",
        "--noisy-fraction", "0.5", "--noisy-count", "1",
    ]
    a, b = tmp_path / "a.eegs", tmp_path / "b.eegs"
    assert main(args + ["--out", str(a)]) == 0
    assert main(args + ["--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    assert a.read_bytes() == (workdir / "synth.eegs").read_bytes()


def test_train_writes_run_artifacts(workdir):
    run = workdir / "run_sa"
    assert (run / "best.ckpt").exists()
    assert (run / "loss_curve.png").stat().st_size > 0
    metrics = json.loads((run / "run_metrics.json").read_text())
    assert len(metrics["train_loss_per_epoch"]) == 2
    assert metrics["selected_epoch"] in (0, 1)
    assert "euclidean_px" in metrics["test_metrics"]


def test_eval_stdout_matches_out_file(workdir, tmp_path, capsys):
    base = ["eval", "--checkpoint", str(workdir / "run_sa" / "best.ckpt"),
            "--data", str(workdir / "synth.eegs")]
    assert main(base) == 0
    stdout = capsys.readouterr().out
    out = tmp_path / "metrics.json"
    assert main(base + ["--out", str(out)]) == 0
    assert out.read_text(encoding="utf-8") == stdout
    report = json.loads(stdout)
    assert report["task"] == "position" and report["n_samples"] == 24
    assert main(base) == 0 and capsys.readouterr().out == stdout  # rerun identical


def test_explain_attention_artifacts(workdir, tmp_path):
    out1, out2 = tmp_path / "x1", tmp_path / "x2"
    base = ["explain", "--checkpoint", str(workdir / "run_sa" / "best.ckpt"),
            "--data", str(workdir / "synth.eegs")]
    for out in (out1, out2):
        assert main(base + ["--out-dir", str(out)]) == 0
    report = json.loads((out1 / "attention.json").read_text())
    assert report["mode"] == "sa_only"  # auto resolves to the SA gate
    assert report["n_samples"] == 24 and report["n_electrodes"] == 4
    assert "noisy_stats" in report
    for name in ("attention.json", "attention_topomap.svg", "attention_hist.png"):
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes()


def test_explain_lrp_artifacts(workdir, tmp_path):
    out = tmp_path / "lrp"
    assert main([
        "explain", "--checkpoint", str(workdir / "run_cnn" / "best.ckpt"),
        "--data", str(workdir / "synth.eegs"), "--out-dir", str(out),
        "--sample", "2", "--component", "1",
    ]) == 0
    rmap = json.loads((out / "relevance.json").read_text())
    assert rmap["output_component"] == 1
    assert rmap["leakage"] < 0.01
    assert len(rmap["per_electrode_relevance"]) == 4
    assert (out / "relevance_topomap.svg").exists()


def test_explain_rejects_mismatched_layout(workdir, tmp_path, capsys):
    other = tmp_path / "other.csv"
    assert main([
        "generate", "--subjects", "4", "--samples-per-subject", "1",
        "--electrodes", "8", "--timepoints", "16",
        "--out", str(tmp_path / "o.eegs"), "--layout-out", str(other),
    ]) == 0
    code = main([
        "explain", "--checkpoint", str(workdir / "run_sa" / "best.ckpt"),
        "--data", str(workdir / "synth.eegs"), "--out-dir", str(tmp_path / "x"),
        "--layout", str(other),
    ])
    assert code == 1
    assert "error:" in capsys.readouterr().err


def test_benchmark_writes_table_and_chart(tmp_path, capsys):
    out = tmp_path / "bench"
    assert main([
        "benchmark", "--task", "position", "--seeds", "1", "--subjects", "4",
        "--samples-per-subject", "5", "--electrodes", "4", "--timepoints", "16",
        "--blocks", "3", "--features", "4", "--kernel-size", "3",
        "--d-model", "8", "--epochs", "1", "--out-dir", str(out),
    ]) == 0
    text = capsys.readouterr().out
    lines = text.strip().splitlines()
    assert lines[0] == "variant\teuclidean_px"
    assert [l.split("\t")[0] for l in lines[1:]] == ["CNN", "CNN + SE", "CNN + SA", "CNN + both"]
    assert (out / "benchmark.tsv").read_text(encoding="utf-8") == text
    table = json.loads((out / "benchmark.json").read_text())
    assert table["metadata"]["n_seeds"] == 1
    assert (out / "benchmark.png").stat().st_size > 0


def test_gradcheck_subcommand_passes(capsys):
    assert main(["gradcheck", "--seed", "0"]) == 0
    out = capsys.readouterr().out
    assert "all 24 gradient checks passed" in out
    assert out.count("ok ") == 24


def test_config_file_layering(workdir, tmp_path, capsys):
    cfg = tmp_path / "gen.cfg"
    cfg.write_text(
        "# defaults for tiny runs\n"
        "subjects = 4\n"
        "samples-per-subject = 6\n"
        "electrodes = 4\n"
        "timepoints = 16\n"
        "seed = 3\n"
        "noisy-fraction = 0.5\n"
        "noisy-count = 1\n",
        encoding="utf-8",
    )
    out = tmp_path / "from_cfg.eegs"
    assert main(["generate", "--config", str(cfg), "--out", str(out)]) == 0
    assert out.read_bytes() == (workdir / "synth.eegs").read_bytes()
    # explicit flag wins over the config value
    out2 = tmp_path / "override.eegs"
    assert main(["generate", "--config", str(cfg), "--seed", "4", "--out", str(out2)]) == 0
    assert out2.read_bytes() != out.read_bytes()


def test_read_config_rejects_garbage(tmp_path):
    bad = tmp_path / "bad.cfg"
    bad.write_text("subjects\n", encoding="utf-8")
    with pytest.raises(ValueError):
        read_config(bad)


def test_unknown_config_key_fails(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("banana = 1\n", encoding="utf-8")
    assert main(["generate", "--config", str(cfg), "--out", str(tmp_path / "x.eegs")]) == 1
    assert "banana" in capsys.readouterr().err


def test_usage_errors_exit_2(capsys):
    with pytest.raises(SystemExit) as e:
        main(["frobnicate"])
    assert e.value.code == 2
    with pytest.raises(SystemExit) as e:
        main(["generate", "--no-such-flag", "1"])
    assert e.value.code == 2


def test_runtime_errors_exit_1(tmp_path, capsys):
    assert main(["generate"]) == 1  # missing required --out
    assert "--out is required" in capsys.readouterr().err
    assert main(["generate", "--subjects", "not-a-number", "--out", str(tmp_path / "x.eegs")]) == 1
    assert main(["eval", "--checkpoint", str(tmp_path / "missing.ckpt"),
                 "--data", str(tmp_path / "missing.eegs")]) == 1
    assert "error:" in capsys.readouterr().err
