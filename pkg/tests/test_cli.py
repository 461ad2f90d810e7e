import csv
import json
import math

import numpy as np
import pytest

import run_onn
from conftest import write_idx_images, write_idx_labels
from models import SweepPoint, XorRunConfig
from onn.data import load_mnist_idx, mnist_dataset, read_feature_cache
from onn.network import load_model
from onn.training import TrainingDivergedError
from run_onn import (
    EXIT_CHECK,
    EXIT_CONFIG,
    EXIT_DATA,
    EXIT_OK,
    load_run_config,
    main,
    mnist_accuracy_window,
    mnist_summary_failures,
    xor_sweep_failures,
)


def _rows(path):
    with open(path) as f:
        return list(csv.reader(f))


def test_perf_table_command(tmp_path):
    assert main(["perf-table", "--out-dir", str(tmp_path)]) == EXIT_OK
    rows = _rows(tmp_path / "perf-table" / "perf_table.csv")
    assert rows[0] == ["N", "L", "power_W", "latency_s", "footprint_m2", "speed_mac_s", "efficiency_J_mac"]
    assert [row[0] for row in rows[1:]] == ["4", "10", "100"]
    config = json.loads((tmp_path / "perf-table" / "config.json").read_text())
    assert config["sizes"] == [4, 10, 100]


def test_perf_table_output_is_reproducible(tmp_path):
    main(["perf-table", "--out-dir", str(tmp_path / "a")])
    main(["perf-table", "--out-dir", str(tmp_path / "b")])
    first = (tmp_path / "a" / "perf-table" / "perf_table.csv").read_bytes()
    assert first == (tmp_path / "b" / "perf-table" / "perf_table.csv").read_bytes()


def test_activation_curve_command(tmp_path):
    assert main(["activation-curve", "--out-dir", str(tmp_path), "--points", "5"]) == EXIT_OK
    curves = _rows(tmp_path / "activation-curve" / "activation_curve.csv")
    assert len(curves) == 1 + 4 * 5
    thresholds = _rows(tmp_path / "activation-curve" / "thresholds.csv")
    assert float(thresholds[1][2]) == pytest.approx(0.7318, abs=1e-4)


def test_threshold_contour_rejects_empty_range(tmp_path):
    args = ["threshold-contour", "--out-dir", str(tmp_path), "--g-min", "1e5", "--g-max", "1e3"]
    assert main(args) == EXIT_CONFIG


def test_kerr_compare_command(tmp_path):
    assert main(["kerr-compare", "--out-dir", str(tmp_path), "--points", "3"]) == EXIT_OK
    out = tmp_path / "kerr-compare"
    assert len(_rows(out / "gamma_vs_gain.csv")) == 1 + 3 * 3
    assert len(_rows(out / "kerr_equivalence.csv")) == 1 + 3
    assert len(_rows(out / "gamma_vs_vpil.csv")) == 1 + 3 * 3


def test_config_file_sections_and_overrides(tmp_path):
    config = tmp_path / "run.yaml"
    config.write_text("train_xor:\n  n: 3\n  epochs: 7\ntrain_xor.layers: 1\nperf_table:\n  layers: 4\n")
    cfg = load_run_config(XorRunConfig, "train_xor", str(config), {"epochs": 9, "seed": None})
    assert (cfg.n, cfg.layers, cfg.epochs, cfg.seed) == (3, 1, 9, 0)


def test_config_errors_exit_with_config_code(tmp_path):
    assert main(["perf-table", "--config", str(tmp_path / "missing.yaml")]) == EXIT_CONFIG
    config = tmp_path / "bad.yaml"
    config.write_text("perf_table:\n  sizess: [4]\n")
    assert main(["perf-table", "--config", str(config), "--out-dir", str(tmp_path)]) == EXIT_CONFIG


def test_missing_mnist_files_exit_with_data_code(tmp_path):
    args = ["train-mnist", "--out-dir", str(tmp_path), "--train-images", str(tmp_path / "absent")]
    assert main(args) == EXIT_DATA


def test_short_xor_run_writes_artifacts(tmp_path):
    args = ["train-xor", "--out-dir", str(tmp_path), "--n", "2", "--epochs", "5", "--seed", "3"]
    assert main(args) == EXIT_OK
    out = tmp_path / "train-xor"
    history = _rows(out / "history.csv")
    assert len(history) == 1 + 5
    io = _rows(out / "learned_io.csv")
    assert [row[0] for row in io[1:]] == ["00", "01", "10", "11"]
    assert load_model(out / "model.json").n == 2
    assert json.loads((out / "config.json").read_text())["seed"] == 3


def test_check_flags_unconverged_xor(tmp_path):
    args = ["train-xor", "--out-dir", str(tmp_path), "--n", "2", "--epochs", "2", "--restarts", "1", "--check"]
    assert main(args) == EXIT_CHECK


def test_mnist_accuracy_windows():
    assert mnist_accuracy_window(2, linear=True, train_gain=False) == (0.83, 0.87)
    assert mnist_accuracy_window(2, linear=False, train_gain=False)[0] == 0.91
    assert mnist_accuracy_window(3, linear=False, train_gain=True)[0] == 0.92


def test_xor_artifacts_are_byte_identical_across_reruns(tmp_path):
    for name in ("a", "b"):
        args = ["train-xor", "--out-dir", str(tmp_path / name), "--n", "3", "--epochs", "20", "--restarts", "4"]
        assert main(args) == EXIT_OK
    for artifact in ("history.csv", "learned_io.csv", "model.json"):
        first = (tmp_path / "a" / "train-xor" / artifact).read_bytes()
        assert first == (tmp_path / "b" / "train-xor" / artifact).read_bytes(), artifact


def test_diverged_training_exits_with_check_code(tmp_path, monkeypatch):
    def diverge(*args, **kwargs):
        raise TrainingDivergedError("non-finite loss nan at epoch 1, batch 0")

    monkeypatch.setattr(run_onn, "train", diverge)
    assert main(["train-xor", "--out-dir", str(tmp_path), "--n", "2", "--epochs", "1"]) == EXIT_CHECK


def _point(phi_b, g_phi, mean_mse):
    return SweepPoint(phi_b=phi_b * math.pi, g_phi=g_phi * math.pi, mean_mse=mean_mse, min_mse=mean_mse, max_mse=mean_mse)


def _sweep(relu_strong=1e-4, other_strong=1e-2):
    points = [_point(1.0, 0.25, 1e-2), _point(1.0, 1.75, relu_strong)]
    points += [_point(bias, 1.75, other_strong) for bias in (0.0, 0.5)]
    return points


def test_xor_sweep_failures():
    assert xor_sweep_failures(_sweep()) == []
    assert len(xor_sweep_failures(_sweep(relu_strong=5e-3))) == 1
    # Biases 0 and 0.5π must stay above the ReLU-like bias at high gain
    assert len(xor_sweep_failures(_sweep(other_strong=1e-5))) == 2
    assert xor_sweep_failures(_sweep()[:2])


def test_mnist_summary_failures():
    assert mnist_summary_failures([(2, 0.85, 0.93, 0.93), (3, 0.85, 0.9262, 0.9389)]) == []
    # Activation gains only 3 points
    assert len(mnist_summary_failures([(2, 0.86, 0.89, 0.89)])) == 3
    # Trained gain falls more than half a point
    assert len(mnist_summary_failures([(3, 0.85, 0.94, 0.93)])) == 1


@pytest.fixture
def tiny_mnist(tmp_path, rng):
    """Two random 40-image IDX sets sharing one label file."""
    paths = {}
    for name in ("a", "b"):
        write_idx_images(tmp_path / f"images_{name}", rng.integers(0, 256, size=(40, 28, 28)))
        paths[name] = tmp_path / f"images_{name}"
    write_idx_labels(tmp_path / "labels", np.arange(40) % 10)
    paths["labels"] = tmp_path / "labels"
    return paths


def _mnist_args(command, out_dir, images, labels, *extra):
    return [
        command,
        "--out-dir", str(out_dir),
        "--train-images", str(images),
        "--train-labels", str(labels),
        "--test-images", str(images),
        "--test-labels", str(labels),
        "--n", "10",
        "--epochs", "1",
        "--batch-size", "20",
        *extra,
    ]


def test_feature_cache_follows_image_contents(tmp_path, tiny_mnist, capsys):
    cache = tmp_path / "cache"
    for name in ("a", "b", "a"):
        args = _mnist_args("train-mnist", tmp_path / "out", tiny_mnist[name], tiny_mnist["labels"], "--layers", "1", "--feature-cache", str(cache))
        assert main(args) == EXIT_OK
    assert "Using cached features" in capsys.readouterr().out

    cached = [read_feature_cache(path) for path in sorted(cache.glob("train_n10_*.bin"))]
    assert len(cached) == 2
    expected = mnist_dataset(*load_mnist_idx(tiny_mnist["b"], tiny_mnist["labels"]), 10).inputs
    assert any(np.array_equal(features, expected) for features in cached)
    assert (tmp_path / "out" / "train-mnist" / "confusion.csv").exists()


def test_mnist_summary_command(tmp_path, tiny_mnist):
    config = tmp_path / "summary.yaml"
    config.write_text("train_mnist:\n  sweep_layers: [1]\n")
    args = _mnist_args("mnist-summary", tmp_path, tiny_mnist["a"], tiny_mnist["labels"], "--config", str(config))
    assert main(args) == EXIT_OK
    rows = _rows(tmp_path / "mnist-summary" / "mnist_summary.csv")
    assert rows[0] == ["layers", "without_activation", "untrained_gain", "trained_gain"]
    assert len(rows) == 2 and rows[1][0] == "1"
    # Random pixels cannot reach the accuracy windows
    assert main(args + ["--check"]) == EXIT_CHECK


def test_damaged_gzip_exits_with_data_code(tmp_path, tiny_mnist):
    (tmp_path / "images.gz").write_bytes(b"\x1f\x8b\x08\x00 truncated")
    args = _mnist_args("train-mnist", tmp_path, tmp_path / "images.gz", tiny_mnist["labels"])
    assert main(args) == EXIT_DATA


@pytest.mark.slow
def test_mnist_two_layer_accuracy(tmp_path, mnist_dir):
    args = [
        "train-mnist",
        "--out-dir", str(tmp_path),
        "--train-images", str(mnist_dir / "train-images-idx3-ubyte"),
        "--train-labels", str(mnist_dir / "train-labels-idx1-ubyte"),
        "--test-images", str(mnist_dir / "t10k-images-idx3-ubyte"),
        "--test-labels", str(mnist_dir / "t10k-labels-idx1-ubyte"),
        "--check",
    ]
    assert main(args) == EXIT_OK
