import json

import numpy as np
import pandas as pd
import pytest

from memo_qcd.cli import build_parser, main
from memo_qcd.config import CONFIG_FILENAME
from memo_qcd.dmkde import DMKDEModel


def run(*argv) -> int:
    with pytest.raises(SystemExit) as e:
        main(list(argv))
    return e.value.code


@pytest.fixture
def workdir(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    monkeypatch.delenv("MEMOQCD_THREADS", raising=False)
    return tmp_path


@pytest.fixture
def pipeline(workdir):
    """Dataset, feature map stub and trained model of a tiny run."""
    assert run("datagen", "--n", "20", "--seed", "1", "--out", "data.csv") == 0
    assert run(
        "qfm-search", "--mode", "genetic", "--qubits", "1", "--pairs", "50", "--generations", "2",
        "--population", "3", "--gates", "2", "--out", "stub.json",
    ) == 0
    assert run(
        "train", "--model", "stub.json", "--data", "data.csv", "--layers", "1", "--epochs", "3",
        "--lr", "0.05", "--norm-resolution", "8", "--out", "model.json",
    ) == 0
    return workdir


def test_datagen(workdir):
    """Test dataset generation and its manifest."""
    assert run("datagen", "--name", "circles", "--n", "30", "--out", "circles.csv") == 0

    lines = (workdir / "circles.csv").read_text().splitlines()
    assert lines[0] == "# d=2 generator=circles seed=0"
    assert len(lines) == 31

    manifest = json.loads((workdir / "circles.manifest.json").read_text())
    assert manifest["command"] == "datagen"
    assert "circles.csv" in manifest["artifacts"]


def test_config_file_sets_defaults(workdir):
    """Test that the config file overrides flag defaults."""
    (workdir / CONFIG_FILENAME).write_text("datagen:\n  n: 7\n")
    assert run("datagen", "--out", "small.csv") == 0
    assert len((workdir / "small.csv").read_text().splitlines()) == 8


def test_build_parser_defaults():
    """Test defaults of the sub-commands."""
    parser = build_parser()
    args = parser.parse_args(["qfm-search", "--out", "stub.json"])
    assert (args.mode, args.qubits, args.gamma, args.pairs) == ("memetic", 2, 0.1, 10_000)
    assert (args.generations, args.population, args.epochs, args.lr) == (30, 15, 2000, 0.2)

    args = parser.parse_args(["train", "--model", "m.json", "--data", "d.csv"])
    assert (args.layers, args.aux, args.epochs, args.lr) == (2, 1, 5000, 0.4)

    args = parser.parse_args(["kld", "--model", "m.json", "--data", "d.csv", "--out", "k.csv"])
    assert (args.seeds, args.k) == (50, 5)


@pytest.mark.parametrize(
    "argv",
    [
        ["qfm-search", "--qubits", "0", "--out", "stub.json"],
        ["qfm-search", "--gamma", "-1", "--out", "stub.json"],
        ["qfm-search", "--interval", "1", "0", "--out", "stub.json"],
        ["datagen", "--n", "0", "--out", "d.csv"],
        ["datagen", "--threads", "0", "--out", "d.csv"],
        ["train", "--model", "missing.json", "--data", "missing.csv"],
        ["estimate", "--model", "missing.json", "--point", "0,0"],
        ["kld", "--model", "missing.json", "--data", "missing.csv", "--out", "k.csv"],
        ["sweep", "--kind", "qfm", "--qubits", "0", "--out", "s.csv"],
        ["sweep", "--kind", "datasets", "--layers", "2", "5", "--out", "s.csv"],
        ["sweep", "--kind", "layout", "--data", "missing.csv", "--out", "s.csv"],
        ["sweep", "--kind", "annealing", "--out", "s.csv"],
        ["datagen"],
        ["unknown"],
    ],
)
def test_usage_errors(workdir, argv):
    """Test that invalid invocations exit with code 2."""
    assert run(*argv) == 2


def test_runtime_errors(workdir):
    """Test that failing runs exit with code 1."""
    assert run("datagen", "--noise", "-1", "--out", "d.csv") == 1

    (workdir / "broken.json").write_text("{")
    assert run("estimate", "--model", "broken.json", "--point", "0,0") == 1

    (workdir / "bad.csv").write_text("1,2\n3\n")
    assert run("datagen", "--n", "10", "--out", "stub_data.csv") == 0
    assert run(
        "qfm-search", "--mode", "genetic", "--qubits", "1", "--pairs", "10", "--generations", "1",
        "--population", "2", "--gates", "1", "--out", "stub.json",
    ) == 0
    assert run("train", "--model", "stub.json", "--data", "bad.csv", "--epochs", "1") == 1


def test_search_is_reproducible(workdir):
    """Test that equal seeds write identical model stubs."""
    argv = ["qfm-search", "--mode", "genetic", "--qubits", "2", "--pairs", "30", "--generations", "2",
            "--population", "3", "--gates", "3", "--seed", "4"]
    assert run(*argv, "--out", "a.json") == 0
    assert run(*argv, "--out", "b.json") == 0

    assert (workdir / "a.json").read_text() == (workdir / "b.json").read_text()
    assert (workdir / "a.trace.csv").exists()
    assert not DMKDEModel.load(workdir / "a.json").is_trained


def test_hea_search(workdir):
    """Test the fixed-ansatz feature map fit."""
    assert run(
        "qfm-search", "--mode", "hea", "--qubits", "1", "--hea-layers", "1", "--pairs", "20",
        "--epochs", "2", "--out", "hea.json",
    ) == 0
    model = DMKDEModel.load(workdir / "hea.json")
    assert model.qfm_hea_layers == 1
    assert list(pd.read_csv(workdir / "hea.trace.csv").columns) == ["epoch", "mse"]


def test_estimate_on_stub_is_a_usage_error(pipeline):
    """Test that a stub cannot be evaluated."""
    assert run("estimate", "--model", "stub.json", "--point", "0,0") == 2


def test_train(pipeline):
    """Test the trained model file and trace."""
    model = DMKDEModel.load(pipeline / "model.json")
    assert model.is_trained
    assert model.d == 2
    assert model.norm_constant > 0
    assert model.scale_transform is not None
    assert len(pd.read_csv(pipeline / "model.trace.csv")) == 4
    assert (pipeline / "model.manifest.json").exists()


def test_estimate_point(pipeline):
    """Test point estimates in both modes."""
    assert run("estimate", "--model", "model.json", "--point", "0.1,0.2", "--out", "point.csv") == 0
    result = pd.read_csv(pipeline / "point.csv")
    assert list(result.columns) == ["x0", "x1", "estimate", "density"]
    assert 0.0 <= result["estimate"][0] <= 1.0

    assert run("estimate", "--model", "model.json", "--point", "0.1,0.2", "--mode", "shots", "--shots", "100") == 0
    assert run("estimate", "--model", "model.json", "--point", "0.1") == 2
    assert run("estimate", "--model", "model.json", "--point", "a,b") == 2


def test_estimate_grid_is_normalized(pipeline):
    """Test that the grid on the default bounds has unit mass."""
    assert run("estimate", "--model", "model.json", "--grid", "8", "--out", "grid.csv") == 0
    grid = pd.read_csv(pipeline / "grid.csv")

    assert len(grid) == 64
    dx0 = np.diff(np.unique(grid["x0"]))[0]
    dx1 = np.diff(np.unique(grid["x1"]))[0]
    assert grid["density"].sum() * dx0 * dx1 == pytest.approx(1.0, abs=1e-6)


def test_estimate_grid_exports(pipeline):
    """Test explicit bounds and the PGM export."""
    assert run(
        "estimate", "--model", "model.json", "--grid", "4", "--bounds=-1,1,-1,1", "--out", "grid.pgm"
    ) == 0
    assert (pipeline / "grid.pgm").read_text().startswith("P2\n4 4\n255\n")
    assert run("estimate", "--model", "model.json", "--grid", "4", "--bounds=1,-1,-1,1") == 2
    assert run("estimate", "--model", "model.json", "--grid", "4", "--bounds=-1,1") == 2


def test_kld(pipeline):
    """Test the KLD report."""
    assert run("kld", "--model", "model.json", "--data", "data.csv", "--seeds", "2", "--k", "2", "--out", "kld.csv") == 0
    lines = (pipeline / "kld.csv").read_text().splitlines()
    assert lines[0] == "seed,value"
    assert len(lines) == 4
    assert lines[-1].startswith("# mean=")


def test_log_path(workdir):
    """Test the tabular run log."""
    assert run("datagen", "--n", "5", "--out", "d.csv", "--log-path", "logs") == 0
    assert len(list((workdir / "logs").glob("datagen_*.xlsx"))) == 1
    assert len(list((workdir / "logs").glob("datagen_*.md"))) == 1


def test_sweep_qfm(workdir):
    """Test the search method sweep, its manifest and run log."""
    assert run(
        "sweep", "--kind", "qfm", "--qubits", "1", "--runs", "2", "--pairs", "20", "--generations", "2",
        "--population", "3", "--epochs", "2", "--gates", "2", "--out", "qfm.csv", "--log-path", "logs",
    ) == 0

    results = pd.read_csv(workdir / "qfm.csv")
    assert list(results.columns) == ["n_qubits", "seed", "method", "mse", "depth"]
    assert len(results) == 6
    assert sorted(results["seed"].unique()) == [0, 1]

    manifest = json.loads((workdir / "qfm.manifest.json").read_text())
    assert manifest["config"]["kind"] == "qfm"
    assert manifest["config"]["qubits"] == [1]
    assert len(list((workdir / "logs").glob("sweep_*.xlsx"))) == 1


def test_sweep_layout_on_dataset_file(workdir):
    """Test the layout sweep on a dataset CSV."""
    assert run("datagen", "--n", "15", "--out", "data.csv") == 0
    assert run(
        "sweep", "--kind", "layout", "--data", "data.csv", "--qubits", "1", "--layers", "1", "2",
        "--pairs", "20", "--generations", "1", "--population", "2", "--epochs", "2", "--gates", "1",
        "--train-epochs", "2", "--train-lr", "0.05", "--resolution", "6", "--out", "layout.csv",
    ) == 0

    results = pd.read_csv(workdir / "layout.csv")
    assert results["n_layers"].tolist() == [1, 2]
    np.testing.assert_allclose(results["mass"], 1.0, atol=1e-6)
