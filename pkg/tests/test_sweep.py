import numpy as np
import pandas as pd
import pytest

from memo_qcd.data import two_moons
from memo_qcd.optimize import SearchConfig
from memo_qcd.qfm import KernelSpec
from memo_qcd.sweep import (
    DATASET_COLUMNS,
    LAYOUT_COLUMNS,
    QFM_COLUMNS,
    dataset_sweep,
    kde_agreement,
    layout_sweep,
    qfm_sweep,
    search_feature_map,
    summarize,
    train_density_model,
)

TINY_KERNEL = KernelSpec(n_pairs=50)
TINY_SEARCH = SearchConfig(generations=2, population=3, epochs=3, learning_rate=0.05, n_gates=2)


def test_search_feature_map_modes():
    """Test the model stubs of chromosome and HEA searches."""
    stub, trace = search_feature_map(TINY_SEARCH, TINY_KERNEL)
    assert stub.qfm_chromosome is not None
    assert stub.search["mode"] == "memetic"
    assert len(trace) == 2
    assert stub.search["final_mse"] == pytest.approx(trace["best_mse"].iloc[-1])

    hea = SearchConfig(epochs=4, n_qubits=1, mode="hea")
    stub, trace = search_feature_map(hea, TINY_KERNEL)
    assert stub.qfm_hea_layers == 1
    assert list(trace.columns) == ["epoch", "mse"]
    assert len(trace) == 5
    assert stub.seeds == {"search": 0}


def test_qfm_sweep():
    """Test one row per method, qubit count and seed."""
    results = qfm_sweep([1, 2], TINY_KERNEL, seeds=[0, 1], search=TINY_SEARCH)

    assert list(results.columns) == QFM_COLUMNS
    assert len(results) == 12
    assert set(results["method"]) == {"genetic", "memetic", "hea"}
    assert results["mse"].between(0, 1).all()
    assert (results.loc[results["method"] == "hea", "depth"] > 0).all()

    again = qfm_sweep([1, 2], TINY_KERNEL, seeds=[0, 1], search=TINY_SEARCH)
    pd.testing.assert_frame_equal(results, again)


def test_summarize():
    """Test mean and population standard deviation per group."""
    results = pd.DataFrame({"method": ["a", "a", "b"], "mse": [1.0, 3.0, 2.0]})
    summary = summarize(results, ["method"], "mse")

    assert list(summary.columns) == ["method", "mean", "std", "runs"]
    np.testing.assert_allclose(summary["mean"], [2.0, 2.0])
    np.testing.assert_allclose(summary["std"], [1.0, 0.0])
    assert summary["runs"].tolist() == [2, 1]


def test_train_density_model():
    """Test that a trained model carries layout, scaling and normalisation."""
    dataset = two_moons(n=20, seed=0)
    stub, _ = search_feature_map(SearchConfig(epochs=4, n_qubits=1, mode="hea"), TINY_KERNEL)
    model, report = train_density_model(stub, dataset, 1, epochs=3, learning_rate=0.05, norm_resolution=8)

    assert model.is_trained
    assert model.layout.n_qubits == 3
    assert model.scale_transform is not None
    assert model.norm_constant > 0
    assert model.seeds == {"search": 0, "train": 0}
    assert len(report.ll_trace) == 4
    assert stub.hea_params is None


def test_kde_agreement_grid_is_normalized():
    """Test the self-normalised comparison grid."""
    dataset = two_moons(n=20, seed=0)
    stub, _ = search_feature_map(SearchConfig(epochs=4, n_qubits=1, mode="hea"), TINY_KERNEL)
    model, _ = train_density_model(stub, dataset, 1, epochs=3, learning_rate=0.05, norm_resolution=0)

    pearson, mass = kde_agreement(model, dataset, resolution=8)
    assert -1 <= pearson <= 1
    assert mass == pytest.approx(1.0, abs=1e-6)
    assert model.norm_constant is None


def test_layout_sweep():
    """Test one row per layout with likelihood and grid statistics."""
    dataset = two_moons(n=20, seed=0)
    results = layout_sweep(
        dataset, TINY_KERNEL, [1], [1, 2], search=TINY_SEARCH, epochs=3, learning_rate=0.05, resolution=8
    )

    assert list(results.columns) == LAYOUT_COLUMNS
    assert results["n_layers"].tolist() == [1, 2]
    assert results["n_qubits"].tolist() == [3, 3]
    assert results["qfm_mse"].nunique() == 1
    np.testing.assert_allclose(results["mass"], 1.0, atol=1e-6)
    assert np.all(np.isfinite(results[["ll_initial", "ll_final", "pearson"]].values))


def test_dataset_sweep():
    """Test one KLD row per generated dataset."""
    results = dataset_sweep(
        ["two-moons", "blobs"], TINY_KERNEL, n=30, n_x=1, n_layers=1, search=TINY_SEARCH,
        epochs=3, learning_rate=0.05, n_seeds=2, k=3,
    )

    assert list(results.columns) == DATASET_COLUMNS
    assert results["dataset"].tolist() == ["two-moons", "blobs"]
    assert (results["n"] == 30).all()
    assert np.all(np.isfinite(results[["kld_mean", "kld_std"]].values))
    assert (results["kld_std"] >= 0).all()
