"""
Parameter sweeps over search methods, model layouts and datasets.

Every sweep returns a flat DataFrame with one row per run, which `summarize` condenses into mean and standard
deviation per group:

- qfm_sweep: final kernel MSE of genetic, memetic and single-layer HEA search per qubit count and seed
- layout_sweep: trained density models on one dataset for every (n_x, n_layers) combination
- dataset_sweep: KLD between each generated dataset and the model trained on it
"""
import dataclasses
from typing import Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from .codec import circuit_metrics
from .console import bcolors, printc
from .data import Dataset, generate, scale_to_interval
from .dmkde import DMKDEModel, density_grid
from .evaluation import evaluate_model_kld, gaussian_kde_batch
from .optimize import SearchConfig, evolve, hea_kernel_fit, search_streams
from .qfm import KernelSpec, PairSet, sample_pairs
from .trainstate import HEALayout, TrainReport, train_state_circuit

SWEEP_KINDS = ("qfm", "layout", "datasets")
QFM_COLUMNS = ["n_qubits", "seed", "method", "mse", "depth"]
LAYOUT_COLUMNS = ["n_x", "n_layers", "n_qubits", "qfm_mse", "ll_initial", "ll_final", "pearson", "mass"]
DATASET_COLUMNS = ["dataset", "n", "ll_initial", "ll_final", "kld_mean", "kld_std"]


def search_feature_map(
    config: SearchConfig,
    kernel: KernelSpec,
    pairs: Optional[PairSet] = None,
    verbose: bool = False,
) -> Tuple[DMKDEModel, pd.DataFrame]:
    """
    Search a feature map and wrap it into a model stub.

    :param config: Search configuration, mode "hea" fits a data-scaled HEA with config.hea_layers layers
    :param kernel: Target kernel
    :param pairs: Frozen pair set, sampled from config.seed if None
    :param verbose: Print progress
    :return: model stub, generation (or epoch) trace
    """
    if config.mode == "hea":
        params, mse_trace = hea_kernel_fit(
            config.n_qubits, config.hea_layers, kernel, config.epochs, config.learning_rate, config.seed,
            pairs=pairs, gradient_method=config.gradient_method, verbose=verbose,
        )
        model = DMKDEModel(n_x=config.n_qubits, kernel=kernel, qfm_params=params, qfm_hea_layers=config.hea_layers)
        trace = pd.DataFrame({"epoch": np.arange(len(mse_trace)), "mse": mse_trace})
        final_mse = mse_trace[-1]
    else:
        best, trace = evolve(config, kernel, pairs, verbose=verbose)
        model = DMKDEModel(
            n_x=config.n_qubits, kernel=kernel, qfm_params=best.params, qfm_chromosome=best.chromosome
        )
        final_mse = best.mse

    model.seeds = {"search": config.seed}
    model.search = {"mode": config.mode, "config": config.to_dict(), "final_mse": float(final_mse)}
    return model, trace


def train_density_model(
    stub: DMKDEModel,
    dataset: Dataset,
    n_layers: int,
    n_a: int = 1,
    epochs: int = 5000,
    learning_rate: float = 0.4,
    seed: int = 0,
    gradient_method: str = "parameter-shift",
    norm_resolution: int = 64,
    verbose: bool = False,
) -> Tuple[DMKDEModel, TrainReport]:
    """
    Scale a dataset onto the kernel interval and train the training circuit of a model stub.

    :param stub: Model with a feature map
    :param dataset: Dataset in data space
    :param n_layers: HEA layers of the training circuit
    :param n_a: Auxiliary qubits
    :param epochs: Gradient ascent epochs
    :param learning_rate: Step size
    :param seed: Seed of the initial angles
    :param gradient_method: "parameter-shift" or "finite-difference"
    :param norm_resolution: Grid cells per dimension for the normalisation constant (0 to skip)
    :param verbose: Print progress
    :return: trained model, training report
    """
    scaled = scale_to_interval(dataset, *stub.kernel.interval)
    layout = HEALayout(n_x=stub.n_x, d=scaled.d, n_a=n_a, n_layers=n_layers)
    report = train_state_circuit(
        layout, stub.feature_map(), scaled, epochs=epochs, learning_rate=learning_rate, seed=seed,
        gradient_method=gradient_method, verbose=verbose,
    )

    low, high = scaled.bounds()
    model = dataclasses.replace(
        stub,
        d=scaled.d,
        layout=layout,
        hea_params=report.params,
        norm_constant=None,
        scale_transform=scaled.scale_transform,
        data_bounds=[(float(lo), float(hi)) for lo, hi in zip(low, high)],
        seeds={**stub.seeds, "train": seed},
        training={**report.to_dict(), "n_points": scaled.n},
    )
    if norm_resolution > 0:
        density_grid(model, resolution=norm_resolution)
    return model, report


def kde_agreement(model: DMKDEModel, dataset: Dataset, resolution: int = 32) -> Tuple[float, float]:
    """
    Compare the model density with the classical Gaussian KDE of its training data on a grid.

    The grid spans the bounding box of the dataset and is normalised on its own, independent of the stored
    normalisation constant of the model.

    :param model: Trained model
    :param dataset: Training dataset in data space
    :param resolution: Grid cells per dimension
    :return: Pearson correlation of the two grids, Riemann mass of the model grid
    """
    raw = dataset.raw_points()
    bounds = [(float(lo), float(hi)) for lo, hi in zip(raw.min(axis=0), raw.max(axis=0))]
    grid = density_grid(dataclasses.replace(model, norm_constant=None), bounds=bounds, resolution=resolution)

    scaled = model.to_kernel_space(raw, warn=False)
    reference = gaussian_kde_batch(scaled, model.kernel.gamma, model.to_kernel_space(grid.points(), warn=False))
    return float(np.corrcoef(grid.values.ravel(), reference)[0, 1]), grid.mass()


def qfm_sweep(
    qubits: Sequence[int],
    kernel: KernelSpec,
    seeds: Sequence[int],
    search: Optional[SearchConfig] = None,
    hea_layers: int = 1,
    verbose: bool = False,
) -> pd.DataFrame:
    """
    Compare genetic, memetic and HEA feature maps on shared pair sets.

    All three methods of one (n_qubits, seed) cell see the same pairs. The HEA is fitted with the epochs and
    learning rate of the search configuration.

    :param qubits: Qubit counts n_x
    :param kernel: Target kernel
    :param seeds: Run seeds
    :param search: Search budget (n_qubits, seed and mode are overridden), defaults of SearchConfig if None
    :param hea_layers: Layers of the HEA baseline
    :param verbose: Print one line per run
    :return: DataFrame with columns n_qubits, seed, method, mse, depth
    """
    search = search or SearchConfig()
    rows = []

    for n_qubits in qubits:
        for seed in seeds:
            pairs = sample_pairs(kernel, search_streams(seed)[0])
            for mode in ("genetic", "memetic", "hea"):
                config = dataclasses.replace(search, n_qubits=n_qubits, seed=seed, mode=mode, hea_layers=hea_layers)
                model, _ = search_feature_map(config, kernel, pairs)
                rows.append(
                    {
                        "n_qubits": n_qubits,
                        "seed": seed,
                        "method": mode,
                        "mse": model.search["final_mse"],
                        "depth": circuit_metrics(model.qfm_circuit()).depth,
                    }
                )
                if verbose:
                    printc(f"{mode} n_x={n_qubits} seed={seed}: MSE {rows[-1]['mse']:.6g}", col=bcolors.OKCYAN)

    return pd.DataFrame(rows, columns=QFM_COLUMNS)


def layout_sweep(
    dataset: Dataset,
    kernel: KernelSpec,
    n_x_values: Sequence[int],
    layer_values: Sequence[int],
    n_a: int = 1,
    search: Optional[SearchConfig] = None,
    epochs: int = 5000,
    learning_rate: float = 0.4,
    seed: int = 0,
    resolution: int = 32,
    verbose: bool = False,
) -> pd.DataFrame:
    """
    Train a density model for every combination of feature map qubits and training circuit layers.

    One feature map is searched per n_x and shared by all layer counts.

    :param dataset: Dataset in data space
    :param kernel: Target kernel
    :param n_x_values: Qubits per feature
    :param layer_values: HEA layers of the training circuit
    :param n_a: Auxiliary qubits
    :param search: Feature map search budget (n_qubits and seed are overridden)
    :param epochs: Training epochs
    :param learning_rate: Training step size
    :param seed: Seed of the search and of the initial training angles
    :param resolution: Grid cells per dimension of the KDE comparison
    :param verbose: Print one line per run
    :return: DataFrame with columns n_x, n_layers, n_qubits, qfm_mse, ll_initial, ll_final, pearson, mass
    """
    search = search or SearchConfig()
    rows = []

    for n_x in n_x_values:
        stub, _ = search_feature_map(dataclasses.replace(search, n_qubits=n_x, seed=seed), kernel)
        for n_layers in layer_values:
            model, report = train_density_model(
                stub, dataset, n_layers, n_a, epochs, learning_rate, seed, norm_resolution=0
            )
            pearson, mass = kde_agreement(model, dataset, resolution)
            rows.append(
                {
                    "n_x": n_x,
                    "n_layers": n_layers,
                    "n_qubits": model.layout.n_qubits,  # type: ignore
                    "qfm_mse": stub.search["final_mse"],
                    "ll_initial": report.initial,
                    "ll_final": report.final,
                    "pearson": pearson,
                    "mass": mass,
                }
            )
            if verbose:
                printc(f"n_x={n_x} n_l={n_layers}: Pearson {pearson:.4f}", col=bcolors.OKCYAN)

    return pd.DataFrame(rows, columns=LAYOUT_COLUMNS)


def dataset_sweep(
    names: Sequence[str],
    kernel: KernelSpec,
    n: int = 2000,
    n_x: int = 2,
    n_layers: int = 5,
    n_a: int = 1,
    search: Optional[SearchConfig] = None,
    epochs: int = 5000,
    learning_rate: float = 0.4,
    seed: int = 0,
    n_seeds: int = 50,
    k: int = 5,
    threads: int = 1,
    verbose: bool = False,
) -> pd.DataFrame:
    """
    Train one model per generated dataset and estimate its KLD over sampling seeds.

    The feature map does not depend on the data and is searched once.

    :param names: Generator names
    :param kernel: Target kernel
    :param n: Points per dataset
    :param n_x: Qubits per feature
    :param n_layers: HEA layers of the training circuit
    :param n_a: Auxiliary qubits
    :param search: Feature map search budget (n_qubits and seed are overridden)
    :param epochs: Training epochs
    :param learning_rate: Training step size
    :param seed: Seed of data generation, search, training and sampling
    :param n_seeds: Sampling seeds of the KLD estimate
    :param k: Neighbour rank
    :param threads: Worker threads of the KLD estimate
    :param verbose: Print one line per dataset
    :return: DataFrame with columns dataset, n, ll_initial, ll_final, kld_mean, kld_std
    """
    search = search or SearchConfig()
    stub, _ = search_feature_map(dataclasses.replace(search, n_qubits=n_x, seed=seed), kernel)
    rows = []

    for name in names:
        dataset = generate(name, n, seed=seed)
        model, report = train_density_model(stub, dataset, n_layers, n_a, epochs, learning_rate, seed, norm_resolution=0)
        kld = evaluate_model_kld(model, dataset, n_seeds=n_seeds, k=k, seed=seed, threads=threads)
        rows.append(
            {
                "dataset": name,
                "n": n,
                "ll_initial": report.initial,
                "ll_final": report.final,
                "kld_mean": kld.mean,
                "kld_std": kld.std_dev,
            }
        )
        if verbose:
            printc(f"{name}: {kld.summary()}", col=bcolors.OKCYAN)

    return pd.DataFrame(rows, columns=DATASET_COLUMNS)


def summarize(results: pd.DataFrame, by: Sequence[str], value: str) -> pd.DataFrame:
    """
    Get mean, standard deviation and run count of a result column per group.

    :param results: Sweep result
    :param by: Grouping columns
    :param value: Result column
    :return: DataFrame with the grouping columns and mean, std, runs
    """
    grouped = results.groupby(list(by))[value]
    return pd.DataFrame(
        {"mean": grouped.mean(), "std": grouped.std(ddof=0), "runs": grouped.count()}
    ).reset_index()
