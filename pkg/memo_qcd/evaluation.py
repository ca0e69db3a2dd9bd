"""
Evaluation of estimated densities.

- gaussian_kde: the normalised classical estimator the quantum model approximates
- kld_knn: k-nearest-neighbour estimate of the Kullback-Leibler divergence between two samples
- rejection_sample: draws samples from a density known up to a constant
- evaluate_model_kld: KLD between a dataset and samples of a model, averaged over sampling seeds
"""
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy.spatial.distance import cdist

from .data import Dataset, as_points
from .dmkde import BOUNDS_PADDING, DensityGrid, DMKDEModel, estimate_exact_batch

KNN_JITTER = 1e-12
CHUNK_SIZE = 1024

DensityFunction = Callable[[np.ndarray], np.ndarray]
Bounds = List[Tuple[float, float]]


def gaussian_kde_batch(dataset, gamma: float, points: np.ndarray) -> np.ndarray:
    """
    Evaluate the normalised Gaussian KDE (1/N) (gamma/pi)^(d/2) sum_i exp(-gamma ||x - x_i||^2) at many points.

    :param dataset: Dataset or array of shape (N, d)
    :param gamma: Kernel bandwidth
    :param points: Query points of shape (M, d)
    :return: density values
    """
    train = as_points(dataset)
    if train.shape[0] == 0:
        raise ValueError("Dataset must not be empty")
    if not gamma > 0:
        raise ValueError(f"Bandwidth gamma must be positive, got {gamma}")
    points = as_points(points)
    d = train.shape[1]

    values = np.empty(points.shape[0])
    for start in range(0, points.shape[0], CHUNK_SIZE):
        sq = cdist(points[start : start + CHUNK_SIZE], train, "sqeuclidean")
        values[start : start + CHUNK_SIZE] = np.exp(-gamma * sq).mean(axis=1)
    return values * (gamma / np.pi) ** (d / 2)


def gaussian_kde(dataset, gamma: float, x: Union[float, Sequence[float], np.ndarray]) -> float:
    """
    Evaluate the normalised Gaussian KDE at a single point.

    :param dataset: Dataset or array of shape (N, d)
    :param gamma: Kernel bandwidth
    :param x: Query point
    :return: density value
    """
    point = np.atleast_1d(np.asarray(x, dtype=float))
    return float(gaussian_kde_batch(dataset, gamma, point[None, :])[0])


def _kth_distances(queries: np.ndarray, sample: np.ndarray, k: int, exclude_self: bool) -> np.ndarray:
    distances = np.empty(queries.shape[0])
    for start in range(0, queries.shape[0], CHUNK_SIZE):
        block = cdist(queries[start : start + CHUNK_SIZE], sample)
        if exclude_self:
            rows = np.arange(block.shape[0])
            block[rows, start + rows] = np.inf
        distances[start : start + CHUNK_SIZE] = np.partition(block, k - 1, axis=1)[:, k - 1]
    return distances


def kld_knn(x: np.ndarray, x_prime: np.ndarray, k: int = 5) -> float:
    """
    Estimate D(T || P) from a sample x of T and a sample x_prime of P.

    With r_k(x_i) the distance of x_i to its k-th neighbour in x without x_i and s_k(x_i) the distance to its k-th
    neighbour in x_prime, the estimate is d/n sum_i log(s_k / r_k) + log(m / (n - 1)). Neighbours are found by
    brute force.

    :param x: Samples of T, shape (n, d)
    :param x_prime: Samples of P, shape (m, d)
    :param k: Neighbour rank
    :return: divergence estimate
    """
    x = as_points(x)
    x_prime = as_points(x_prime)
    n, d = x.shape
    m = x_prime.shape[0]
    if x_prime.shape[1] != d:
        raise ValueError(f"Samples differ in dimension ({d} vs {x_prime.shape[1]})")
    if k < 1 or not n > k or m < k:
        raise ValueError(f"Need n > k and m >= k, got n={n}, m={m}, k={k}")

    r = _kth_distances(x, x, k, exclude_self=True)
    s = _kth_distances(x, x_prime, k, exclude_self=False)

    if np.any(r == 0) or np.any(s == 0):
        warnings.warn(f"Duplicate points give zero neighbour distances, replaced by {KNN_JITTER}")
        r = np.maximum(r, KNN_JITTER)
        s = np.maximum(s, KNN_JITTER)

    return float(d / n * np.sum(np.log(s / r)) + np.log(m / (n - 1)))


@dataclass
class SampleSet:
    """Accepted samples of a rejection sampling run."""

    points: np.ndarray
    n_proposed: int
    envelope: float

    @property
    def acceptance_rate(self) -> float:
        """Fraction of accepted proposals of the final run."""
        return self.points.shape[0] / self.n_proposed if self.n_proposed else 0.0

    def __len__(self) -> int:
        return self.points.shape[0]


def _grid_density(grid: DensityGrid) -> DensityFunction:
    low = np.array([lo for lo, _ in grid.axes])
    high = np.array([hi for _, hi in grid.axes])
    res = np.array(grid.resolution)

    def density(points: np.ndarray) -> np.ndarray:
        index = np.floor((points - low) / (high - low) * res).astype(int)
        index = np.clip(index, 0, res - 1)
        return grid.values[tuple(index.T)]

    return density


def _grid_max(density: DensityFunction, low: np.ndarray, high: np.ndarray, resolution: int) -> float:
    axes = [lo + (np.arange(resolution) + 0.5) * (hi - lo) / resolution for lo, hi in zip(low, high)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return float(np.max(density(np.column_stack([m.ravel() for m in mesh]))))


def rejection_sample(
    density: Union[DensityGrid, DensityFunction],
    bounds: Optional[Bounds],
    count: int,
    seed: Union[int, np.random.Generator, None] = 0,
    max_density: Optional[float] = None,
    margin: float = 1.05,
    batch_size: int = 4096,
    scan_resolution: Optional[int] = None,
) -> SampleSet:
    """
    Draw samples from a density known up to a constant.

    Proposals are uniform over the bounds and accepted with probability density(x) / envelope. For a DensityGrid
    the envelope is its maximum; for a function it is `max_density` or the maximum over a scan grid times
    `margin`. A proposal above the envelope raises the envelope, warns and restarts the run.

    :param density: DensityGrid (piecewise constant) or function mapping (N, d) points to values
    :param bounds: (min, max) per dimension, the grid axes if None
    :param count: Number of samples (>= 1)
    :param seed: Seed or generator
    :param max_density: Known upper bound of the density function
    :param margin: Factor applied to a scanned maximum
    :param batch_size: Proposals per batch
    :param scan_resolution: Scan points per dimension (64 in 1D, 32 otherwise)
    :return: SampleSet with exactly `count` points inside the bounds
    """
    if count < 1:
        raise ValueError(f"At least one sample is required, got {count}")

    if isinstance(density, DensityGrid):
        if bounds is None:
            bounds = density.axes
        envelope = float(density.values.max())
        function = _grid_density(density)
    else:
        if bounds is None:
            raise ValueError("Bounds are required for a density function")
        function = density
        envelope = None if max_density is None else float(max_density)

    low = np.array([lo for lo, _ in bounds], dtype=float)
    high = np.array([hi for _, hi in bounds], dtype=float)
    if np.any(high <= low):
        raise ValueError(f"Bounds must satisfy min < max, got {bounds}")

    if envelope is None:
        resolution = scan_resolution or (64 if low.shape[0] == 1 else 32)
        envelope = margin * _grid_max(function, low, high, resolution)
    if not envelope > 0:
        raise ValueError("Maximum density is 0, nothing can be sampled")

    rng = np.random.default_rng(seed)
    accepted: List[np.ndarray] = []
    n_accepted = 0
    n_proposed = 0

    while n_accepted < count:
        proposals = rng.uniform(low, high, size=(batch_size, low.shape[0]))
        values = np.asarray(function(proposals), dtype=float)
        peak = values.max()
        if peak > envelope:
            warnings.warn(f"Density {peak:.6g} exceeds the envelope {envelope:.6g}, restarting with a raised envelope")
            envelope = margin * peak
            accepted, n_accepted, n_proposed = [], 0, 0
            continue

        keep = rng.random(batch_size) * envelope < values
        needed = count - n_accepted
        if keep.sum() >= needed:
            # count the proposals up to the last accepted one
            last = np.flatnonzero(keep)[needed - 1]
            accepted.append(proposals[: last + 1][keep[: last + 1]])
            n_proposed += last + 1
            n_accepted = count
        else:
            accepted.append(proposals[keep])
            n_proposed += batch_size
            n_accepted += int(keep.sum())

    return SampleSet(np.vstack(accepted), n_proposed, envelope)


@dataclass
class KLDReport:
    """KLD estimates of one model over several sampling seeds."""

    values: List[float]
    seeds: List[int]  # index of the stream spawned from the root seed
    k: int
    n: int
    m: int

    @property
    def mean(self) -> float:
        """Mean over seeds."""
        return float(np.mean(self.values))

    @property
    def std_dev(self) -> float:
        """Standard deviation over seeds (population form)."""
        return float(np.std(self.values))

    def to_frame(self) -> pd.DataFrame:
        """
        Get the per-seed values as pandas DataFrame.

        :return: DataFrame with columns seed, value
        """
        return pd.DataFrame({"seed": self.seeds, "value": self.values})

    def summary(self) -> str:
        """
        Get a one-line summary.

        :return: summary string
        """
        return f"mean={self.mean:.17g} std_dev={self.std_dev:.17g} k={self.k} n={self.n} m={self.m} seeds={len(self.values)}"

    def to_csv(self, path: Union[str, Path]) -> None:
        """
        Write the per-seed values as CSV followed by the summary as comment line.

        :param path: File path
        :return: None
        """
        with open(path, "w", newline="") as f:
            self.to_frame().to_csv(f, index=False, float_format="%.17g")
            f.write(f"# {self.summary()}\n")


def sampling_bounds(model: DMKDEModel, points: np.ndarray, padding: float = BOUNDS_PADDING) -> Bounds:
    """
    Get the bounding box of data-space points padded by `padding` / sqrt(gamma) in kernel space.

    :param model: Model whose kernel and scale transform apply
    :param points: Points in data space
    :param padding: Padding in units of 1 / sqrt(gamma)
    :return: list of (min, max) per dimension in data space
    """
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        scaled = model.to_kernel_space(points)
    pad = padding / np.sqrt(model.kernel.gamma)
    low, high = scaled.min(axis=0) - pad, scaled.max(axis=0) + pad
    if model.scale_transform is not None:
        low, high = model.scale_transform.inverse(low), model.scale_transform.inverse(high)
    return [(float(lo), float(hi)) for lo, hi in zip(low, high)]


def evaluate_model_kld(
    model: DMKDEModel,
    dataset,
    n_seeds: int = 50,
    k: int = 5,
    seed: int = 0,
    bounds: Optional[Bounds] = None,
    padding: float = BOUNDS_PADDING,
    threads: int = 1,
) -> KLDReport:
    """
    Estimate the KLD between a dataset and the model density, averaged over sampling seeds.

    For every seed, |dataset| points are rejection sampled from the model density and compared with the dataset by
    kld_knn(dataset, samples, k). Seeds are derived from `seed`, so results do not depend on `threads`.

    :param model: Trained model
    :param dataset: Dataset (scaled datasets are mapped back to data space) or array of data-space points
    :param n_seeds: Number of sampling seeds (>= 1)
    :param k: Neighbour rank
    :param seed: Root seed
    :param bounds: Sampling region in data space, padded bounding box of the dataset if None
    :param padding: Padding in units of 1 / sqrt(gamma)
    :param threads: Worker threads
    :return: KLDReport
    """
    if n_seeds < 1:
        raise ValueError(f"At least one seed is required, got {n_seeds}")

    points = dataset.raw_points() if isinstance(dataset, Dataset) else as_points(dataset)
    if bounds is None:
        bounds = sampling_bounds(model, points, padding)

    def density(x: np.ndarray) -> np.ndarray:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            return estimate_exact_batch(model, x)

    # the projection is bounded by 1, which makes it a valid envelope
    envelope = min(1.0, 1.05 * _grid_max(density, np.array(bounds)[:, 0], np.array(bounds)[:, 1], 32))
    sequences = np.random.SeedSequence(seed).spawn(n_seeds)

    def run(sequence: np.random.SeedSequence) -> float:
        samples = rejection_sample(
            density, bounds, points.shape[0], np.random.default_rng(sequence), max_density=envelope
        )
        return kld_knn(points, samples.points, k)

    with ThreadPoolExecutor(max_workers=threads) as executor:
        values = list(executor.map(run, sequences))

    return KLDReport(
        values=values,
        seeds=list(range(n_seeds)),
        k=k,
        n=points.shape[0],
        m=points.shape[0],
    )
