"""
Synthetic datasets, dataset IO and feature scaling.

The feature map is trained on a fixed interval [a, b], so datasets are min-max scaled into that interval before
training. The scale transform travels with the dataset (and later the model), which allows grids and query points
to be given in the original data space.
"""
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd


class DatasetFormatException(Exception):
    """Dataset file could not be parsed."""


def _frozen(values: Union[Sequence[float], np.ndarray]) -> np.ndarray:
    array = np.array(values, dtype=float)
    array.flags.writeable = False
    return array


@dataclass(frozen=True, eq=False)
class ScaleTransform:
    """Per-dimension affine map of the source range [low, high] onto the target interval [a, b]."""

    low: np.ndarray
    high: np.ndarray
    a: float
    b: float

    def __post_init__(self) -> None:
        low = _frozen(self.low).ravel()
        high = _frozen(self.high).ravel()
        if low.shape != high.shape or np.any(high < low):
            raise ValueError("Source range must satisfy low <= high in every dimension")
        if not self.a < self.b:
            raise ValueError(f"Target interval must satisfy a < b, got [{self.a}, {self.b}]")
        object.__setattr__(self, "low", low)
        object.__setattr__(self, "high", high)

    @property
    def d(self) -> int:
        """Number of dimensions."""
        return self.low.shape[0]

    @property
    def degenerate(self) -> np.ndarray:
        """Mask of dimensions with zero spread."""
        return self.high == self.low

    def apply(self, points: np.ndarray) -> np.ndarray:
        """
        Map points from data space into the target interval.

        Zero-spread dimensions map onto the interval midpoint.

        :param points: Array of shape (N, d)
        :return: scaled points
        """
        points = np.asarray(points, dtype=float)
        spread = np.where(self.degenerate, 1.0, self.high - self.low)
        scaled = self.a + (points - self.low) / spread * (self.b - self.a)
        scaled = np.where(points == self.high, self.b, scaled)
        return np.where(self.degenerate, (self.a + self.b) / 2, scaled)

    def inverse(self, points: np.ndarray) -> np.ndarray:
        """
        Map scaled points back into data space.

        :param points: Array of shape (N, d)
        :return: points in data space
        """
        points = np.asarray(points, dtype=float)
        spread = self.high - self.low
        return self.low + (points - self.a) / (self.b - self.a) * spread

    def to_dict(self) -> Dict:
        """
        Get the transform as JSON-compatible dictionary.

        :return: dict representation
        """
        return {"low": self.low.tolist(), "high": self.high.tolist(), "a": self.a, "b": self.b}

    @classmethod
    def from_dict(cls, d: Dict) -> "ScaleTransform":
        """
        Create a transform from its dictionary representation.

        :param d: dict as produced by to_dict()
        :return: ScaleTransform
        """
        return cls(low=d["low"], high=d["high"], a=float(d["a"]), b=float(d["b"]))


@dataclass(frozen=True)
class Dataset:
    """Finite set of d-dimensional points with its provenance."""

    points: np.ndarray
    provenance: str = ""
    generator: Optional[str] = None
    seed: Optional[int] = None
    scale_transform: Optional[ScaleTransform] = field(default=None, repr=False)

    def __post_init__(self) -> None:
        points = np.array(self.points, dtype=float)
        if points.ndim == 1:
            points = points[:, None]
        if points.ndim != 2:
            raise ValueError(f"Points must form a 2D array, got shape {points.shape}")
        if not np.all(np.isfinite(points)):
            raise ValueError("All points must be finite")
        if self.scale_transform is not None and self.scale_transform.d != points.shape[1]:
            raise ValueError("Scale transform dimension does not match the points")
        points.flags.writeable = False
        object.__setattr__(self, "points", points)

    @property
    def n(self) -> int:
        """Number of points."""
        return self.points.shape[0]

    @property
    def d(self) -> int:
        """Number of features."""
        return self.points.shape[1]

    def __len__(self) -> int:
        return self.n

    def bounds(self) -> Tuple[np.ndarray, np.ndarray]:
        """
        Get the bounding box of the points.

        :return: per-dimension minima, per-dimension maxima
        """
        if self.n == 0:
            raise ValueError("Empty dataset has no bounds")
        return self.points.min(axis=0), self.points.max(axis=0)

    def raw_points(self) -> np.ndarray:
        """
        Get the points in data space (undoing a stored scale transform).

        :return: array of shape (N, d)
        """
        if self.scale_transform is None:
            return np.array(self.points)
        return self.scale_transform.inverse(self.points)

    def to_frame(self) -> pd.DataFrame:
        """
        Get the points as pandas DataFrame.

        :return: DataFrame with columns x0 .. x{d-1}
        """
        return pd.DataFrame(self.points, columns=[f"x{j}" for j in range(self.d)])

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Dataset):
            return NotImplemented
        return np.array_equal(self.points, other.points)

    def __hash__(self) -> int:
        return hash(self.points.tobytes())


def as_points(dataset: Union[Dataset, np.ndarray, Sequence]) -> np.ndarray:
    """
    Get the point array of a dataset or array-like.

    :param dataset: Dataset or array-like of shape (N, d) (1D input is read as N points of one feature)
    :return: float array of shape (N, d)
    """
    if isinstance(dataset, Dataset):
        return dataset.points
    points = np.asarray(dataset, dtype=float)
    if points.ndim == 1:
        points = points[:, None]
    return points


def _check_n(n: int) -> None:
    if n < 2:
        raise ValueError(f"At least 2 points are required, got {n}")


def _finish(points: np.ndarray, rng: np.random.Generator, noise_sd: float, name: str, seed) -> Dataset:
    if noise_sd < 0:
        raise ValueError(f"Noise level must not be negative, got {noise_sd}")
    if noise_sd > 0:
        points = points + rng.normal(scale=noise_sd, size=points.shape)
    points = points[rng.permutation(points.shape[0])]
    return Dataset(points, provenance=f"{name}(seed={seed})", generator=name, seed=seed)


def two_moons(n: int = 1000, noise_sd: float = 0.1, seed: Optional[int] = 0) -> Dataset:
    """
    Generate two interleaved half circles.

    The outer arc is the upper unit half circle around (0, 0), the inner arc the lower unit half circle around
    (1, 0.5).

    :param n: Number of points (>= 2)
    :param noise_sd: Standard deviation of the Gaussian noise
    :param seed: Seed
    :return: Dataset
    """
    _check_n(n)
    rng = np.random.default_rng(seed)
    n_outer = n // 2
    n_inner = n - n_outer

    t_outer = np.linspace(0.0, np.pi, n_outer)
    t_inner = np.linspace(0.0, np.pi, n_inner)
    outer = np.column_stack([np.cos(t_outer), np.sin(t_outer)])
    inner = np.column_stack([1.0 - np.cos(t_inner), 0.5 - np.sin(t_inner)])

    return _finish(np.vstack([outer, inner]), rng, noise_sd, "two-moons", seed)


def concentric_circles(
    n: int = 2000,
    noise_sd: float = 0.05,
    seed: Optional[int] = 0,
    radii: Tuple[float, float] = (0.5, 1.0),
) -> Dataset:
    """
    Generate two concentric circles around the origin.

    :param n: Number of points (>= 2)
    :param noise_sd: Standard deviation of the Gaussian noise
    :param seed: Seed
    :param radii: Radii of the inner and the outer circle
    :return: Dataset
    """
    _check_n(n)
    rng = np.random.default_rng(seed)
    parts = []
    for radius, count in zip(radii, (n // 2, n - n // 2)):
        t = np.linspace(0.0, 2 * np.pi, count, endpoint=False)
        parts.append(radius * np.column_stack([np.cos(t), np.sin(t)]))
    return _finish(np.vstack(parts), rng, noise_sd, "circles", seed)


DEFAULT_BLOB_CENTERS = ((-2.0, -1.0), (0.0, 2.0), (2.0, -1.0))


def gaussian_blobs(
    n: int = 2000,
    centers: Sequence[Sequence[float]] = DEFAULT_BLOB_CENTERS,
    sd: float = 0.3,
    seed: Optional[int] = 0,
    stretch: float = 0.4,
) -> Dataset:
    """
    Generate anisotropic Gaussian blobs.

    Points are split as evenly as possible over the centers. In 2D, each blob is squeezed by `stretch` along one
    axis and rotated by an angle depending on its index; other dimensions get isotropic blobs.

    :param n: Number of points (>= 2)
    :param centers: Blob centers, shape (k, d) with d <= 4
    :param sd: Standard deviation along the major axis
    :param seed: Seed
    :param stretch: Ratio of minor to major axis (2D only)
    :return: Dataset
    """
    _check_n(n)
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    k, d = centers.shape
    if d > 4:
        raise ValueError(f"Blobs are generated up to 4 dimensions, got {d}")
    if sd < 0:
        raise ValueError(f"Standard deviation must not be negative, got {sd}")

    rng = np.random.default_rng(seed)
    parts = []
    for index, count in enumerate(len(c) for c in np.array_split(np.arange(n), k)):
        noise = rng.normal(size=(count, d)) * sd
        if d == 2:
            angle = np.pi * index / k
            rotation = np.array([[np.cos(angle), -np.sin(angle)], [np.sin(angle), np.cos(angle)]])
            noise = (noise * np.array([1.0, stretch])) @ rotation.T
        parts.append(centers[index] + noise)

    return _finish(np.vstack(parts), rng, 0.0, "blobs", seed)


def spirals(n: int = 2000, noise_sd: float = 0.05, seed: Optional[int] = 0, turns: float = 1.5) -> Dataset:
    """
    Generate two interleaved Archimedean spirals.

    :param n: Number of points (>= 2)
    :param noise_sd: Standard deviation of the Gaussian noise
    :param seed: Seed
    :param turns: Number of turns of each arm
    :return: Dataset
    """
    _check_n(n)
    rng = np.random.default_rng(seed)
    parts = []
    for sign, count in zip((1.0, -1.0), (n // 2, n - n // 2)):
        t = np.linspace(0.25, 1.0, count) * turns * 2 * np.pi
        radius = t / (turns * 2 * np.pi)
        parts.append(sign * radius[:, None] * np.column_stack([np.cos(t), np.sin(t)]))
    return _finish(np.vstack(parts), rng, noise_sd, "spirals", seed)


GENERATORS: Dict[str, Callable[..., Dataset]] = {
    "two-moons": two_moons,
    "circles": concentric_circles,
    "blobs": gaussian_blobs,
    "spirals": spirals,
}


def generate(name: str, n: int, noise: Optional[float] = None, seed: Optional[int] = 0) -> Dataset:
    """
    Generate a dataset by name.

    :param name: One of GENERATORS
    :param n: Number of points
    :param noise: Noise level (blob standard deviation for "blobs"), generator default if None
    :param seed: Seed
    :return: Dataset
    """
    if name not in GENERATORS:
        raise ValueError(f'Unknown generator "{name}", expected one of {sorted(GENERATORS)}')
    kwargs = {}
    if noise is not None:
        kwargs["sd" if name == "blobs" else "noise_sd"] = noise
    return GENERATORS[name](n=n, seed=seed, **kwargs)


def scale_to_interval(dataset: Dataset, a: float, b: float) -> Dataset:
    """
    Min-max scale every dimension onto [a, b].

    A dataset that was scaled before is first mapped back to data space, so the stored transform always maps
    from the original data.

    :param dataset: Dataset to scale
    :param a: Lower end of the target interval
    :param b: Upper end of the target interval
    :return: scaled Dataset with its ScaleTransform
    """
    raw = dataset.raw_points()
    if raw.shape[0] == 0:
        raise ValueError("Cannot scale an empty dataset")

    transform = ScaleTransform(raw.min(axis=0), raw.max(axis=0), float(a), float(b))
    if np.any(transform.degenerate):
        warnings.warn(
            f"Dimensions {np.flatnonzero(transform.degenerate).tolist()} have zero spread and are mapped onto the interval midpoint"
        )

    scaled = np.clip(transform.apply(raw), a, b)
    return Dataset(
        scaled,
        provenance=dataset.provenance,
        generator=dataset.generator,
        seed=dataset.seed,
        scale_transform=transform,
    )


def _parse_header(line: str) -> Dict[str, str]:
    fields = {}
    for token in line.lstrip("#").split():
        if "=" in token:
            key, value = token.split("=", 1)
            fields[key] = value
    return fields


def read_csv(path: Union[str, Path]) -> Dataset:
    """
    Read a dataset from a comma separated file with one point per row.

    An optional first line "# d=<dim> generator=<name> seed=<seed>" restores the provenance.

    :param path: File path
    :return: Dataset
    """
    path = Path(path)
    with open(path, "r") as f:
        first = f.readline()
    header = _parse_header(first) if first.startswith("#") else {}

    try:
        df = pd.read_csv(path, header=None, comment="#", dtype=str, skipinitialspace=True)
    except pd.errors.EmptyDataError:
        raise DatasetFormatException(f"{path} contains no data points")
    except pd.errors.ParserError as e:
        raise DatasetFormatException(f"{path}: ragged row ({e})")

    numeric = df.apply(pd.to_numeric, errors="coerce")
    bad = numeric.isna().to_numpy() | ~np.isfinite(numeric.to_numpy(dtype=float))
    if bad.any():
        row, col = (int(i) for i in np.argwhere(bad)[0])
        value = df.iat[row, col]
        reason = "missing value (ragged row)" if pd.isna(value) else f'"{value}" is not a finite number'
        raise DatasetFormatException(f"{path}: data row {row + 1}, column {col + 1}: {reason}")

    # float() parsing rounds correctly, so %.17g files read back bit-exact
    points = df.to_numpy().astype(float)
    if "d" in header and int(header["d"]) != points.shape[1]:
        raise DatasetFormatException(
            f"{path}: header declares d={header['d']} but rows have {points.shape[1]} columns"
        )

    seed = header.get("seed")
    return Dataset(
        points,
        provenance=str(path),
        generator=header.get("generator"),
        seed=int(seed) if seed not in (None, "None") else None,
    )


def write_csv(dataset: Dataset, path: Union[str, Path]) -> None:
    """
    Write a dataset as comma separated file with 17 significant digits.

    :param dataset: Dataset to write
    :param path: File path
    :return: None
    """
    header = f"# d={dataset.d}"
    if dataset.generator is not None:
        header += f" generator={dataset.generator} seed={dataset.seed}"

    with open(path, "w", newline="") as f:
        f.write(header + "\n")
        dataset.to_frame().to_csv(f, header=False, index=False, float_format="%.17g")
