"""
Density estimation by projection onto the training state.

A DMKDE model bundles the trained feature map U(x) with the training circuit that prepares rho_train (on data plus
auxiliary qubits). The unnormalised density at x is <psi(x)|rho_train|psi(x)>. On hardware it is obtained by
running U(x)^dagger after the training circuit and counting all-zeros outcomes on the data qubits.

Models are written as JSON documents. A model produced by `qfm-search` is a stub (feature map only); `train`
completes it with the training circuit.
"""
import dataclasses
import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from .codec import Chromosome, ParamCircuit, circuit_metrics, decode
from .data import Dataset, ScaleTransform, as_points
from .qfm import FeatureMap, KernelSpec, qfm_states
from .sim import (
    MixedState,
    PureState,
    check_qubit_count,
    evolve,
    partial_trace,
    projection_probs,
    run_circuit_batch,
    sample_zero_count,
)
from .trainstate import HEALayout, build_hea, exact_rho_train, purification_unitary

MODEL_FORMAT = "memo-qcd-model"
MODEL_VERSION = 1
BOUNDS_PADDING = 3.0
MIN_MASS = 1e-12

Bounds = List[Tuple[float, float]]


class ModelFileException(Exception):
    """Model file is unreadable, incomplete or inconsistent."""


@dataclass
class DMKDEModel:
    """
    Feature map plus training circuit.

    The feature map is either a decoded chromosome or a data-scaled HEA with `qfm_hea_layers` layers. Points passed
    to the estimators live in data space; a stored scale transform maps them into the kernel interval.
    """

    n_x: int
    kernel: KernelSpec
    qfm_params: np.ndarray
    qfm_chromosome: Optional[Chromosome] = None
    qfm_hea_layers: Optional[int] = None
    d: Optional[int] = None
    layout: Optional[HEALayout] = None
    hea_params: Optional[np.ndarray] = None
    norm_constant: Optional[float] = None
    scale_transform: Optional[ScaleTransform] = None
    data_bounds: Optional[Bounds] = None
    seeds: Dict[str, int] = field(default_factory=dict)
    search: Dict = field(default_factory=dict)
    training: Dict = field(default_factory=dict)
    oracle_unitary: Optional[np.ndarray] = field(default=None, repr=False)
    oracle_ancillas: int = 0

    def __post_init__(self) -> None:
        if (self.qfm_chromosome is None) == (self.qfm_hea_layers is None):
            raise ValueError("A model needs exactly one of qfm_chromosome and qfm_hea_layers")

        self.qfm_params = np.array(self.qfm_params, dtype=float)
        circuit = self.qfm_circuit()
        if self.qfm_params.shape != (circuit.n_params,):
            raise ValueError(
                f"Feature map expects {circuit.n_params} parameters, got {self.qfm_params.shape[0]}"
            )

        if self.layout is not None:
            if self.layout.n_x != self.n_x:
                raise ValueError(f"Layout uses n_x={self.layout.n_x}, feature map has {self.n_x} qubits")
            if self.d is None:
                self.d = self.layout.d
            elif self.d != self.layout.d:
                raise ValueError(f"Layout uses d={self.layout.d}, model has d={self.d}")

        if self.hea_params is not None:
            if self.layout is None:
                raise ValueError("Training parameters require a layout")
            self.hea_params = np.array(self.hea_params, dtype=float)
            expected = build_hea(self.layout.n_qubits, self.layout.n_layers).n_params
            if self.hea_params.shape != (expected,):
                raise ValueError(f"Training circuit expects {expected} parameters, got {self.hea_params.shape[0]}")

        if self.norm_constant is not None and not self.norm_constant > 0:
            raise ValueError(f"Normalisation constant must be positive, got {self.norm_constant}")

    def qfm_circuit(self) -> ParamCircuit:
        """
        Get the single-feature circuit.

        :return: decoded chromosome or data-scaled HEA on n_x qubits
        """
        if self.qfm_chromosome is not None:
            return decode(self.qfm_chromosome, self.n_x)
        return build_hea(self.n_x, self.qfm_hea_layers, data_scaled=True)  # type: ignore

    def feature_map(self) -> FeatureMap:
        """
        Get the trained feature map.

        :return: FeatureMap
        """
        return FeatureMap(self.qfm_circuit(), self.qfm_params)

    @property
    def is_trained(self) -> bool:
        """True if a training state is available (trained circuit or oracle)."""
        return self.hea_params is not None or self.oracle_unitary is not None

    @property
    def n_data_qubits(self) -> int:
        """Number of data qubits d * n_x."""
        if self.d is None:
            raise ValueError("Model stub has no data dimension")
        return self.d * self.n_x

    @property
    def n_ancillas(self) -> int:
        """Auxiliary qubits of the training state preparation."""
        if self.oracle_unitary is not None:
            return self.oracle_ancillas
        return self.layout.n_a if self.layout is not None else 0

    def _require_trained(self) -> None:
        if not self.is_trained:
            raise ValueError("Model is a stub without training state, run train first")

    def training_state(self) -> PureState:
        """
        Prepare the training circuit output on data plus auxiliary qubits.

        :return: pure state whose reduced data state is rho_train
        """
        self._require_trained()
        if self.oracle_unitary is not None:
            return PureState(self.oracle_unitary[:, 0])
        circuit = build_hea(self.layout.n_qubits, self.layout.n_layers)  # type: ignore
        return PureState(run_circuit_batch(circuit, self.hea_params)[0])  # type: ignore

    def training_density(self) -> MixedState:
        """
        Get the reduced training state on the data qubits.

        :return: rho_train
        """
        state = self.training_state()
        if state.n_qubits == self.n_data_qubits:
            return state.density_matrix()
        return partial_trace(state, range(self.n_data_qubits))

    def with_oracle(self, dataset, n_ancillas: Optional[int] = None, seed: int = 0) -> "DMKDEModel":
        """
        Get a copy that prepares the exact training state by purification.

        The oracle lives in memory only; it is not written to model files.

        :param dataset: Scaled Dataset, or data-space Dataset / array of shape (N, d)
        :param n_ancillas: Ancilla count (minimum by default)
        :param seed: Seed of the unitary completion
        :return: model using the purification unitary as training circuit
        """
        if isinstance(dataset, Dataset) and dataset.scale_transform is not None:
            points = dataset.points
        else:
            points = self.to_kernel_space(as_points(dataset), warn=False)
        rho = exact_rho_train(self.feature_map(), points)
        unitary, n_a = purification_unitary(rho, n_ancillas=n_ancillas, seed=seed)
        return dataclasses.replace(
            self, d=points.shape[1], oracle_unitary=unitary, oracle_ancillas=n_a, norm_constant=None
        )

    def to_kernel_space(self, points: np.ndarray, warn: bool = True) -> np.ndarray:
        """
        Map data-space points into the kernel interval.

        Points outside the interval are still mapped, with a warning.

        :param points: Array of shape (N, d)
        :param warn: Warn about points outside the kernel interval
        :return: array of shape (N, d)
        """
        points = np.asarray(points, dtype=float)
        if points.ndim == 1:
            points = points[None, :]
        if self.d is not None and points.shape[1] != self.d:
            raise ValueError(f"Model expects {self.d} features, got {points.shape[1]}")
        if self.scale_transform is not None:
            points = self.scale_transform.apply(points)

        a, b = self.kernel.interval
        if warn and np.any((points < a) | (points > b)):
            warnings.warn(f"Points outside the kernel interval [{a}, {b}] are evaluated by extrapolation")
        return points

    def default_bounds(self, padding: float = BOUNDS_PADDING) -> Bounds:
        """
        Get the data bounding box padded by `padding` / sqrt(gamma), in data space.

        :param padding: Padding in units of 1 / sqrt(gamma)
        :return: list of (min, max) per dimension
        """
        if self.data_bounds is None:
            raise ValueError("Model has no data bounds, pass bounds explicitly")
        pad = padding / np.sqrt(self.kernel.gamma)
        low = np.array([lo for lo, _ in self.data_bounds]) - pad
        high = np.array([hi for _, hi in self.data_bounds]) + pad
        if self.scale_transform is not None:
            low, high = self.scale_transform.inverse(low), self.scale_transform.inverse(high)
        return [(float(lo), float(hi)) for lo, hi in zip(low, high)]

    def density(self, points: np.ndarray) -> np.ndarray:
        """
        Evaluate the normalised density.

        :param points: Array of shape (N, d) in data space
        :return: density values
        """
        if self.norm_constant is None:
            raise ValueError("Model is not normalised, compute a density grid first")
        return self.norm_constant * estimate_exact_batch(self, points)

    def to_dict(self) -> Dict:
        """
        Get the model as JSON-compatible dictionary.

        :return: dict representation
        """
        circuit = self.qfm_circuit()
        return {
            "format": MODEL_FORMAT,
            "version": MODEL_VERSION,
            "qfm": {
                "n_qubits": self.n_x,
                "chromosome": None if self.qfm_chromosome is None else str(self.qfm_chromosome),
                "hea_layers": self.qfm_hea_layers,
                "params": self.qfm_params.tolist(),
                "metrics": circuit_metrics(circuit).to_dict(),
            },
            "kernel": self.kernel.to_dict(),
            "d": self.d,
            "layout": None if self.layout is None else self.layout.to_dict(),
            "hea_params": None if self.hea_params is None else self.hea_params.tolist(),
            "norm_constant": self.norm_constant,
            "scale_transform": None if self.scale_transform is None else self.scale_transform.to_dict(),
            "data_bounds": None if self.data_bounds is None else [list(b) for b in self.data_bounds],
            "seeds": dict(self.seeds),
            "search": self.search,
            "training": self.training,
        }

    @classmethod
    def from_dict(cls, d: Dict) -> "DMKDEModel":
        """
        Create a model from its dictionary representation.

        :param d: dict as produced by to_dict()
        :return: DMKDEModel
        """
        if d.get("format") != MODEL_FORMAT:
            raise ModelFileException(f'Not a model document (format "{d.get("format")}")')

        try:
            qfm = d["qfm"]
            chromosome = qfm.get("chromosome")
            return cls(
                n_x=int(qfm["n_qubits"]),
                kernel=KernelSpec.from_dict(d["kernel"]),
                qfm_params=qfm["params"],
                qfm_chromosome=None if chromosome is None else Chromosome(chromosome),
                qfm_hea_layers=qfm.get("hea_layers"),
                d=d.get("d"),
                layout=None if d.get("layout") is None else HEALayout.from_dict(d["layout"]),
                hea_params=d.get("hea_params"),
                norm_constant=d.get("norm_constant"),
                scale_transform=(
                    None if d.get("scale_transform") is None else ScaleTransform.from_dict(d["scale_transform"])
                ),
                data_bounds=(
                    None if d.get("data_bounds") is None else [(float(lo), float(hi)) for lo, hi in d["data_bounds"]]
                ),
                seeds=dict(d.get("seeds", {})),
                search=dict(d.get("search", {})),
                training=dict(d.get("training", {})),
            )
        except KeyError as e:
            raise ModelFileException(f"Model document misses the entry {e}")
        except (TypeError, ValueError) as e:
            raise ModelFileException(f"Model document is inconsistent: {e}")

    def save(self, path: Union[str, Path]) -> None:
        """
        Write the model as JSON document (keys sorted, so equal models give equal files).

        :param path: File path
        :return: None
        """
        with open(path, "w") as f:
            json.dump(self.to_dict(), f, indent=2, sort_keys=True)
            f.write("\n")

    @classmethod
    def load(cls, path: Union[str, Path]) -> "DMKDEModel":
        """
        Read a model from a JSON document.

        :param path: File path
        :return: DMKDEModel
        """
        try:
            with open(path, "r") as f:
                document = json.load(f)
        except OSError as e:
            raise ModelFileException(f"Cannot read model file {path}: {e}")
        except json.JSONDecodeError as e:
            raise ModelFileException(f"Model file {path} is not valid JSON: {e}")
        if not isinstance(document, dict):
            raise ModelFileException(f"Model file {path} does not hold a JSON object")
        return cls.from_dict(document)


def estimate_exact_batch(model: DMKDEModel, points: np.ndarray) -> np.ndarray:
    """
    Evaluate the unnormalised density at many points.

    :param model: Trained model
    :param points: Array of shape (N, d) in data space
    :return: array of <psi(x)|rho_train|psi(x)> in [0, 1]
    """
    rho = model.training_density()
    states = model.feature_map().states(model.to_kernel_space(points))
    return projection_probs(rho, states)


def estimate_exact(model: DMKDEModel, x_star: Union[float, Sequence[float], np.ndarray]) -> float:
    """
    Evaluate the unnormalised density at a single point.

    The training circuit is run on d * n_x + n_a qubits, the auxiliary qubits are traced out and the reduced state
    is projected onto the feature-mapped point.

    :param model: Trained model
    :param x_star: Query point in data space
    :return: <psi(x_star)|rho_train|psi(x_star)> in [0, 1]
    """
    point = np.atleast_1d(np.asarray(x_star, dtype=float))
    return float(estimate_exact_batch(model, point[None, :])[0])


def estimate_shots(
    model: DMKDEModel,
    x_star: Union[float, Sequence[float], np.ndarray],
    shots: int,
    seed: Union[int, np.random.Generator, None] = 0,
) -> float:
    """
    Estimate the unnormalised density at a point from simulated measurements.

    The composite circuit U(x_star)^dagger U_train is applied to |0>, the data qubits are measured `shots` times
    and the fraction of all-zeros outcomes is returned. Auxiliary qubits are not measured.

    :param model: Trained model
    :param x_star: Query point in data space
    :param shots: Number of measurements M (>= 1)
    :param seed: Seed or generator of the shot noise
    :return: M_0 / M
    """
    if shots < 1:
        raise ValueError(f"At least one shot is required, got {shots}")

    point = model.to_kernel_space(np.atleast_1d(np.asarray(x_star, dtype=float)))[0]
    fm = model.feature_map()
    amplitudes = model.training_state().amplitudes[None, :]
    for j, value in enumerate(point):
        amplitudes = evolve(
            amplitudes, fm.circuit, fm.params, features=value, qubit_offset=j * model.n_x, adjoint=True
        )

    state = PureState(amplitudes[0])
    zeros = sample_zero_count(state, range(model.n_data_qubits), shots, seed)
    return zeros / shots


def classical_dmkde_batch(
    qfm: ParamCircuit,
    qfm_params: Union[Sequence[float], np.ndarray],
    dataset,
    points: np.ndarray,
) -> np.ndarray:
    """
    Evaluate 1/N sum_i |<psi(x)|psi(x_i)>|^2 at many points.

    :param qfm: Single-feature circuit
    :param qfm_params: Its parameters
    :param dataset: Dataset or array of shape (N, d), in kernel space
    :param points: Query points of shape (M, d), in kernel space
    :return: array of M values in [0, 1]
    """
    train = as_points(dataset)
    if train.shape[0] == 0:
        raise ValueError("Dataset must not be empty")
    check_qubit_count(train.shape[1] * qfm.n_qubits)
    train_states = qfm_states(qfm, qfm_params, train)
    query_states = qfm_states(qfm, qfm_params, as_points(points))
    overlaps = np.abs(query_states.conj() @ train_states.T) ** 2
    return np.clip(overlaps.mean(axis=1), 0.0, 1.0)


def classical_dmkde(
    qfm: ParamCircuit,
    qfm_params: Union[Sequence[float], np.ndarray],
    dataset,
    x_star: Union[float, Sequence[float], np.ndarray],
) -> float:
    """
    Evaluate the kernel form 1/N sum_i |<psi(x_star)|psi(x_i)>|^2 of the estimator.

    :param qfm: Single-feature circuit
    :param qfm_params: Its parameters
    :param dataset: Dataset or array of shape (N, d), in kernel space
    :param x_star: Query point in kernel space
    :return: value in [0, 1]
    """
    point = np.atleast_1d(np.asarray(x_star, dtype=float))
    return float(classical_dmkde_batch(qfm, qfm_params, dataset, point[None, :])[0])


@dataclass
class DensityGrid:
    """Density values on the cell centres of a regular grid."""

    axes: Bounds
    resolution: Tuple[int, ...]
    values: np.ndarray
    norm_constant: Optional[float] = None

    def __post_init__(self) -> None:
        self.axes = [(float(lo), float(hi)) for lo, hi in self.axes]
        self.resolution = tuple(int(r) for r in self.resolution)
        self.values = np.asarray(self.values, dtype=float)
        if len(self.axes) != len(self.resolution):
            raise ValueError("One resolution per axis is required")
        if self.values.shape != self.resolution:
            raise ValueError(f"Values of shape {self.values.shape} do not match resolution {self.resolution}")
        if not np.all(np.isfinite(self.values)) or np.any(self.values < 0):
            raise ValueError("Density values must be finite and non-negative")

    @property
    def d(self) -> int:
        """Number of dimensions."""
        return len(self.axes)

    @property
    def cell_volume(self) -> float:
        """Volume of a single grid cell."""
        return float(np.prod([(hi - lo) / r for (lo, hi), r in zip(self.axes, self.resolution)]))

    def coordinates(self, axis: int) -> np.ndarray:
        """
        Get the cell centres along an axis.

        :param axis: Axis index
        :return: array of cell centre coordinates
        """
        lo, hi = self.axes[axis]
        r = self.resolution[axis]
        return lo + (np.arange(r) + 0.5) * (hi - lo) / r

    def points(self) -> np.ndarray:
        """
        Get all cell centres in C order of the values array.

        :return: array of shape (prod(resolution), d)
        """
        mesh = np.meshgrid(*[self.coordinates(j) for j in range(self.d)], indexing="ij")
        return np.column_stack([m.ravel() for m in mesh])

    def mass(self) -> float:
        """
        Get the Riemann sum of the values.

        :return: sum of values times cell volume
        """
        return float(np.sum(self.values) * self.cell_volume)

    def to_frame(self) -> pd.DataFrame:
        """
        Get the grid as pandas DataFrame.

        :return: DataFrame with columns x0 .. x{d-1}, density
        """
        df = pd.DataFrame(self.points(), columns=[f"x{j}" for j in range(self.d)])
        df["density"] = self.values.ravel()
        return df

    def to_csv(self, path: Union[str, Path]) -> None:
        """
        Write the grid as CSV (header x0,x1,density for 2D grids).

        :param path: File path
        :return: None
        """
        self.to_frame().to_csv(path, index=False, float_format="%.17g")

    def to_pgm(self, path: Union[str, Path]) -> None:
        """
        Write a 2D grid as plain (P2) portable graymap with min-max scaling to 0..255.

        The first axis runs left to right, the second bottom to top.

        :param path: File path
        :return: None
        """
        if self.d != 2:
            raise ValueError(f"PGM export needs a 2D grid, got {self.d} dimensions")

        lo, hi = self.values.min(), self.values.max()
        scaled = np.zeros_like(self.values) if hi == lo else (self.values - lo) / (hi - lo)
        pixels = np.rint(scaled * 255).astype(int).T[::-1]

        with open(path, "w") as f:
            f.write(f"P2\n{pixels.shape[1]} {pixels.shape[0]}\n255\n")
            for row in pixels:
                f.write(" ".join(str(p) for p in row) + "\n")


def density_grid(
    model: DMKDEModel,
    bounds: Optional[Bounds] = None,
    resolution: Union[int, Sequence[int]] = 64,
    mode: str = "exact",
    shots: Optional[int] = None,
    seed: Union[int, None] = 0,
) -> DensityGrid:
    """
    Evaluate the normalised density on a regular grid.

    If the model has no normalisation constant yet, it is computed from this grid (unit Riemann sum) and stored in
    the model.

    :param model: Trained model
    :param bounds: (min, max) per dimension in data space, padded data bounding box if None
    :param resolution: Cells per dimension
    :param mode: "exact" or "shots"
    :param shots: Measurements per grid point (shots mode)
    :param seed: Seed of the shot noise
    :return: DensityGrid
    """
    if bounds is None:
        bounds = model.default_bounds()
    if isinstance(resolution, int):
        resolution = [resolution] * len(bounds)
    if any(r < 1 for r in resolution):
        raise ValueError(f"Resolution must be positive, got {resolution}")

    grid = DensityGrid(bounds, tuple(resolution), np.zeros(tuple(resolution)))
    points = grid.points()

    if mode not in ("exact", "shots"):
        raise ValueError(f'Unknown estimation mode "{mode}"')
    if mode == "shots" and shots is None:
        raise ValueError("Shots mode requires the number of shots")

    # padded bounds reach outside the kernel interval by construction
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        if mode == "exact":
            values = estimate_exact_batch(model, points)
        else:
            rng = np.random.default_rng(seed)
            values = np.array([estimate_shots(model, p, shots, rng) for p in points])

    grid.values = values.reshape(grid.resolution)
    if model.norm_constant is None:
        mass = grid.mass()
        if not mass > MIN_MASS:
            raise ValueError("Density has zero total mass on the grid")
        model.norm_constant = 1.0 / mass

    grid.values = grid.values * model.norm_constant
    grid.norm_constant = model.norm_constant
    return grid
