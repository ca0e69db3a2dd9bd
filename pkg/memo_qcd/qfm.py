"""
Quantum feature maps and the kernel approximation objectives.

The target is the squared Gaussian kernel |k(x, x')|^2 = exp(-gamma * ||x - x'||^2). A single-feature circuit
U(x) induces the kernel |<0|U(x)^dagger U(x')|0>|^2, and d-dimensional points are mapped with the tensor
product of d copies of that circuit, which makes the induced kernel isotropic.

The same mean squared error serves the three search methods: genetic (decoded angles frozen), memetic
(decoded angles refined) and fixed-architecture HEA.
"""
from dataclasses import dataclass
from typing import Dict, List, Sequence, Tuple, Union

import numpy as np

from .codec import ParamCircuit
from .sim import PureState, check_qubit_count, run_circuit_batch

KERNEL_FAMILIES = ("gaussian",)

ArrayLike = Union[float, Sequence[float], np.ndarray]


@dataclass(frozen=True)
class KernelSpec:
    """Target kernel family, bandwidth and the interval training pairs are drawn from."""

    gamma: float = 0.1
    interval: Tuple[float, float] = (-3.0, 3.0)
    n_pairs: int = 10_000
    family: str = "gaussian"

    def __post_init__(self) -> None:
        if not self.gamma > 0:
            raise ValueError(f"Bandwidth gamma must be positive, got {self.gamma}")
        a, b = self.interval
        if not a < b:
            raise ValueError(f"Interval must satisfy a < b, got {self.interval}")
        if self.n_pairs < 1:
            raise ValueError(f"At least one training pair is required, got {self.n_pairs}")
        if self.family not in KERNEL_FAMILIES:
            raise ValueError(f'Unknown kernel family "{self.family}"')
        object.__setattr__(self, "interval", (float(a), float(b)))

    def to_dict(self) -> Dict:
        """
        Get the kernel spec as JSON-compatible dictionary.

        :return: dict representation
        """
        return {
            "family": self.family,
            "gamma": self.gamma,
            "interval": list(self.interval),
            "n_pairs": self.n_pairs,
        }

    @classmethod
    def from_dict(cls, d: Dict) -> "KernelSpec":
        """
        Create a kernel spec from its dictionary representation.

        :param d: dict as produced by to_dict()
        :return: KernelSpec
        """
        return cls(
            gamma=float(d["gamma"]),
            interval=tuple(d["interval"]),  # type: ignore
            n_pairs=int(d["n_pairs"]),
            family=d.get("family", "gaussian"),
        )


@dataclass(frozen=True)
class PairSet:
    """Frozen set of (x, x') training pairs."""

    x: np.ndarray
    x_prime: np.ndarray

    def __post_init__(self) -> None:
        x = np.asarray(self.x, dtype=float).ravel()
        x_prime = np.asarray(self.x_prime, dtype=float).ravel()
        if x.shape != x_prime.shape:
            raise ValueError("Pair components must have equal length")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "x_prime", x_prime)

    def __len__(self) -> int:
        return self.x.shape[0]

    @property
    def pairs(self) -> List[Tuple[float, float]]:
        """Pairs as list of tuples."""
        return list(zip(self.x.tolist(), self.x_prime.tolist()))

    def target(self, gamma: float) -> np.ndarray:
        """
        Get the squared Gaussian kernel value of every pair.

        :param gamma: Kernel bandwidth
        :return: array of exp(-gamma (x - x')^2)
        """
        return np.exp(-gamma * (self.x - self.x_prime) ** 2)


def gaussian_kernel_sq(x: ArrayLike, x_prime: ArrayLike, gamma: float) -> float:
    """
    Evaluate the squared Gaussian kernel exp(-gamma * ||x - x'||^2).

    :param x: Point (scalar or vector)
    :param x_prime: Point of the same dimension
    :param gamma: Kernel bandwidth
    :return: kernel value in (0, 1]
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    x_prime = np.atleast_1d(np.asarray(x_prime, dtype=float))
    if x.shape != x_prime.shape:
        raise ValueError(f"Dimension mismatch: {x.shape} vs {x_prime.shape}")
    return float(np.exp(-gamma * np.sum((x - x_prime) ** 2)))


def sample_pairs(spec: KernelSpec, seed: Union[int, np.random.Generator, None]) -> PairSet:
    """
    Draw n_pairs i.i.d. pairs uniformly from the square [a, b] x [a, b].

    :param spec: Kernel spec
    :param seed: Seed or generator
    :return: PairSet
    """
    rng = np.random.default_rng(seed)
    a, b = spec.interval
    values = rng.uniform(a, b, size=(spec.n_pairs, 2))
    return PairSet(values[:, 0], values[:, 1])


def _overlap_sq(bra: np.ndarray, ket: np.ndarray) -> np.ndarray:
    values = np.abs(np.einsum("bi,bi->b", bra.conj(), ket)) ** 2
    return np.clip(values, 0.0, 1.0)


def circuit_kernel_sq_batch(
    circuit: ParamCircuit,
    params: Union[Sequence[float], np.ndarray],
    x: np.ndarray,
    x_prime: np.ndarray,
) -> np.ndarray:
    """
    Evaluate the circuit-induced kernel for many pairs at once.

    :param circuit: Single-feature circuit
    :param params: Circuit parameters
    :param x: First components
    :param x_prime: Second components
    :return: array of |<psi(x)|psi(x')>|^2
    """
    bra = run_circuit_batch(circuit, params, np.asarray(x, dtype=float))
    ket = run_circuit_batch(circuit, params, np.asarray(x_prime, dtype=float))
    return _overlap_sq(bra, ket)


def circuit_kernel_sq(
    circuit: ParamCircuit,
    params: Union[Sequence[float], np.ndarray],
    x: float,
    x_prime: float,
) -> float:
    """
    Evaluate the circuit-induced kernel |<psi(x)|psi(x')>|^2.

    :param circuit: Single-feature circuit
    :param params: Circuit parameters
    :param x: First feature value
    :param x_prime: Second feature value
    :return: kernel value in [0, 1]
    """
    return float(circuit_kernel_sq_batch(circuit, params, np.array([x]), np.array([x_prime]))[0])


def kernel_mse(
    circuit: ParamCircuit,
    params: Union[Sequence[float], np.ndarray],
    pairs: PairSet,
    gamma: float,
) -> float:
    """
    Mean squared error between the Gaussian and the circuit-induced kernel over a pair set.

    :param circuit: Single-feature circuit
    :param params: Circuit parameters
    :param pairs: Training pairs
    :param gamma: Kernel bandwidth
    :return: MSE in [0, 1]
    """
    residual = pairs.target(gamma) - circuit_kernel_sq_batch(
        circuit, params, pairs.x, pairs.x_prime
    )
    return float(np.mean(residual**2))


def kernel_mse_gradient(
    circuit: ParamCircuit,
    params: Union[Sequence[float], np.ndarray],
    pairs: PairSet,
    gamma: float,
) -> np.ndarray:
    """
    Exact gradient of kernel_mse by the parameter-shift rule.

    Every rotation occurs once in the ket circuit U(x') and once in the bra circuit U(x). The overlap is an
    expectation value in each of these occurrences, so its derivative with respect to the occurrence angle is
    (f(+pi/2) - f(-pi/2)) / 2. For data-scaled rotations the chain rule adds the feature value as factor.

    :param circuit: Single-feature circuit
    :param params: Circuit parameters
    :param pairs: Training pairs
    :param gamma: Kernel bandwidth
    :return: gradient with respect to params
    """
    params = np.asarray(params, dtype=float)
    bra = run_circuit_batch(circuit, params, pairs.x)
    ket = run_circuit_batch(circuit, params, pairs.x_prime)
    residual = pairs.target(gamma) - _overlap_sq(bra, ket)

    grad = np.zeros(circuit.n_params)
    shift = np.zeros(len(circuit.gates))

    for index, gate in enumerate(circuit.gates):
        if not gate.kind.is_rotation:
            continue

        derivative = np.zeros(len(pairs))
        for side, features in (("ket", pairs.x_prime), ("bra", pairs.x)):
            shift[index] = np.pi / 2
            plus = run_circuit_batch(circuit, params, features, angle_shifts=shift)
            shift[index] = -np.pi / 2
            minus = run_circuit_batch(circuit, params, features, angle_shifts=shift)
            shift[index] = 0.0

            if side == "ket":
                diff = _overlap_sq(bra, plus) - _overlap_sq(bra, minus)
            else:
                diff = _overlap_sq(plus, ket) - _overlap_sq(minus, ket)

            factor = features if gate.data_scaled else 1.0
            derivative += factor * diff / 2

        grad[gate.param_slot] += np.mean(-2 * residual * derivative)

    return grad


def qfm_states(
    circuit: ParamCircuit,
    params: Union[Sequence[float], np.ndarray],
    points: np.ndarray,
) -> np.ndarray:
    """
    Map a batch of d-dimensional points to product states.

    Feature j occupies qubits j*n_x .. (j+1)*n_x - 1.

    :param circuit: Single-feature circuit on n_x qubits
    :param params: Circuit parameters
    :param points: Array of shape (N, d)
    :return: state vectors of shape (N, 2**(d*n_x))
    """
    points = np.asarray(points, dtype=float)
    if points.ndim == 1:
        points = points[:, None]
    n_points, d = points.shape
    check_qubit_count(d * circuit.n_qubits)

    states = run_circuit_batch(circuit, params, points[:, 0])
    for j in range(1, d):
        factor = run_circuit_batch(circuit, params, points[:, j])
        states = np.einsum("ni,nj->nij", states, factor).reshape(n_points, -1)
    return states


def qfm_state(
    circuit: ParamCircuit,
    params: Union[Sequence[float], np.ndarray],
    x: ArrayLike,
) -> PureState:
    """
    Map a d-dimensional point to the product state of d single-feature states.

    :param circuit: Single-feature circuit on n_x qubits
    :param params: Circuit parameters
    :param x: Point with d features (scalar for d = 1)
    :return: state on d * n_x qubits
    """
    point = np.atleast_1d(np.asarray(x, dtype=float))
    return PureState(qfm_states(circuit, params, point[None, :])[0])


@dataclass(frozen=True)
class FeatureMap:
    """A trained single-feature circuit together with its parameters."""

    circuit: ParamCircuit
    params: np.ndarray

    def __post_init__(self) -> None:
        params = np.array(self.params, dtype=float)
        if params.shape != (self.circuit.n_params,):
            raise ValueError(
                f"Expected {self.circuit.n_params} parameters, got shape {params.shape}"
            )
        params.flags.writeable = False
        object.__setattr__(self, "params", params)

    @property
    def n_qubits(self) -> int:
        """Qubits per feature (n_x)."""
        return self.circuit.n_qubits

    def state(self, x: ArrayLike) -> PureState:
        """
        Map a point to its quantum state.

        :param x: d-dimensional point
        :return: state on d * n_x qubits
        """
        return qfm_state(self.circuit, self.params, x)

    def states(self, points: np.ndarray) -> np.ndarray:
        """
        Map a batch of points to state vectors.

        :param points: Array of shape (N, d)
        :return: state vectors of shape (N, 2**(d*n_x))
        """
        return qfm_states(self.circuit, self.params, points)

    def kernel_sq(self, x: ArrayLike, x_prime: ArrayLike) -> float:
        """
        Evaluate the induced d-dimensional kernel |<psi(x)|psi(x')>|^2.

        :param x: First point
        :param x_prime: Second point
        :return: kernel value in [0, 1]
        """
        value = abs(self.state(x).overlap(self.state(x_prime))) ** 2
        return float(min(max(value, 0.0), 1.0))
