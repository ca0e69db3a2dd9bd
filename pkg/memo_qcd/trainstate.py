"""
Training state circuit.

The training state rho_train = 1/N sum_i |psi(x_i)><psi(x_i)| lives on the d * n_x data qubits. It is prepared
by a hardware efficient ansatz (HEA) spanning the data qubits and n_a auxiliary qubits, whose auxiliary qubits
are traced out. The HEA angles are found by maximising the log-likelihood of the dataset.

The exact construction (purification of rho_train completed to a unitary) is provided as an oracle.
"""
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from .codec import ParamCircuit
from .data import as_points
from .qfm import FeatureMap
from .sim import (
    TOLERANCE,
    Gate,
    GateKind,
    MixedState,
    PureState,
    check_qubit_count,
    partial_trace,
    projection_probs,
    run_circuit_batch,
)

LL_EPSILON = 1e-12
RANK_CUTOFF = 1e-12
OBJECTIVES = ("log-sum", "sum-log")


@dataclass(frozen=True)
class HEALayout:
    """Qubit layout of the training circuit: d features of n_x qubits each, then n_a auxiliary qubits."""

    n_x: int
    d: int
    n_a: int = 1
    n_layers: int = 2

    def __post_init__(self) -> None:
        for name in ("n_x", "d", "n_a", "n_layers"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        check_qubit_count(self.n_qubits)

    @property
    def n_data_qubits(self) -> int:
        """Number of data qubits d * n_x."""
        return self.d * self.n_x

    @property
    def n_qubits(self) -> int:
        """Total number of qubits d * n_x + n_a."""
        return self.d * self.n_x + self.n_a

    def data_qubits(self) -> List[int]:
        """
        Get the data qubit indices (the leading qubits).

        :return: list of qubit indices
        """
        return list(range(self.n_data_qubits))

    def to_dict(self) -> Dict:
        """
        Get the layout as JSON-compatible dictionary.

        :return: dict representation
        """
        return {"n_x": self.n_x, "d": self.d, "n_a": self.n_a, "n_layers": self.n_layers}

    @classmethod
    def from_dict(cls, d: Dict) -> "HEALayout":
        """
        Create a layout from its dictionary representation.

        :param d: dict as produced by to_dict()
        :return: HEALayout
        """
        return cls(n_x=int(d["n_x"]), d=int(d["d"]), n_a=int(d["n_a"]), n_layers=int(d["n_layers"]))


@dataclass
class TrainReport:
    """Result of training the training state circuit."""

    params: np.ndarray
    ll_trace: List[float]
    epochs: int
    learning_rate: float
    seed: int = 0
    objective: str = "log-sum"
    init_params: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self) -> None:
        if len(self.ll_trace) != self.epochs + 1:
            raise ValueError(
                f"Trace must hold epochs + 1 = {self.epochs + 1} values, got {len(self.ll_trace)}"
            )

    @property
    def initial(self) -> float:
        """Log-likelihood before training."""
        return self.ll_trace[0]

    @property
    def final(self) -> float:
        """Log-likelihood after training."""
        return self.ll_trace[-1]

    def to_frame(self) -> pd.DataFrame:
        """
        Get the log-likelihood trace as pandas DataFrame.

        :return: DataFrame with columns epoch, log_likelihood
        """
        return pd.DataFrame(
            {"epoch": np.arange(len(self.ll_trace)), "log_likelihood": self.ll_trace}
        )

    def to_dict(self) -> Dict:
        """
        Get the report as JSON-compatible dictionary.

        :return: dict representation
        """
        return {
            "params": [float(p) for p in self.params],
            "epochs": self.epochs,
            "learning_rate": self.learning_rate,
            "seed": self.seed,
            "objective": self.objective,
            "initial_log_likelihood": self.initial,
            "final_log_likelihood": self.final,
            "ll_trace": [float(v) for v in self.ll_trace],
        }


def build_hea(n_qubits: int, n_layers: int, data_scaled: bool = False) -> ParamCircuit:
    """
    Build a hardware efficient ansatz.

    Each of the n_layers layers applies R_y, R_z on every qubit followed by the CNOT cascade q -> q + 1,
    and a final R_y, R_z block closes the circuit. The circuit has 2 * n_qubits * (n_layers + 1) parameters.

    :param n_qubits: Number of qubits (>= 1, a cascade needs >= 2)
    :param n_layers: Number of layers (0 gives the final rotation block only)
    :param data_scaled: Mark all rotations as data scaled (used when the HEA serves as feature map)
    :return: HEA circuit with zero initial parameters
    """
    if n_qubits < 1:
        raise ValueError(f"An ansatz needs at least one qubit, got {n_qubits}")
    if n_layers < 0:
        raise ValueError(f"Number of layers must not be negative, got {n_layers}")

    gates: List[Gate] = []
    slots = iter(range(2 * n_qubits * (n_layers + 1)))

    def rotation_block() -> None:
        for q in range(n_qubits):
            for kind in (GateKind.RY, GateKind.RZ):
                gates.append(Gate(kind, q, param_slot=next(slots), data_scaled=data_scaled))

    for _ in range(n_layers):
        rotation_block()
        for q in range(n_qubits - 1):
            gates.append(Gate(GateKind.CNOT, q + 1, control=q))
    rotation_block()

    n_params = 2 * n_qubits * (n_layers + 1)
    return ParamCircuit(
        n_qubits=n_qubits, gates=tuple(gates), n_params=n_params, init_params=(0.0,) * n_params
    )


class TrainingObjective:
    """Log-likelihood of a dataset under the training state prepared by an HEA."""

    def __init__(
        self,
        layout: HEALayout,
        qfm: FeatureMap,
        dataset,
        objective: str = "log-sum",
    ):
        """
        Log-likelihood of a dataset under the training state prepared by an HEA.

        The feature-mapped data states are computed once and reused for every evaluation.

        :param layout: Qubit layout
        :param qfm: Trained single-feature map
        :param dataset: Dataset or array of shape (N, d)
        :param objective: "log-sum" for log(sum_i p_i), "sum-log" for sum_i log(p_i)
        """
        points = as_points(dataset)
        if points.shape[0] == 0:
            raise ValueError("Dataset must not be empty")
        if points.shape[1] != layout.d:
            raise ValueError(f"Dataset has {points.shape[1]} features, layout expects {layout.d}")
        if qfm.n_qubits != layout.n_x:
            raise ValueError(f"Feature map acts on {qfm.n_qubits} qubits, layout expects {layout.n_x}")
        if objective not in OBJECTIVES:
            raise ValueError(f'Unknown objective "{objective}", expected one of {OBJECTIVES}')

        self.layout = layout
        self.objective = objective
        self.circuit = build_hea(layout.n_qubits, layout.n_layers)
        self.states = qfm.states(points)
        self._slot_gates = [i for i, g in enumerate(self.circuit.gates) if g.param_slot is not None]

    def projections(self, params: np.ndarray, angle_shifts: Optional[np.ndarray] = None) -> np.ndarray:
        """
        Project the prepared training state onto every data state.

        :param params: HEA parameters
        :param angle_shifts: Optional per-gate angle offsets
        :return: array of <psi(x_i)|Tr_a(U|0><0|U^dagger)|psi(x_i)>
        """
        phi = run_circuit_batch(self.circuit, params, angle_shifts=angle_shifts)[0]
        rho = partial_trace(PureState(phi), self.layout.data_qubits())
        return projection_probs(rho, self.states)

    def value(self, params: np.ndarray) -> float:
        """
        Evaluate the log-likelihood.

        :param params: HEA parameters
        :return: log-likelihood
        """
        p = self.projections(params)
        if self.objective == "log-sum":
            return math.log(math.fsum(p) + LL_EPSILON)
        return math.fsum(np.log(p + LL_EPSILON))

    def gradient(self, params: np.ndarray) -> np.ndarray:
        """
        Exact gradient of the log-likelihood by the parameter-shift rule.

        Each HEA parameter drives a single rotation, so every projection is an expectation value that is
        sinusoidal in that parameter.

        :param params: HEA parameters
        :return: gradient with respect to params
        """
        params = np.asarray(params, dtype=float)
        p = self.projections(params)
        shift = np.zeros(len(self.circuit.gates))
        grad = np.zeros(self.circuit.n_params)

        for slot, index in enumerate(self._slot_gates):
            shift[index] = np.pi / 2
            plus = self.projections(params, shift)
            shift[index] = -np.pi / 2
            minus = self.projections(params, shift)
            shift[index] = 0.0

            dp = (plus - minus) / 2
            if self.objective == "log-sum":
                grad[slot] = math.fsum(dp) / (math.fsum(p) + LL_EPSILON)
            else:
                grad[slot] = math.fsum(dp / (p + LL_EPSILON))

        return grad


def log_likelihood(
    layout: HEALayout,
    hea_params: np.ndarray,
    qfm: FeatureMap,
    dataset,
    objective: str = "log-sum",
) -> float:
    """
    Log-likelihood of a dataset under the HEA-prepared training state.

    The default objective is log(sum_i p_i + eps) with p_i the projection of the reduced training state onto the
    feature-mapped point x_i; "sum-log" gives sum_i log(p_i + eps) instead.

    :param layout: Qubit layout
    :param hea_params: HEA parameters
    :param qfm: Trained single-feature map
    :param dataset: Dataset or array of shape (N, d)
    :param objective: "log-sum" or "sum-log"
    :return: log-likelihood
    """
    return TrainingObjective(layout, qfm, dataset, objective).value(np.asarray(hea_params, dtype=float))


def log_likelihood_gradient(
    layout: HEALayout,
    hea_params: np.ndarray,
    qfm: FeatureMap,
    dataset,
    objective: str = "log-sum",
) -> np.ndarray:
    """
    Parameter-shift gradient of log_likelihood with respect to the HEA parameters.

    :param layout: Qubit layout
    :param hea_params: HEA parameters
    :param qfm: Trained single-feature map
    :param dataset: Dataset or array of shape (N, d)
    :param objective: "log-sum" or "sum-log"
    :return: gradient
    """
    return TrainingObjective(layout, qfm, dataset, objective).gradient(np.asarray(hea_params, dtype=float))


def train_state_circuit(
    layout: HEALayout,
    qfm: FeatureMap,
    dataset,
    epochs: int = 5000,
    learning_rate: float = 0.4,
    seed: int = 0,
    objective: str = "log-sum",
    gradient_method: str = "parameter-shift",
    verbose: bool = False,
) -> TrainReport:
    """
    Train the HEA by gradient ascent on the log-likelihood.

    Initial angles are drawn uniformly from [0, 2 pi) with the given seed. Note that the "sum-log" objective
    scales with the dataset size, the learning rate has to be scaled accordingly.

    :param layout: Qubit layout
    :param qfm: Trained single-feature map
    :param dataset: Dataset or array of shape (N, d)
    :param epochs: Number of ascent steps
    :param learning_rate: Step size
    :param seed: Seed of the initial angles
    :param objective: "log-sum" or "sum-log"
    :param gradient_method: "parameter-shift" or "finite-difference"
    :param verbose: Print progress
    :return: TrainReport
    """
    from .optimize import gd_minimize

    target = TrainingObjective(layout, qfm, dataset, objective)
    rng = np.random.default_rng(seed)
    init_params = rng.uniform(0.0, 2 * np.pi, size=target.circuit.n_params)

    grad = None
    if gradient_method == "parameter-shift":
        grad = lambda p: -target.gradient(p)  # noqa: E731
    elif gradient_method != "finite-difference":
        raise ValueError(f'Unknown gradient method "{gradient_method}"')

    params, trace = gd_minimize(
        lambda p: -target.value(p),
        init_params,
        epochs=epochs,
        learning_rate=learning_rate,
        grad=grad,
        verbose=verbose,
        label="log-likelihood",
        sign=-1.0,
    )

    return TrainReport(
        params=params,
        ll_trace=[-v for v in trace],
        epochs=epochs,
        learning_rate=learning_rate,
        seed=seed,
        objective=objective,
        init_params=init_params,
    )


def exact_rho_train(qfm: FeatureMap, dataset) -> MixedState:
    """
    Build the training state 1/N sum_i |psi(x_i)><psi(x_i)| directly.

    :param qfm: Single-feature map
    :param dataset: Dataset or array of shape (N, d)
    :return: training state on the d * n_x data qubits
    """
    points = as_points(dataset)
    if points.shape[0] == 0:
        raise ValueError("Dataset must not be empty")
    states = qfm.states(points)
    return MixedState(states.T @ states.conj() / points.shape[0])


def complete_unitary(first_column: np.ndarray, seed: int = 0) -> np.ndarray:
    """
    Complete a unit vector to a unitary matrix.

    The vector is stacked with random complex columns and the stack is orthonormalised by a QR decomposition. The
    columns of Q are rephased by the diagonal of R, which makes column 0 the input vector itself.

    :param first_column: Unit vector that becomes column 0
    :param seed: Seed of the random completion columns
    :return: unitary matrix whose first column is first_column
    """
    first_column = np.asarray(first_column, dtype=complex).ravel()
    norm = np.linalg.norm(first_column)
    if not norm > 0:
        raise ValueError("Cannot complete the zero vector")

    dim = first_column.shape[0]
    rng = np.random.default_rng(seed)
    stack = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    stack[:, 0] = first_column / norm

    q, r = np.linalg.qr(stack)
    diagonal = np.diagonal(r)
    unitary = q * (diagonal / np.abs(diagonal))
    unitary[:, 0] = stack[:, 0]
    return unitary


def purification_unitary(
    rho: MixedState, n_ancillas: Optional[int] = None, seed: int = 0
) -> Tuple[np.ndarray, int]:
    """
    Build a unitary U with Tr_a(U|0><0|U^dagger) = rho.

    With rho = V Lambda V^dagger the first column of U is |Phi> = sum_ab V_ab sqrt(lambda_b) |a>|b>, with the
    data register leading and the ancilla register trailing. Only eigenvalues above RANK_CUTOFF are kept, so
    ceil(log2(rank)) ancillas suffice; at most the number of data qubits is ever needed.

    :param rho: Training state
    :param n_ancillas: Ancilla count to use (defaults to the minimum, must not be smaller)
    :param seed: Seed of the unitary completion
    :return: unitary on rho.n_qubits + n_a qubits, n_a
    """
    eigenvalues, eigenvectors = np.linalg.eigh(rho.matrix)
    if eigenvalues.min() < -TOLERANCE:
        raise ValueError(f"Density matrix is not positive semi-definite (min eigenvalue {eigenvalues.min()})")

    order = np.argsort(eigenvalues)[::-1]
    kept = [i for i in order if eigenvalues[i] > RANK_CUTOFF]
    rank = len(kept)
    needed = math.ceil(math.log2(rank)) if rank > 1 else 0

    n_a = needed if n_ancillas is None else n_ancillas
    if n_a < needed:
        raise ValueError(f"Rank {rank} needs at least {needed} ancillas, got {n_a}")
    if n_a > 0:
        check_qubit_count(rho.n_qubits + n_a)

    amplitudes = np.zeros((rho.dim, 1 << n_a), dtype=complex)
    amplitudes[:, :rank] = eigenvectors[:, kept] * np.sqrt(eigenvalues[kept])
    phi = amplitudes.reshape(-1)
    phi = phi / np.linalg.norm(phi)

    return complete_unitary(phi, seed), n_a
