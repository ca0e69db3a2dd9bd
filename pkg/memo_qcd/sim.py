"""
Minimal statevector simulator.

Conventions:
- the basis index of a register is its big-endian bit string, qubit 0 is the most significant bit
- pure evolution runs on state vectors; density matrices only appear at partial-trace boundaries
- every probability leaving this module is clamped to [0, 1]

Internally, state vectors are handled in batches of shape (B, 2**n) so that a circuit can be run for many
feature values at once.
"""
from dataclasses import dataclass
from enum import Enum
from typing import TYPE_CHECKING, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

if TYPE_CHECKING:  # pragma: no cover
    from .codec import ParamCircuit

MAX_QUBITS = 20
TOLERANCE = 1e-10

H_MATRIX = np.array([[1.0, 1.0], [1.0, -1.0]], dtype=complex) / np.sqrt(2.0)


class SimulationResourceException(Exception):
    """Requested register exceeds the qubit bound of the simulator."""


class GateKind(Enum):
    """Gate alphabet of the simulator."""

    H = "H"
    RX = "RX"
    RY = "RY"
    RZ = "RZ"
    CNOT = "CNOT"
    IDENTITY = "IDENTITY"

    @property
    def is_rotation(self) -> bool:
        """
        Check whether the gate kind is a parameterised rotation.

        :return: True for RX, RY and RZ
        """
        return self in (GateKind.RX, GateKind.RY, GateKind.RZ)


@dataclass(frozen=True)
class Gate:
    """
    A single gate of a parameterised circuit.

    Rotations reference a slot of the circuit parameter vector. If `data_scaled` is set, the effective angle is
    the parameter multiplied by the current feature value.
    """

    kind: GateKind
    target: int
    control: Optional[int] = None
    param_slot: Optional[int] = None
    data_scaled: bool = False

    def __post_init__(self) -> None:
        if self.target < 0 or (self.control is not None and self.control < 0):
            raise IndexError(f"Negative qubit index in {self}")
        if self.control is not None and self.control == self.target:
            raise ValueError(f"Control and target coincide on qubit {self.target}")
        if (self.kind is GateKind.CNOT) != (self.control is not None):
            raise ValueError(f"A control qubit is required for (and only for) CNOT gates, got {self}")
        if (self.param_slot is not None) != self.kind.is_rotation:
            raise ValueError(f"A parameter slot is required for (and only for) rotations, got {self}")
        if self.data_scaled and not self.kind.is_rotation:
            raise ValueError(f"Only rotations can be data scaled, got {self}")

    def qubits(self) -> Tuple[int, ...]:
        """
        Get all qubits the gate acts on.

        :return: Tuple of qubit indices (control first for CNOT)
        """
        if self.control is None:
            return (self.target,)
        return self.control, self.target


def check_qubit_count(n_qubits: int) -> None:
    """
    Check that a register size is within the bounds of the simulator.

    :param n_qubits: Number of qubits
    :return: None
    """
    if n_qubits < 1:
        raise ValueError(f"A register needs at least one qubit, got {n_qubits}")
    if n_qubits > MAX_QUBITS:
        raise SimulationResourceException(
            f"{n_qubits} qubits requested, the simulator supports at most {MAX_QUBITS}"
        )


def _n_qubits_of_dim(dim: int) -> int:
    n_qubits = dim.bit_length() - 1
    if dim < 2 or (1 << n_qubits) != dim:
        raise ValueError(f"Dimension {dim} is not a power of two")
    check_qubit_count(n_qubits)
    return n_qubits


class PureState:
    """Immutable state vector of an n-qubit register."""

    def __init__(
        self, amplitudes: Union[Sequence[complex], np.ndarray], normalize: bool = False
    ):
        """
        Immutable state vector of an n-qubit register.

        :param amplitudes: Complex amplitudes of length 2**n_qubits (big-endian basis order)
        :param normalize: If True, the amplitudes are rescaled to unit norm, otherwise a unit norm is required
        """
        vector = np.array(amplitudes, dtype=complex).ravel()
        self.n_qubits = _n_qubits_of_dim(vector.shape[0])

        norm = np.linalg.norm(vector)
        if normalize:
            if norm == 0:
                raise ValueError("Cannot normalize the zero vector")
            vector = vector / norm
        elif abs(norm - 1.0) > 1e-8:
            raise ValueError(f"State vector is not normalized (norm {norm})")

        vector.flags.writeable = False
        self._amplitudes = vector

    @property
    def amplitudes(self) -> np.ndarray:
        """Read-only amplitude vector."""
        return self._amplitudes

    @property
    def dim(self) -> int:
        """Dimension of the state vector."""
        return self._amplitudes.shape[0]

    def norm(self) -> float:
        """
        Get the L2 norm of the state vector.

        :return: norm
        """
        return float(np.linalg.norm(self._amplitudes))

    def overlap(self, other: "PureState") -> complex:
        """
        Get the inner product <self|other>.

        :param other: State on the same number of qubits
        :return: complex inner product
        """
        if other.n_qubits != self.n_qubits:
            raise ValueError(
                f"Qubit counts differ ({self.n_qubits} vs {other.n_qubits})"
            )
        return complex(np.vdot(self._amplitudes, other.amplitudes))

    def tensor(self, other: "PureState") -> "PureState":
        """
        Get the tensor product self ⊗ other, with self on the leading qubits.

        :param other: State appended on the trailing qubits
        :return: product state
        """
        return PureState(np.kron(self._amplitudes, other.amplitudes))

    def density_matrix(self) -> "MixedState":
        """
        Get the projector |self><self|.

        :return: rank one density matrix
        """
        return MixedState(np.outer(self._amplitudes, self._amplitudes.conj()))

    def __repr__(self) -> str:
        """
        Return class string representation.

        :return: class string representation
        """
        return f"{self.__class__.__name__}(n_qubits={self.n_qubits})"


class MixedState:
    """Immutable density matrix of an n-qubit register."""

    def __init__(self, matrix: np.ndarray, validate: bool = True):
        """
        Immutable density matrix of an n-qubit register.

        :param matrix: Square complex matrix of dimension 2**n_qubits
        :param validate: Check hermiticity, unit trace and positivity within TOLERANCE
        """
        rho = np.array(matrix, dtype=complex)
        if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
            raise ValueError(f"Density matrix must be square, got shape {rho.shape}")
        self.n_qubits = _n_qubits_of_dim(rho.shape[0])

        if validate:
            if np.max(np.abs(rho - rho.conj().T)) > TOLERANCE:
                raise ValueError("Density matrix is not Hermitian")
            trace = np.trace(rho).real
            if abs(trace - 1.0) > TOLERANCE:
                raise ValueError(f"Density matrix has trace {trace}")
            if np.min(np.linalg.eigvalsh(rho)) < -TOLERANCE:
                raise ValueError("Density matrix is not positive semi-definite")

        rho.flags.writeable = False
        self._matrix = rho

    @property
    def matrix(self) -> np.ndarray:
        """Read-only density matrix."""
        return self._matrix

    @property
    def dim(self) -> int:
        """Dimension of the density matrix."""
        return self._matrix.shape[0]

    def eigenvalues(self) -> np.ndarray:
        """
        Get the eigenvalues in ascending order.

        :return: real eigenvalues
        """
        return np.linalg.eigvalsh(self._matrix)

    def purity(self) -> float:
        """
        Get the purity Tr(rho**2).

        :return: purity in [1/dim, 1]
        """
        return float(np.real(np.trace(self._matrix @ self._matrix)))

    def __repr__(self) -> str:
        """
        Return class string representation.

        :return: class string representation
        """
        return f"{self.__class__.__name__}(n_qubits={self.n_qubits})"


def zero_state(n_qubits: int) -> PureState:
    """
    Get the all-zeros product state |0...0>.

    :param n_qubits: Number of qubits (1 to MAX_QUBITS)
    :return: zero state
    """
    check_qubit_count(n_qubits)
    amplitudes = np.zeros(1 << n_qubits, dtype=complex)
    amplitudes[0] = 1.0
    return PureState(amplitudes)


def rotation_matrices(kind: GateKind, angles: Union[float, np.ndarray]) -> np.ndarray:
    """
    Get rotation matrices exp(-i angle P / 2) for P in {X, Y, Z}.

    :param kind: One of RX, RY, RZ
    :param angles: Scalar angle or array of angles (radians)
    :return: array of shape angles.shape + (2, 2)
    """
    angles = np.asarray(angles, dtype=float)
    c = np.cos(angles / 2)
    s = np.sin(angles / 2)
    zeros = np.zeros_like(c)

    if kind is GateKind.RX:
        rows = [[c + 0j, -1j * s], [-1j * s, c + 0j]]
    elif kind is GateKind.RY:
        rows = [[c + 0j, -s + 0j], [s + 0j, c + 0j]]
    elif kind is GateKind.RZ:
        rows = [[c - 1j * s, zeros + 0j], [zeros + 0j, c + 1j * s]]
    else:
        raise ValueError(f"{kind} is not a rotation")

    return np.stack([np.stack(row, axis=-1) for row in rows], axis=-2)


def gate_matrix(kind: GateKind, angle: float = 0.0) -> np.ndarray:
    """
    Get the matrix of a single-qubit gate.

    :param kind: Gate kind (CNOT is not a single-qubit gate)
    :param angle: Rotation angle, ignored for H and IDENTITY
    :return: 2x2 complex matrix
    """
    if kind is GateKind.H:
        return H_MATRIX.copy()
    if kind is GateKind.IDENTITY:
        return np.eye(2, dtype=complex)
    if kind.is_rotation:
        return rotation_matrices(kind, angle)
    raise ValueError(f"{kind} is not a single-qubit gate")


def _apply_single_qubit(tensor: np.ndarray, matrices: np.ndarray, axis: int) -> np.ndarray:
    moved = np.moveaxis(tensor, axis, -1)
    if matrices.ndim == 2:
        out = moved @ matrices.T
    else:
        out = np.einsum("b...j,bij->b...i", moved, matrices)
    return np.moveaxis(out, -1, axis)


def _apply_cnot(tensor: np.ndarray, control_axis: int, target_axis: int) -> np.ndarray:
    out = tensor.copy()
    index: List[Union[int, slice]] = [slice(None)] * tensor.ndim
    index[control_axis] = 1
    # the target axis shifts once the control axis is sliced away
    sub_axis = target_axis - 1 if target_axis > control_axis else target_axis
    out[tuple(index)] = np.flip(tensor[tuple(index)], axis=sub_axis)
    return out


def _apply(
    tensor: np.ndarray, gate: Gate, angles: Union[float, np.ndarray], offset: int = 0
) -> np.ndarray:
    """Apply a gate to a batched tensor of shape (B, 2, ..., 2)."""
    axis = 1 + offset + gate.target
    if gate.kind is GateKind.IDENTITY:
        return tensor
    if gate.kind is GateKind.H:
        return _apply_single_qubit(tensor, H_MATRIX, axis)
    if gate.kind is GateKind.CNOT:
        return _apply_cnot(tensor, 1 + offset + gate.control, axis)  # type: ignore
    return _apply_single_qubit(tensor, rotation_matrices(gate.kind, angles), axis)


def apply_gate(state: PureState, gate: Gate, angle: float = 0.0) -> PureState:
    """
    Apply a single gate to a state.

    :param state: Input state
    :param gate: Gate to apply, qubit indices must be smaller than state.n_qubits
    :param angle: Rotation angle in radians (ignored for H, CNOT and IDENTITY)
    :return: new state U|state>
    """
    for q in gate.qubits():
        if q >= state.n_qubits:
            raise IndexError(f"Qubit {q} out of range for {state.n_qubits} qubits")

    tensor = state.amplitudes.reshape((1,) + (2,) * state.n_qubits)
    return PureState(_apply(tensor, gate, float(angle)).reshape(-1))


def evolve(
    amplitudes: np.ndarray,
    circuit: "ParamCircuit",
    params: Union[Sequence[float], np.ndarray],
    features: Optional[Union[float, Sequence[float], np.ndarray]] = None,
    qubit_offset: int = 0,
    adjoint: bool = False,
    angle_shifts: Optional[np.ndarray] = None,
) -> np.ndarray:
    """
    Apply a parameterised circuit to a batch of state vectors.

    The circuit may act on a slice of a larger register: its qubit q is mapped onto register qubit
    q + qubit_offset.

    :param amplitudes: Batch of state vectors, shape (B, 2**n_register)
    :param circuit: Circuit to apply
    :param params: Circuit parameter vector (length circuit.n_params)
    :param features: Feature value(s) for data-scaled rotations, scalar or one per batch row
    :param qubit_offset: Register qubit that circuit qubit 0 is mapped to
    :param adjoint: Apply the inverse circuit instead
    :param angle_shifts: Optional per-gate angle offsets added to the forward angles (length len(circuit.gates))
    :return: evolved batch, shape (B, 2**n_register)
    """
    amplitudes = np.asarray(amplitudes, dtype=complex)
    if amplitudes.ndim == 1:
        amplitudes = amplitudes[None, :]
    batch = amplitudes.shape[0]
    n_register = _n_qubits_of_dim(amplitudes.shape[1])

    if qubit_offset < 0 or circuit.n_qubits + qubit_offset > n_register:
        raise IndexError(
            f"Circuit on {circuit.n_qubits} qubits at offset {qubit_offset} does not fit a {n_register}-qubit register"
        )

    params = np.asarray(params, dtype=float)
    if params.shape != (circuit.n_params,):
        raise ValueError(
            f"Expected {circuit.n_params} parameters, got shape {params.shape}"
        )

    if features is None:
        if circuit.data_scaled:
            raise ValueError("Circuit contains data-scaled rotations, a feature is required")
        scale = None
    else:
        scale = np.broadcast_to(np.asarray(features, dtype=float), (batch,))

    if angle_shifts is None:
        angle_shifts = np.zeros(len(circuit.gates))

    tensor = amplitudes.reshape((batch,) + (2,) * n_register)
    order = list(enumerate(circuit.gates))
    if adjoint:
        order.reverse()

    for index, gate in order:
        angles: Union[float, np.ndarray] = 0.0
        if gate.kind.is_rotation:
            theta = params[gate.param_slot]
            if gate.data_scaled:
                angles = theta * scale + angle_shifts[index]  # type: ignore
            else:
                angles = float(theta + angle_shifts[index])
            if adjoint:
                angles = -angles
        tensor = _apply(tensor, gate, angles, qubit_offset)

    return tensor.reshape(batch, -1)


def run_circuit_batch(
    circuit: "ParamCircuit",
    params: Union[Sequence[float], np.ndarray],
    features: Optional[Union[Sequence[float], np.ndarray]] = None,
    angle_shifts: Optional[np.ndarray] = None,
) -> np.ndarray:
    """
    Run a circuit on |0...0> once per feature value.

    :param circuit: Circuit to run
    :param params: Circuit parameter vector
    :param features: Feature values, one state is prepared per value (a single run if None)
    :param angle_shifts: Optional per-gate angle offsets
    :return: array of state vectors, shape (len(features), 2**circuit.n_qubits)
    """
    check_qubit_count(circuit.n_qubits)
    batch = 1 if features is None else len(features)
    start = np.zeros((batch, 1 << circuit.n_qubits), dtype=complex)
    start[:, 0] = 1.0
    return evolve(start, circuit, params, features, angle_shifts=angle_shifts)


def run_circuit(
    circuit: "ParamCircuit",
    params: Union[Sequence[float], np.ndarray],
    feature: Optional[float] = None,
) -> PureState:
    """
    Run a circuit on |0...0>.

    Rotation angles are params[slot] * feature for data-scaled gates and params[slot] otherwise.

    :param circuit: Circuit to run
    :param params: Circuit parameter vector
    :param feature: Feature value, required iff the circuit has data-scaled rotations
    :return: prepared state
    """
    features = None if feature is None else [float(feature)]
    return PureState(run_circuit_batch(circuit, params, features)[0])


def _check_subset(subset: Iterable[int], n_qubits: int) -> List[int]:
    qubits = sorted(set(int(q) for q in subset))
    if not qubits:
        raise ValueError("Qubit subset must not be empty")
    if qubits[0] < 0 or qubits[-1] >= n_qubits:
        raise IndexError(f"Qubit subset {qubits} out of range for {n_qubits} qubits")
    return qubits


def partial_trace(state: PureState, keep: Iterable[int]) -> MixedState:
    """
    Trace out all qubits not in `keep`.

    :param state: Pure state of the full register
    :param keep: Qubits to keep (kept in ascending order)
    :return: reduced density matrix on the kept qubits
    """
    kept = _check_subset(keep, state.n_qubits)
    traced = [q for q in range(state.n_qubits) if q not in kept]

    tensor = state.amplitudes.reshape((2,) * state.n_qubits).transpose(kept + traced)
    matrix = tensor.reshape(1 << len(kept), -1)
    return MixedState(matrix @ matrix.conj().T)


def projection_prob(rho: MixedState, psi: PureState) -> float:
    """
    Project a density matrix onto a pure state.

    :param rho: Density matrix
    :param psi: Pure state on the same number of qubits
    :return: <psi|rho|psi> clamped to [0, 1]
    """
    if rho.n_qubits != psi.n_qubits:
        raise ValueError(
            f"Dimension mismatch: rho on {rho.n_qubits} qubits, psi on {psi.n_qubits}"
        )
    value = np.vdot(psi.amplitudes, rho.matrix @ psi.amplitudes).real
    return float(np.clip(value, 0.0, 1.0))


def projection_probs(rho: MixedState, states: np.ndarray) -> np.ndarray:
    """
    Project a density matrix onto a batch of pure states.

    :param rho: Density matrix
    :param states: Normalized state vectors, shape (B, rho.dim)
    :return: array of <psi_b|rho|psi_b> clamped to [0, 1]
    """
    states = np.asarray(states, dtype=complex)
    if states.ndim != 2 or states.shape[1] != rho.dim:
        raise ValueError(
            f"Dimension mismatch: rho of dim {rho.dim}, states of shape {states.shape}"
        )
    values = np.einsum("bi,bi->b", states.conj() @ rho.matrix, states).real
    return np.clip(values, 0.0, 1.0)


def prob_zero_on(state: PureState, subset: Iterable[int]) -> float:
    """
    Get the probability that all qubits of a subset read 0, marginalizing the others.

    :param state: Pure state
    :param subset: Measured qubits
    :return: probability in [0, 1]
    """
    qubits = _check_subset(subset, state.n_qubits)
    index = tuple(0 if q in qubits else slice(None) for q in range(state.n_qubits))
    tensor = state.amplitudes.reshape((2,) * state.n_qubits)
    value = np.sum(np.abs(tensor[index]) ** 2)
    return float(np.clip(value, 0.0, 1.0))


def sample_zero_count(
    state: PureState,
    subset: Iterable[int],
    shots: int,
    seed: Union[int, np.random.Generator, None],
) -> int:
    """
    Simulate `shots` measurements of a qubit subset and count the all-zeros outcomes.

    :param state: Pure state
    :param subset: Measured qubits
    :param shots: Number of measurements M (>= 1)
    :param seed: Seed or generator of the shot noise
    :return: number of all-zeros outcomes M_0
    """
    if shots < 1:
        raise ValueError(f"At least one shot is required, got {shots}")
    p = prob_zero_on(state, subset)
    rng = np.random.default_rng(seed)
    return int(rng.binomial(shots, p))
