"""
Chromosome codec for circuit architectures.

A chromosome is a bit string made of 5-bit genes, one gate per gene. Gene g acts on qubit g mod n_qubits.
The first three bits select the gate, the last two bits select the initial rotation angle (rotations) or the
distance to the target qubit (CNOT).
"""
from dataclasses import dataclass, field
from typing import Dict, List, Sequence, Tuple, Union

import numpy as np

from .sim import Gate, GateKind

GENE_LENGTH = 5

GATE_TABLE: Dict[str, GateKind] = {
    "000": GateKind.H,
    "011": GateKind.RX,
    "111": GateKind.RY,
    "100": GateKind.RZ,
    "001": GateKind.CNOT,
}

ANGLE_TABLE: Dict[str, float] = {
    "00": np.pi,
    "01": np.pi / 2,
    "10": np.pi / 4,
    "11": np.pi / 8,
}

CNOT_OFFSET_TABLE: Dict[str, int] = {"00": 1, "01": 2, "10": 3, "11": 4}

METRIC_KINDS = (GateKind.H, GateKind.RX, GateKind.RY, GateKind.RZ, GateKind.CNOT)


class Chromosome:
    """Immutable bit string encoding a circuit architecture."""

    def __init__(self, bits: Union[str, Sequence[int], np.ndarray]):
        """
        Immutable bit string encoding a circuit architecture.

        :param bits: String of '0'/'1' characters or a sequence of 0/1 integers
        """
        if isinstance(bits, str):
            if set(bits) - {"0", "1"}:
                raise ValueError(f'Chromosome string may only contain "0" and "1": "{bits}"')
            array = np.array([int(c) for c in bits], dtype=np.uint8)
        else:
            array = np.asarray(bits).astype(np.uint8).ravel()
            if np.any(array > 1):
                raise ValueError("Chromosome bits must be 0 or 1")

        if array.size == 0 or array.size % GENE_LENGTH:
            raise ValueError(
                f"Chromosome length must be a positive multiple of {GENE_LENGTH}, got {array.size}"
            )

        array.flags.writeable = False
        self._bits = array

    @property
    def bits(self) -> np.ndarray:
        """Read-only bit array."""
        return self._bits

    @property
    def n_gates(self) -> int:
        """Number of genes (gates)."""
        return self._bits.size // GENE_LENGTH

    def genes(self) -> List[str]:
        """
        Split the chromosome into genes.

        :return: List of 5-character gene strings
        """
        s = str(self)
        return [s[i : i + GENE_LENGTH] for i in range(0, len(s), GENE_LENGTH)]

    def __len__(self) -> int:
        return self._bits.size

    def __str__(self) -> str:
        """
        Return the chromosome as ASCII '0'/'1' string.

        :return: bit string
        """
        return "".join(str(int(b)) for b in self._bits)

    def __repr__(self) -> str:
        return f"{self.__class__.__name__}('{self}')"

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Chromosome):
            return NotImplemented
        return np.array_equal(self._bits, other.bits)

    def __hash__(self) -> int:
        return hash(str(self))


@dataclass(frozen=True)
class ParamCircuit:
    """Ordered gate list over n qubits with a trainable parameter vector."""

    n_qubits: int
    gates: Tuple[Gate, ...]
    n_params: int
    init_params: Tuple[float, ...] = field(default=())

    def __post_init__(self) -> None:
        if self.n_qubits < 1:
            raise ValueError(f"A circuit needs at least one qubit, got {self.n_qubits}")

        slots = []
        for gate in self.gates:
            if max(gate.qubits()) >= self.n_qubits:
                raise IndexError(f"{gate} acts outside of {self.n_qubits} qubits")
            if gate.param_slot is not None:
                slots.append(gate.param_slot)

        if slots != list(range(self.n_params)):
            raise ValueError(
                f"Parameter slots must be contiguous from 0 in gate order, got {slots} for {self.n_params} parameters"
            )

        if len(self.init_params) != self.n_params:
            raise ValueError(
                f"Expected {self.n_params} initial parameters, got {len(self.init_params)}"
            )

    @property
    def data_scaled(self) -> bool:
        """True if any rotation is data scaled."""
        return any(g.data_scaled for g in self.gates)

    def initial_params(self) -> np.ndarray:
        """
        Get the initial parameter vector as array.

        :return: initial parameters (radians)
        """
        return np.array(self.init_params, dtype=float)


@dataclass
class CircuitMetrics:
    """Depth and gate counts of a circuit."""

    depth: int
    counts: Dict[str, int]

    def to_dict(self) -> Dict:
        """
        Get the metrics as plain dictionary.

        :return: dict with depth and counts
        """
        return {"depth": self.depth, "counts": dict(self.counts)}


def decode(
    chromosome: Chromosome, n_qubits: int, data_scaled: bool = True
) -> ParamCircuit:
    """
    Decode a chromosome into a parameterised circuit.

    Gene g targets qubit i = g mod n_qubits. Rotations get a fresh parameter slot initialised from ANGLE_TABLE.
    CNOT genes use qubit i as control and (i + offset) mod n_qubits as target; if the wrapped target equals the
    control the gene decodes to IDENTITY, which makes decoding total.

    :param chromosome: Chromosome to decode
    :param n_qubits: Number of qubits of the circuit
    :param data_scaled: Mark all rotations as data scaled (angle = theta * x)
    :return: decoded circuit
    """
    if n_qubits < 1:
        raise ValueError(f"A circuit needs at least one qubit, got {n_qubits}")

    gates: List[Gate] = []
    init_params: List[float] = []

    for g, gene in enumerate(chromosome.genes()):
        qubit = g % n_qubits
        kind = GATE_TABLE.get(gene[:3], GateKind.IDENTITY)
        tail = gene[3:]

        if kind.is_rotation:
            gates.append(
                Gate(kind, qubit, param_slot=len(init_params), data_scaled=data_scaled)
            )
            init_params.append(ANGLE_TABLE[tail])
        elif kind is GateKind.CNOT:
            target = (qubit + CNOT_OFFSET_TABLE[tail]) % n_qubits
            if target == qubit:
                gates.append(Gate(GateKind.IDENTITY, qubit))
            else:
                gates.append(Gate(GateKind.CNOT, target, control=qubit))
        else:
            gates.append(Gate(kind, qubit))

    return ParamCircuit(
        n_qubits=n_qubits,
        gates=tuple(gates),
        n_params=len(init_params),
        init_params=tuple(init_params),
    )


def random_chromosome(
    n_gates: int, seed: Union[int, np.random.Generator, None]
) -> Chromosome:
    """
    Draw a chromosome of i.i.d. uniform bits.

    :param n_gates: Number of genes (>= 1)
    :param seed: Seed or generator
    :return: random chromosome of 5 * n_gates bits
    """
    if n_gates < 1:
        raise ValueError(f"A chromosome needs at least one gene, got {n_gates}")
    rng = np.random.default_rng(seed)
    return Chromosome(rng.integers(0, 2, size=GENE_LENGTH * n_gates))


def circuit_metrics(circuit: ParamCircuit) -> CircuitMetrics:
    """
    Compute the depth and per-kind gate counts of a circuit.

    Depth is obtained by greedy (as soon as possible) layering. IDENTITY gates neither count nor add depth.

    :param circuit: Circuit to measure
    :return: CircuitMetrics
    """
    levels = [0] * circuit.n_qubits
    counts = {kind.value: 0 for kind in METRIC_KINDS}

    for gate in circuit.gates:
        if gate.kind is GateKind.IDENTITY:
            continue
        counts[gate.kind.value] += 1
        level = max(levels[q] for q in gate.qubits()) + 1
        for q in gate.qubits():
            levels[q] = level

    return CircuitMetrics(depth=max(levels, default=0), counts=counts)
