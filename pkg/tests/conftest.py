import os

import numpy as np
import pytest

from memo_qcd.codec import Chromosome, ParamCircuit, decode
from memo_qcd.qfm import FeatureMap
from memo_qcd.sim import Gate, GateKind

# RY(pi) q0, RY(pi/2) q1, CNOT q0 -> q1, RX(pi/4) q1
TWO_QUBIT_CHROMOSOME = "11100111010010001110"


def pytest_collection_modifyitems(config, items):
    if os.environ.get("MEMOQCD_RUN_SLOW") == "1":
        return
    skip_slow = pytest.mark.skip(reason="set MEMOQCD_RUN_SLOW=1 to run full-budget tests")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


def single_rotation(kind: GateKind, theta: float = 1.0, data_scaled: bool = True) -> FeatureMap:
    circuit = ParamCircuit(
        n_qubits=1,
        gates=(Gate(kind, 0, param_slot=0, data_scaled=data_scaled),),
        n_params=1,
        init_params=(theta,),
    )
    return FeatureMap(circuit, [theta])


@pytest.fixture
def rx_map() -> FeatureMap:
    """Single data-scaled RX(x) on one qubit."""
    return single_rotation(GateKind.RX)


@pytest.fixture
def two_qubit_map() -> FeatureMap:
    """Decoded two-qubit feature map with perturbed angles."""
    circuit = decode(Chromosome(TWO_QUBIT_CHROMOSOME), 2)
    return FeatureMap(circuit, circuit.initial_params() * 0.3)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)
