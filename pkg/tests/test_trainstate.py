import math

import numpy as np
import pytest

from memo_qcd.codec import ParamCircuit, decode, random_chromosome
from memo_qcd.optimize import gradient
from memo_qcd.qfm import FeatureMap
from memo_qcd.sim import Gate, GateKind, MixedState, PureState, partial_trace, projection_prob, run_circuit
from memo_qcd.trainstate import (
    LL_EPSILON,
    HEALayout,
    TrainingObjective,
    TrainReport,
    build_hea,
    complete_unitary,
    exact_rho_train,
    log_likelihood,
    log_likelihood_gradient,
    purification_unitary,
    train_state_circuit,
)

BELL_PARAMS = np.array([np.pi / 2, 0, 0, 0, 0, 0, 0, 0])


def fixed_map(kind: GateKind, theta: float, data_scaled: bool = True) -> FeatureMap:
    circuit = ParamCircuit(1, (Gate(kind, 0, param_slot=0, data_scaled=data_scaled),), 1, (theta,))
    return FeatureMap(circuit, [theta])


def random_map(n_x: int, seed: int) -> FeatureMap:
    circuit = decode(random_chromosome(4 + n_x, seed), n_x)
    return FeatureMap(circuit, circuit.initial_params())


def random_rho(n_qubits: int, rank: int, rng: np.random.Generator) -> MixedState:
    dim = 1 << n_qubits
    vectors = rng.normal(size=(rank, dim)) + 1j * rng.normal(size=(rank, dim))
    vectors /= np.linalg.norm(vectors, axis=1, keepdims=True)
    weights = rng.uniform(0.2, 1.0, size=rank)
    weights /= weights.sum()
    return MixedState(np.einsum("k,ki,kj->ij", weights, vectors, vectors.conj()))


@pytest.mark.parametrize("n_qubits", range(2, 9))
@pytest.mark.parametrize("n_layers", range(1, 7))
def test_hea_gate_counts(n_qubits, n_layers):
    """Test parameter and CNOT counts of the ansatz."""
    circuit = build_hea(n_qubits, n_layers)
    n_cnots = sum(g.kind is GateKind.CNOT for g in circuit.gates)

    assert circuit.n_params == 2 * n_qubits * (n_layers + 1)
    assert n_cnots == n_layers * (n_qubits - 1)
    assert not circuit.data_scaled
    np.testing.assert_array_equal(circuit.initial_params(), 0.0)


def test_hea_structure():
    """Test gate order of a three-qubit single-layer ansatz."""
    circuit = build_hea(3, 1)
    kinds = [g.kind.value for g in circuit.gates]
    assert kinds == ["RY", "RZ"] * 3 + ["CNOT"] * 2 + ["RY", "RZ"] * 3
    assert [(g.control, g.target) for g in circuit.gates[6:8]] == [(0, 1), (1, 2)]

    final_block = build_hea(2, 0)
    assert final_block.n_params == 4
    assert all(g.kind.is_rotation for g in final_block.gates)
    assert build_hea(2, 1, data_scaled=True).data_scaled

    with pytest.raises(ValueError):
        build_hea(0, 1)
    with pytest.raises(ValueError):
        build_hea(2, -1)


def test_layout():
    """Test the qubit layout."""
    layout = HEALayout(n_x=2, d=3, n_a=1, n_layers=2)
    assert layout.n_qubits == 7
    assert layout.data_qubits() == [0, 1, 2, 3, 4, 5]
    assert HEALayout.from_dict(layout.to_dict()) == layout

    with pytest.raises(ValueError):
        HEALayout(n_x=1, d=1, n_a=0)
    with pytest.raises(ValueError):
        HEALayout(n_x=0, d=1)


def test_log_likelihood_of_perfect_match():
    """Test that a single point matching the training state has log-likelihood zero."""
    layout = HEALayout(n_x=1, d=1, n_a=1, n_layers=1)
    qfm = fixed_map(GateKind.RZ, 1.0)
    value = log_likelihood(layout, np.zeros(8), qfm, np.array([[0.7]]))
    assert abs(value) < 1e-9


def test_log_likelihood_of_orthogonal_data():
    """Test that orthogonal data hits the epsilon floor."""
    layout = HEALayout(n_x=1, d=1, n_a=1, n_layers=1)
    qfm = fixed_map(GateKind.RX, np.pi, data_scaled=False)
    value = log_likelihood(layout, np.zeros(8), qfm, np.array([[0.1]]))
    assert value == pytest.approx(math.log(LL_EPSILON))


def test_log_likelihood_is_permutation_invariant(rng):
    """Test invariance under reordering of the dataset."""
    layout = HEALayout(n_x=1, d=2, n_a=1, n_layers=1)
    qfm = random_map(1, 4)
    params = rng.uniform(0, 2 * np.pi, size=12)
    points = rng.uniform(-3, 3, size=(6, 2))

    for objective in ("log-sum", "sum-log"):
        value = log_likelihood(layout, params, qfm, points, objective)
        shuffled = log_likelihood(layout, params, qfm, points[::-1], objective)
        assert shuffled == pytest.approx(value, abs=1e-12)


def test_log_likelihood_matches_explicit_projections(rng):
    """Test the objective against a partial trace done point by point."""
    layout = HEALayout(n_x=1, d=2, n_a=1, n_layers=2)
    qfm = random_map(1, 9)
    params = rng.uniform(0, 2 * np.pi, size=18)
    points = rng.uniform(-3, 3, size=(5, 2))

    target = TrainingObjective(layout, qfm, points)
    phi = run_circuit(target.circuit, params)
    rho = partial_trace(phi, layout.data_qubits())
    expected = sum(projection_prob(rho, qfm.state(x)) for x in points)

    assert math.exp(log_likelihood(layout, params, qfm, points)) == pytest.approx(expected + LL_EPSILON, abs=1e-9)


def test_log_sum_gradient_matches_finite_differences(rng):
    """Test the parameter-shift gradient of the log-sum objective."""
    layout = HEALayout(n_x=1, d=2, n_a=1, n_layers=1)
    qfm = random_map(1, 2)
    params = rng.uniform(0, 2 * np.pi, size=12)
    points = rng.uniform(-3, 3, size=(6, 2))

    target = TrainingObjective(layout, qfm, points)
    np.testing.assert_allclose(
        log_likelihood_gradient(layout, params, qfm, points), gradient(target.value, params), rtol=1e-4, atol=1e-8
    )


def test_sum_log_gradient_matches_finite_differences(rng):
    """Test the parameter-shift gradient of the sum-log objective on a well mixed state."""
    layout = HEALayout(n_x=1, d=1, n_a=1, n_layers=1)
    qfm = fixed_map(GateKind.RY, 1.0)
    params = BELL_PARAMS + rng.normal(scale=0.1, size=8)
    points = rng.uniform(-3, 3, size=(6, 1))

    target = TrainingObjective(layout, qfm, points, objective="sum-log")
    np.testing.assert_allclose(target.gradient(params), gradient(target.value, params), rtol=1e-4, atol=1e-8)


def test_training_objective_validation(rx_map):
    """Test rejected objective inputs."""
    layout = HEALayout(n_x=1, d=1)
    with pytest.raises(ValueError):
        TrainingObjective(layout, rx_map, np.zeros((0, 1)))
    with pytest.raises(ValueError):
        TrainingObjective(layout, rx_map, np.zeros((3, 2)))
    with pytest.raises(ValueError):
        TrainingObjective(HEALayout(n_x=2, d=1), rx_map, np.zeros((3, 1)))
    with pytest.raises(ValueError):
        TrainingObjective(layout, rx_map, np.zeros((3, 1)), objective="max")


def test_train_state_circuit_increases_likelihood(rx_map, rng):
    """Test a short gradient ascent."""
    layout = HEALayout(n_x=1, d=1, n_a=1, n_layers=1)
    points = rng.uniform(-3, 3, size=(8, 1))
    report = train_state_circuit(layout, rx_map, points, epochs=20, learning_rate=0.05, seed=2)

    assert len(report.ll_trace) == 21
    assert report.final > report.initial
    assert report.params.shape == (8,)
    assert list(report.to_frame().columns) == ["epoch", "log_likelihood"]
    assert report.to_dict()["final_log_likelihood"] == report.final

    again = train_state_circuit(layout, rx_map, points, epochs=20, learning_rate=0.05, seed=2)
    np.testing.assert_array_equal(again.params, report.params)


def test_train_state_circuit_variants(rx_map, rng):
    """Test the sum-log objective and the finite-difference gradient."""
    layout = HEALayout(n_x=1, d=1, n_a=1, n_layers=1)
    points = rng.uniform(-3, 3, size=(4, 1))

    report = train_state_circuit(layout, rx_map, points, epochs=3, learning_rate=0.01, objective="sum-log")
    assert report.objective == "sum-log"
    assert all(np.isfinite(report.ll_trace))

    report = train_state_circuit(layout, rx_map, points, epochs=2, learning_rate=0.05, gradient_method="finite-difference")
    assert len(report.ll_trace) == 3

    with pytest.raises(ValueError):
        train_state_circuit(layout, rx_map, points, epochs=2, gradient_method="adjoint")


def test_train_report_validation():
    """Test the trace length check."""
    with pytest.raises(ValueError):
        TrainReport(params=np.zeros(2), ll_trace=[0.0], epochs=3, learning_rate=0.1)


def test_exact_rho_train(rx_map):
    """Test the exact training state for one and two points."""
    assert exact_rho_train(rx_map, np.array([[0.3]])).purity() == pytest.approx(1.0)

    rho = exact_rho_train(rx_map, np.array([[0.0], [np.pi]]))
    np.testing.assert_allclose(rho.matrix, np.eye(2) / 2, atol=1e-15)

    with pytest.raises(ValueError):
        exact_rho_train(rx_map, np.zeros((0, 1)))


def test_exact_rho_train_is_a_density_matrix(rng):
    """Test trace, positivity and rank of a random training state."""
    qfm = random_map(2, 6)
    rho = exact_rho_train(qfm, rng.uniform(-3, 3, size=(8, 1)))
    eigenvalues = rho.eigenvalues()

    assert np.trace(rho.matrix).real == pytest.approx(1.0)
    assert eigenvalues.min() > -1e-12
    assert np.sum(eigenvalues > 1e-10) <= 4


def test_purification_of_pure_state(rx_map):
    """Test that a pure training state needs no ancilla."""
    rho = exact_rho_train(rx_map, np.array([[0.8]]))
    unitary, n_a = purification_unitary(rho)

    assert n_a == 0
    assert unitary.shape == (2, 2)
    assert abs(np.vdot(unitary[:, 0], rx_map.state(0.8).amplitudes)) == pytest.approx(1.0)


def test_purification_of_maximally_mixed_state():
    """Test that I/2 purifies with one ancilla."""
    unitary, n_a = purification_unitary(MixedState(np.eye(2) / 2))
    assert n_a == 1
    reduced = partial_trace(PureState(unitary[:, 0]), [0])
    np.testing.assert_allclose(reduced.matrix, np.eye(2) / 2, atol=1e-12)


def test_purification_ancilla_requests(rng):
    """Test padding with extra ancillas and rejection of too few."""
    rho = random_rho(1, 2, rng)
    unitary, n_a = purification_unitary(rho, n_ancillas=2)
    assert n_a == 2
    assert unitary.shape == (8, 8)
    np.testing.assert_allclose(partial_trace(PureState(unitary[:, 0]), [0]).matrix, rho.matrix, atol=1e-10)

    with pytest.raises(ValueError):
        purification_unitary(rho, n_ancillas=0)


def test_purification_of_random_states():
    """Test the oracle on random datasets of up to four data qubits."""
    rng = np.random.default_rng(99)
    for seed in range(50):
        n_x = 1 + seed % 2
        d = 1 + (seed // 2) % 2
        qfm = random_map(n_x, seed)
        points = rng.uniform(-3, 3, size=(int(rng.integers(1, 33)), d))
        rho = exact_rho_train(qfm, points)

        unitary, n_a = purification_unitary(rho, seed=seed)
        n_data = d * n_x
        assert n_a <= n_data
        np.testing.assert_allclose(unitary.conj().T @ unitary, np.eye(unitary.shape[0]), atol=1e-10)

        reduced = partial_trace(PureState(unitary[:, 0]), range(n_data))
        assert np.max(np.abs(reduced.matrix - rho.matrix)) < 1e-10


def test_purification_of_random_rank_three_state(rng):
    """Test a rank three state on two qubits."""
    rho = random_rho(2, 3, rng)
    unitary, n_a = purification_unitary(rho, seed=1)
    assert n_a == 2
    reduced = partial_trace(PureState(unitary[:, 0]), [0, 1])
    np.testing.assert_allclose(reduced.matrix, rho.matrix, atol=1e-10)


@pytest.mark.parametrize("dim", [2, 8, 64])
def test_complete_unitary_keeps_first_column(dim, rng):
    """Test that the completion is unitary and starts with the given vector."""
    column = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    column /= np.linalg.norm(column)

    unitary = complete_unitary(column, seed=3)
    np.testing.assert_allclose(unitary[:, 0], column, atol=1e-12)
    np.testing.assert_allclose(unitary.conj().T @ unitary, np.eye(dim), atol=1e-10)
    np.testing.assert_array_equal(unitary, complete_unitary(column, seed=3))

    with pytest.raises(ValueError):
        complete_unitary(np.zeros(dim))
