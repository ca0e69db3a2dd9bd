"""
Circuit architecture search and gradient based parameter optimisation.

Three ways to approximate the target kernel are offered:

- genetic: chromosomes are decoded and scored with their frozen initial angles
- memetic: every decoded circuit is first refined by gradient descent, then scored
- hea: the angles of a fixed hardware efficient ansatz are optimised (no search)
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from .codec import Chromosome, ParamCircuit, circuit_metrics, decode, random_chromosome
from .console import bcolors, printc, report_progress
from .qfm import KernelSpec, PairSet, kernel_mse, kernel_mse_gradient, sample_pairs
from .trainstate import build_hea

SEARCH_MODES = ("genetic", "memetic", "hea")
GRADIENT_METHODS = ("parameter-shift", "finite-difference")
FD_STEP = 1e-4
DEPTH_PENALTY = 1.0

Objective = Callable[[np.ndarray], float]
GradientFunction = Callable[[np.ndarray], np.ndarray]


class NumericalDivergenceException(Exception):
    """Objective or gradient became non-finite."""


def _finite(value: float, what: str, params: np.ndarray) -> float:
    if not np.isfinite(value):
        raise NumericalDivergenceException(f"{what} is not finite ({value}) at parameters {params.tolist()}")
    return value


def gradient(objective: Objective, params: Union[Sequence[float], np.ndarray], step: float = FD_STEP) -> np.ndarray:
    """
    Central finite-difference gradient (the reference gradient).

    :param objective: Real valued function of the parameter vector
    :param params: Parameter vector
    :param step: Step h of the central difference
    :return: gradient vector
    """
    params = np.asarray(params, dtype=float)
    _finite(objective(params), "Objective", params)

    grad = np.zeros_like(params)
    shifted = params.copy()
    for k in range(params.shape[0]):
        shifted[k] = params[k] + step
        plus = objective(shifted)
        shifted[k] = params[k] - step
        minus = objective(shifted)
        shifted[k] = params[k]
        grad[k] = _finite((plus - minus) / (2 * step), f"Gradient component {k}", params)
    return grad


def parameter_shift(objective: Objective, params: Union[Sequence[float], np.ndarray]) -> np.ndarray:
    """
    Parameter-shift gradient (f(theta + pi/2) - f(theta - pi/2)) / 2 per coordinate.

    Only exact for objectives that are expectation values of a circuit in which every parameter drives exactly
    one rotation without data scaling. Use qfm.kernel_mse_gradient for the kernel objective.

    :param objective: Real valued function of the parameter vector
    :param params: Parameter vector
    :return: gradient vector
    """
    params = np.asarray(params, dtype=float)
    grad = np.zeros_like(params)
    shifted = params.copy()
    for k in range(params.shape[0]):
        shifted[k] = params[k] + np.pi / 2
        plus = objective(shifted)
        shifted[k] = params[k] - np.pi / 2
        minus = objective(shifted)
        shifted[k] = params[k]
        grad[k] = _finite((plus - minus) / 2, f"Gradient component {k}", params)
    return grad


def gd_minimize(
    objective: Objective,
    init_params: Union[Sequence[float], np.ndarray],
    epochs: int,
    learning_rate: float,
    grad: Optional[GradientFunction] = None,
    verbose: bool = False,
    report_every: int = 100,
    label: str = "objective",
    sign: float = 1.0,
) -> Tuple[np.ndarray, List[float]]:
    """
    Plain full-batch gradient descent.

    :param objective: Function to minimise
    :param init_params: Start parameters
    :param epochs: Number of update steps (>= 1)
    :param learning_rate: Step size
    :param grad: Gradient function, central finite differences if None
    :param verbose: Print progress every `report_every` epochs
    :param report_every: Reporting interval in epochs
    :param label: Name of the objective in progress lines
    :param sign: Factor applied to reported values (-1 to report the maximised quantity of an ascent)
    :return: final parameters, objective trace of length epochs + 1 (initial value first)
    """
    if epochs < 1:
        raise ValueError(f"At least one epoch is required, got {epochs}")
    if grad is None:
        grad = lambda p: gradient(objective, p)  # noqa: E731

    params = np.array(init_params, dtype=float)
    trace = [_finite(float(objective(params)), "Objective", params)]

    for epoch in range(1, epochs + 1):
        g = grad(params)
        if not np.all(np.isfinite(g)):
            raise NumericalDivergenceException(f"Gradient is not finite in epoch {epoch}: {g.tolist()}")
        params = params - learning_rate * g
        value = float(objective(params))
        if not np.isfinite(value):
            raise NumericalDivergenceException(
                f"Objective diverged in epoch {epoch} (learning rate {learning_rate}, last value {trace[-1]})"
            )
        trace.append(value)
        if verbose and (epoch % report_every == 0 or epoch == epochs):
            report_progress(epoch, epochs, label, sign * value)

    return params, trace


@dataclass
class SearchConfig:
    """Budget and operator settings of a circuit search run."""

    generations: int = 30
    population: int = 15
    epochs: int = 2000
    learning_rate: float = 0.2
    mutation_rate: Optional[float] = None
    crossover_rate: float = 0.9
    tournament_size: int = 3
    elitism: int = 1
    n_gates: int = 8
    n_qubits: int = 2
    seed: int = 0
    mode: str = "memetic"
    hea_layers: int = 1
    depth_limit: Optional[int] = None
    gradient_method: str = "parameter-shift"
    threads: int = 1

    def __post_init__(self) -> None:
        if self.mode not in SEARCH_MODES:
            raise ValueError(f'Unknown search mode "{self.mode}", expected one of {SEARCH_MODES}')
        if self.gradient_method not in GRADIENT_METHODS:
            raise ValueError(f'Unknown gradient method "{self.gradient_method}"')
        if self.population < 2:
            raise ValueError(f"Population must hold at least 2 agents, got {self.population}")
        if not 0 <= self.elitism < self.population:
            raise ValueError(f"Elitism must be in [0, population), got {self.elitism}")
        if self.mutation_rate is not None and not 0.0 <= self.mutation_rate <= 1.0:
            raise ValueError(f"Mutation rate must be in [0, 1], got {self.mutation_rate}")
        if not 0.0 <= self.crossover_rate <= 1.0:
            raise ValueError(f"Crossover rate must be in [0, 1], got {self.crossover_rate}")
        for name in ("generations", "epochs", "tournament_size", "n_gates", "n_qubits", "hea_layers", "threads"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")

    @property
    def chromosome_length(self) -> int:
        """Number of bits per chromosome."""
        return 5 * self.n_gates

    @property
    def effective_mutation_rate(self) -> float:
        """Per-bit mutation rate, 1 / chromosome length unless set."""
        if self.mutation_rate is None:
            return 1.0 / self.chromosome_length
        return self.mutation_rate

    @property
    def effective_depth_limit(self) -> int:
        """Depth above which circuits are penalised, the depth of a single-layer HEA unless set."""
        if self.depth_limit is None:
            return circuit_metrics(build_hea(self.n_qubits, 1)).depth
        return self.depth_limit

    def to_dict(self) -> Dict:
        """
        Get the configuration as JSON-compatible dictionary.

        :return: dict representation
        """
        return {
            "generations": self.generations,
            "population": self.population,
            "epochs": self.epochs,
            "learning_rate": self.learning_rate,
            "mutation_rate": self.effective_mutation_rate,
            "crossover_rate": self.crossover_rate,
            "tournament_size": self.tournament_size,
            "elitism": self.elitism,
            "n_gates": self.n_gates,
            "n_qubits": self.n_qubits,
            "seed": self.seed,
            "mode": self.mode,
            "hea_layers": self.hea_layers,
            "depth_limit": self.effective_depth_limit,
            "gradient_method": self.gradient_method,
        }


@dataclass
class Agent:
    """
    Individual of the search population.

    `mse` is the kernel MSE at (chromosome, params); `fitness` adds the depth penalty and is what selection
    minimises. Both are infinite until the agent is evaluated.
    """

    chromosome: Chromosome
    params: np.ndarray = field(default_factory=lambda: np.zeros(0))
    fitness: float = float("inf")
    mse: float = float("inf")
    depth: int = 0

    @property
    def evaluated(self) -> bool:
        """True once fitness was computed."""
        return np.isfinite(self.fitness)

    def circuit(self, n_qubits: int) -> ParamCircuit:
        """
        Decode the chromosome.

        :param n_qubits: Number of qubits
        :return: decoded circuit
        """
        return decode(self.chromosome, n_qubits)

    def copy(self) -> "Agent":
        """
        Get an independent copy.

        :return: Agent
        """
        return Agent(self.chromosome, self.params.copy(), self.fitness, self.mse, self.depth)


def search_streams(seed: int) -> Tuple[np.random.Generator, np.random.Generator]:
    """
    Derive the independent random streams of a search run.

    Runs with equal seed share the pair set regardless of mode, which makes genetic, memetic and HEA runs
    directly comparable.

    :param seed: Run seed
    :return: generator for the pair set, generator for the search operators
    """
    pair_seq, search_seq = np.random.SeedSequence(seed).spawn(2)
    return np.random.default_rng(pair_seq), np.random.default_rng(search_seq)


class _Evaluator:
    """Scores agents on a frozen pair set."""

    def __init__(self, config: SearchConfig, kernel: KernelSpec, pairs: PairSet):
        self.config = config
        self.kernel = kernel
        self.pairs = pairs
        self.depth_limit = config.effective_depth_limit

    def mse(self, circuit: ParamCircuit, params: np.ndarray) -> float:
        return kernel_mse(circuit, params, self.pairs, self.kernel.gamma)

    def __call__(self, agent: Agent) -> Agent:
        if agent.evaluated:
            return agent

        circuit = agent.circuit(self.config.n_qubits)
        params = circuit.initial_params()
        mse = self.mse(circuit, params)

        if self.config.mode == "memetic" and circuit.n_params > 0:
            grad = None
            if self.config.gradient_method == "parameter-shift":
                grad = lambda p: kernel_mse_gradient(circuit, p, self.pairs, self.kernel.gamma)  # noqa: E731
            refined, trace = gd_minimize(
                lambda p: self.mse(circuit, p),
                params,
                epochs=self.config.epochs,
                learning_rate=self.config.learning_rate,
                grad=grad,
            )
            # an overshooting descent never makes an agent worse than its decoded angles
            if trace[-1] < mse:
                params, mse = refined, trace[-1]

        depth = circuit_metrics(circuit).depth
        penalty = DEPTH_PENALTY if depth > self.depth_limit else 0.0
        return Agent(agent.chromosome, params, mse + penalty, mse, depth)


def _tournament(population: List[Agent], size: int, rng: np.random.Generator) -> Agent:
    contenders = rng.choice(len(population), size=min(size, len(population)), replace=False)
    return min((population[i] for i in contenders), key=lambda a: a.fitness)


def _crossover(
    first: Chromosome, second: Chromosome, rate: float, rng: np.random.Generator
) -> Tuple[np.ndarray, np.ndarray]:
    a = first.bits.copy()
    b = second.bits.copy()
    n_gates = first.n_gates
    if n_gates > 1 and rng.random() < rate:
        cut = 5 * int(rng.integers(1, n_gates))
        a[cut:], b[cut:] = second.bits[cut:], first.bits[cut:]
    return a, b


def _mutate(bits: np.ndarray, rate: float, rng: np.random.Generator) -> Chromosome:
    flips = rng.random(bits.shape[0]) < rate
    return Chromosome(np.where(flips, 1 - bits, bits))


def _breed(population: List[Agent], config: SearchConfig, rng: np.random.Generator) -> List[Agent]:
    ranked = sorted(population, key=lambda a: a.fitness)
    offspring = [a.copy() for a in ranked[: config.elitism]]

    while len(offspring) < config.population:
        first = _tournament(population, config.tournament_size, rng)
        second = _tournament(population, config.tournament_size, rng)
        for bits in _crossover(first.chromosome, second.chromosome, config.crossover_rate, rng):
            if len(offspring) < config.population:
                offspring.append(Agent(_mutate(bits, config.effective_mutation_rate, rng)))

    return offspring


def evolve(
    config: SearchConfig,
    kernel: KernelSpec,
    pairs: Optional[PairSet] = None,
    verbose: bool = False,
) -> Tuple[Agent, pd.DataFrame]:
    """
    Run a genetic or memetic circuit search.

    Every generation applies elitism, tournament selection, single-point crossover at gene boundaries and
    per-bit mutation. Fitness evaluations within a generation run on `config.threads` workers and are
    collected in population order, so the result does not depend on the thread count.

    :param config: Search configuration (mode genetic or memetic)
    :param kernel: Target kernel and pair sampling settings
    :param pairs: Frozen pair set, sampled from the seed if None
    :param verbose: Print one line per generation
    :return: best agent ever seen, history with columns generation, best_fitness, mean_fitness, best_mse
    """
    if config.mode not in ("genetic", "memetic"):
        raise ValueError(f'Evolution requires mode genetic or memetic, got "{config.mode}"')

    pair_rng, rng = search_streams(config.seed)
    if pairs is None:
        pairs = sample_pairs(kernel, pair_rng)
    evaluate = _Evaluator(config, kernel, pairs)

    population = [Agent(random_chromosome(config.n_gates, rng)) for _ in range(config.population)]
    best: Optional[Agent] = None
    rows = []

    with ThreadPoolExecutor(max_workers=config.threads) as executor:
        for generation in range(config.generations):
            if generation > 0:
                population = _breed(population, config, rng)
            population = list(executor.map(evaluate, population))

            leader = min(population, key=lambda a: a.fitness)
            if best is None or leader.fitness < best.fitness:
                best = leader.copy()

            rows.append(
                {
                    "generation": generation,
                    "best_fitness": best.fitness,
                    "mean_fitness": float(np.mean([a.fitness for a in population])),
                    "best_mse": best.mse,
                }
            )
            if verbose:
                report_progress(generation + 1, config.generations, f"{config.mode} best fitness", best.fitness)

    if verbose:
        printc(f"Best chromosome: {best.chromosome}", col=bcolors.OKGREEN)  # type: ignore

    return best, pd.DataFrame(rows, columns=["generation", "best_fitness", "mean_fitness", "best_mse"])  # type: ignore


def hea_kernel_fit(
    n_qubits: int,
    n_layers: int,
    kernel: KernelSpec,
    epochs: int = 2000,
    learning_rate: float = 0.2,
    seed: int = 0,
    pairs: Optional[PairSet] = None,
    gradient_method: str = "parameter-shift",
    verbose: bool = False,
) -> Tuple[np.ndarray, List[float]]:
    """
    Fit the angles of a fixed data-scaled HEA to the target kernel.

    Initial angles are drawn uniformly from [-1, 1]; an all-zero start sits at the trivial constant kernel,
    where the gradient vanishes.

    :param n_qubits: Qubits of the feature map
    :param n_layers: HEA layers (>= 1)
    :param kernel: Target kernel and pair sampling settings
    :param epochs: Descent steps
    :param learning_rate: Step size
    :param seed: Run seed (pairs and initial angles)
    :param pairs: Frozen pair set, sampled from the seed if None
    :param gradient_method: "parameter-shift" or "finite-difference"
    :param verbose: Print progress
    :return: fitted parameters, MSE trace of length epochs + 1
    """
    if n_layers < 1:
        raise ValueError(f"At least one HEA layer is required, got {n_layers}")
    if gradient_method not in GRADIENT_METHODS:
        raise ValueError(f'Unknown gradient method "{gradient_method}"')

    pair_rng, rng = search_streams(seed)
    if pairs is None:
        pairs = sample_pairs(kernel, pair_rng)

    circuit = build_hea(n_qubits, n_layers, data_scaled=True)
    init_params = rng.uniform(-1.0, 1.0, size=circuit.n_params)

    grad = None
    if gradient_method == "parameter-shift":
        grad = lambda p: kernel_mse_gradient(circuit, p, pairs, kernel.gamma)  # noqa: E731

    return gd_minimize(
        lambda p: kernel_mse(circuit, p, pairs, kernel.gamma),
        init_params,
        epochs=epochs,
        learning_rate=learning_rate,
        grad=grad,
        verbose=verbose,
        label="kernel MSE",
    )
