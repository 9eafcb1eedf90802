"""
Population optimizers used for state, measurement and circuit searches.

- pso_minimize: particle swarm with inertia and personal/swarm biases,
  stopping after ``stagnation_window`` iterations without a new swarm best.
- de_minimize: differential evolution over continuous genes plus a bitstring
  (discrete offspring taken mod 2), binomial crossover, greedy replacement.
- gradient_descent: central finite differences with Armijo backtracking.
- genetic_gradient_minimize: bitstring + angle genomes, fitness-proportional
  selection, single-point crossover, bit-flip mutation, elitism, and a
  Lamarckian gradient descent on every child's angles.

Every optimizer draws all randomness from one ``numpy`` Generator on the
coordinating process; objectives run through ``evaluate_population``, which
may fan out with joblib without changing results.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Callable, Hashable, List, Optional, Sequence

import numpy as np
from joblib import Parallel, delayed

from magbound.config import settings
from magbound.schemas import DEConfig, GAConfig, GradientDescentConfig, PSOConfig

logger = logging.getLogger(__name__)

TWO_PI = 2.0 * np.pi
ARMIJO_C = 1e-4
MIN_STEP = 1e-12


def substream(master_seed: int, *keys: int) -> np.random.Generator:
    """Independent generator for (master_seed, *keys), e.g. (seed, gamma index, restart)."""
    return np.random.default_rng(np.random.SeedSequence([int(master_seed), *map(int, keys)]))


def substream_seed(master_seed: int, *keys: int) -> int:
    return int(np.random.SeedSequence([int(master_seed), *map(int, keys)]).generate_state(1)[0])


@dataclass(frozen=True, eq=False)
class SearchSpace:
    lower: np.ndarray
    upper: np.ndarray
    periodic: bool = False
    discrete_bits: int = 0

    def __post_init__(self) -> None:
        lower = np.asarray(self.lower, dtype=float).ravel()
        upper = np.asarray(self.upper, dtype=float).ravel()
        if lower.shape != upper.shape or np.any(upper <= lower):
            raise ValueError("Search bounds must have matching shapes with upper > lower")
        if lower.size + self.discrete_bits < 1:
            raise ValueError("Search space needs at least one dimension")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @classmethod
    def box(cls, dims: int, low: float, high: float, periodic: bool = False, discrete_bits: int = 0) -> "SearchSpace":
        return cls(np.full(dims, low), np.full(dims, high), periodic, discrete_bits)

    @classmethod
    def angles(cls, dims: int, discrete_bits: int = 0) -> "SearchSpace":
        return cls.box(dims, 0.0, TWO_PI, periodic=True, discrete_bits=discrete_bits)

    @property
    def continuous_dims(self) -> int:
        return self.lower.size

    @property
    def width(self) -> np.ndarray:
        return self.upper - self.lower

    def project(self, x: np.ndarray) -> np.ndarray:
        if self.periodic:
            return self.lower + np.mod(x - self.lower, self.width)
        return np.clip(x, self.lower, self.upper)

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return rng.uniform(self.lower, self.upper, size=(n, self.continuous_dims))

    def sample_bits(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return rng.integers(0, 2, size=(n, self.discrete_bits))


@dataclass
class OptimizationResult:
    x: np.ndarray
    value: float
    trace: List[float]
    iterations: int
    evaluations: int
    bits: Optional[np.ndarray] = None
    layout: Hashable = None


def evaluate_population(f: Callable, candidates: Sequence, n_jobs: Optional[int] = None) -> np.ndarray:
    n_jobs = settings.n_jobs if n_jobs is None else n_jobs
    if n_jobs == 1 or len(candidates) < 2:
        return np.array([f(c) for c in candidates], dtype=float)
    return np.array(Parallel(n_jobs=n_jobs)(delayed(f)(c) for c in candidates), dtype=float)


# ---------------------------------------------------------------------------
# Particle swarm
# ---------------------------------------------------------------------------


def velocity_update(
    x: np.ndarray,
    v: np.ndarray,
    b_loc: np.ndarray,
    b_swarm: np.ndarray,
    w: float,
    c1: float,
    c2: float,
    u_loc: np.ndarray | float = 1.0,
    u_swarm: np.ndarray | float = 1.0,
) -> np.ndarray:
    """v <- w v + c1 u_loc (b_loc - x) + c2 u_swarm (b_swarm - x)."""
    return w * v + c1 * u_loc * (b_loc - x) + c2 * u_swarm * (b_swarm - x)


def pso_minimize(
    f: Callable[[np.ndarray], float],
    space: SearchSpace,
    cfg: Optional[PSOConfig] = None,
    seed: Optional[int] = None,
    x0: Optional[np.ndarray] = None,
    n_jobs: Optional[int] = None,
) -> OptimizationResult:
    cfg = cfg or PSOConfig()
    rng = np.random.default_rng(seed)
    n, dims = cfg.n_particles, space.continuous_dims
    x = space.sample(rng, n)
    if x0 is not None:
        x[0] = space.project(np.asarray(x0, dtype=float))
    v = rng.uniform(-1.0, 1.0, size=(n, dims)) * cfg.velocity_fraction * space.width

    values = evaluate_population(f, list(x), n_jobs)
    personal, personal_values = x.copy(), values.copy()
    best = int(np.argmin(personal_values))
    swarm, swarm_value = personal[best].copy(), float(personal_values[best])
    trace = [swarm_value]
    evaluations, stagnant, iteration = n, 0, 0

    for iteration in range(1, cfg.max_iters + 1):
        u_loc = rng.random((n, dims))
        u_swarm = rng.random((n, dims))
        v = velocity_update(x, v, personal, swarm, cfg.omega, cfg.c1, cfg.c2, u_loc, u_swarm)
        x = space.project(x + v)
        values = evaluate_population(f, list(x), n_jobs)
        evaluations += n

        improved = values < personal_values
        personal[improved] = x[improved]
        personal_values[improved] = values[improved]
        best = int(np.argmin(personal_values))
        if personal_values[best] < swarm_value:
            swarm, swarm_value = personal[best].copy(), float(personal_values[best])
            stagnant = 0
        else:
            stagnant += 1
        trace.append(swarm_value)
        if stagnant >= cfg.stagnation_window:
            logger.debug("pso: stagnated after %d iterations at %.10g", iteration, swarm_value)
            break

    return OptimizationResult(x=swarm, value=swarm_value, trace=trace, iterations=iteration, evaluations=evaluations)


# ---------------------------------------------------------------------------
# Differential evolution
# ---------------------------------------------------------------------------


def crossover_mask(rng: np.random.Generator, size: int, rate: float) -> np.ndarray:
    """Genes that take the mutant: rand <= Cr."""
    return rng.random(size) <= rate


def de_offspring(
    target: np.ndarray,
    donors: Sequence[np.ndarray],
    mask: np.ndarray,
    f_scale: float,
    discrete: bool = False,
) -> np.ndarray:
    """Binomial crossover of V1 + F (V2 - V3) into ``target`` where ``mask`` is set."""
    v1, v2, v3 = donors
    if discrete:
        mutant = np.mod(v1 + v2 - v3, 2)
    else:
        mutant = v1 + f_scale * (v2 - v3)
    return np.where(mask, mutant, target)


def de_minimize(
    f: Callable[[np.ndarray, np.ndarray], float],
    space: SearchSpace,
    cfg: Optional[DEConfig] = None,
    seed: Optional[int] = None,
    n_jobs: Optional[int] = None,
) -> OptimizationResult:
    """
    Minimize f(x, bits) over the continuous box of ``space`` and
    ``space.discrete_bits`` binary genes. Generations are synchronous: every
    trial is built from the previous generation.
    """
    cfg = cfg or DEConfig()
    rng = np.random.default_rng(seed)
    n = cfg.population_size
    x = space.sample(rng, n)
    bits = space.sample_bits(rng, n)
    values = evaluate_population(lambda c: f(*c), list(zip(x, bits)), n_jobs)
    trace = [float(values.min())]
    evaluations = n

    for _ in range(cfg.generations):
        trial_x = np.empty_like(x)
        trial_bits = np.empty_like(bits)
        for i in range(n):
            others = np.delete(np.arange(n), i)
            r1, r2, r3 = rng.choice(others, size=3, replace=False)
            mask_x = crossover_mask(rng, space.continuous_dims, cfg.crossover_rate)
            mask_b = crossover_mask(rng, space.discrete_bits, cfg.crossover_rate)
            trial_x[i] = space.project(de_offspring(x[i], (x[r1], x[r2], x[r3]), mask_x, cfg.f_scale))
            trial_bits[i] = de_offspring(bits[i], (bits[r1], bits[r2], bits[r3]), mask_b, 1.0, discrete=True)
        trial_values = evaluate_population(lambda c: f(*c), list(zip(trial_x, trial_bits)), n_jobs)
        evaluations += n
        better = trial_values < values
        x[better], bits[better], values[better] = trial_x[better], trial_bits[better], trial_values[better]
        trace.append(float(values.min()))

    best = int(np.argmin(values))
    return OptimizationResult(
        x=x[best].copy(),
        bits=bits[best].copy(),
        value=float(values[best]),
        trace=trace,
        iterations=cfg.generations,
        evaluations=evaluations,
    )


# ---------------------------------------------------------------------------
# Gradient descent
# ---------------------------------------------------------------------------


def finite_difference_gradient(f: Callable[[np.ndarray], float], x: np.ndarray, h: float) -> np.ndarray:
    grad = np.zeros_like(x)
    for i in range(x.size):
        step = np.zeros_like(x)
        step[i] = h
        grad[i] = (f(x + step) - f(x - step)) / (2.0 * h)
    return grad


def gradient_descent(
    f: Callable[[np.ndarray], float],
    x0: np.ndarray,
    cfg: Optional[GradientDescentConfig] = None,
    space: Optional[SearchSpace] = None,
) -> OptimizationResult:
    cfg = cfg or GradientDescentConfig()
    project = space.project if space is not None else (lambda y: y)
    x = np.asarray(x0, dtype=float).copy()
    value = float(f(x))
    trace = [value]
    evaluations, steps = 1, 0
    if x.size == 0:
        return OptimizationResult(x=x, value=value, trace=trace, iterations=0, evaluations=evaluations)

    for steps in range(1, cfg.max_steps + 1):
        grad = finite_difference_gradient(f, x, cfg.fd_step)
        evaluations += 2 * x.size
        norm_sq = float(grad @ grad)
        if np.sqrt(norm_sq) < cfg.tol:
            break
        t = cfg.step
        while t > MIN_STEP:
            candidate = project(x - t * grad)
            candidate_value = float(f(candidate))
            evaluations += 1
            if candidate_value <= value - ARMIJO_C * t * norm_sq:
                break
            t *= 0.5
        else:
            break
        x, value = candidate, candidate_value
        trace.append(value)

    return OptimizationResult(x=x, value=value, trace=trace, iterations=steps, evaluations=evaluations)


# ---------------------------------------------------------------------------
# Genetic algorithm with gradient-polished angles
# ---------------------------------------------------------------------------


@dataclass
class Individual:
    bits: np.ndarray
    angles: np.ndarray
    layout: Hashable = ()
    value: float = field(default=np.inf)


GenomeObjective = Callable[[np.ndarray, np.ndarray, Hashable], float]


def _polish(f: GenomeObjective, ind: Individual, cfg: GradientDescentConfig) -> Individual:
    space = SearchSpace.angles(ind.angles.size) if ind.angles.size else None
    result = gradient_descent(lambda a: f(ind.bits, a, ind.layout), ind.angles, cfg, space)
    return replace(ind, angles=result.x, value=result.value)


def _selection_probabilities(values: np.ndarray) -> np.ndarray:
    fitness = 1.0 / (1.0 + values - values.min())
    return fitness / fitness.sum()


def _crossover(a: Individual, b: Individual, rng: np.random.Generator) -> tuple[Individual, Individual]:
    if a.layout != b.layout or a.bits.size != b.bits.size or a.angles.size != b.angles.size:
        return replace(a), replace(b)
    cut_bits = int(rng.integers(0, a.bits.size + 1))
    cut_angles = int(rng.integers(0, a.angles.size + 1))
    child_a = Individual(
        bits=np.concatenate([a.bits[:cut_bits], b.bits[cut_bits:]]),
        angles=np.concatenate([a.angles[:cut_angles], b.angles[cut_angles:]]),
        layout=a.layout,
    )
    child_b = Individual(
        bits=np.concatenate([b.bits[:cut_bits], a.bits[cut_bits:]]),
        angles=np.concatenate([b.angles[:cut_angles], a.angles[cut_angles:]]),
        layout=a.layout,
    )
    return child_a, child_b


def genetic_gradient_minimize(
    f: GenomeObjective,
    initial: Sequence[Individual],
    cfg: Optional[GAConfig] = None,
    seed: Optional[int] = None,
    grow: Optional[Callable[[Individual, np.random.Generator], Individual]] = None,
    n_jobs: Optional[int] = None,
) -> OptimizationResult:
    """
    Evolve ``initial`` (its length is the population size).

    ``grow`` may extend a child's genome after mutation; children whose
    layouts differ from their partner's are copied instead of crossed.
    """
    cfg = cfg or GAConfig(pop_size=len(initial))
    rng = np.random.default_rng(seed)
    polish = lambda ind: _polish(f, ind, cfg.inner_gd)
    n_jobs = settings.n_jobs if n_jobs is None else n_jobs

    def evaluate(individuals: Sequence[Individual]) -> List[Individual]:
        if n_jobs == 1 or len(individuals) < 2:
            return [polish(ind) for ind in individuals]
        return list(Parallel(n_jobs=n_jobs)(delayed(polish)(ind) for ind in individuals))

    population = sorted(evaluate(list(initial)), key=lambda ind: ind.value)
    pop_size = len(population)
    evaluations = pop_size
    trace = [population[0].value]
    generation = 0

    for generation in range(1, cfg.generations + 1):
        if cfg.target_value is not None and population[0].value <= cfg.target_value:
            break
        free_slots = pop_size - min(cfg.elitism_count, pop_size)
        if free_slots > 0:
            probs = _selection_probabilities(np.array([ind.value for ind in population]))
            children: List[Individual] = []
            while len(children) < pop_size:
                i, j = rng.choice(pop_size, size=2, p=probs)
                if rng.random() < cfg.crossover_rate:
                    pair = _crossover(population[i], population[j], rng)
                else:
                    pair = (replace(population[i]), replace(population[j]))
                for child in pair:
                    flips = rng.random(child.bits.size) < cfg.mutation_rate
                    child = replace(child, bits=np.where(flips, 1 - child.bits, child.bits), value=np.inf)
                    if grow is not None:
                        child = grow(child, rng)
                    children.append(child)
            children = evaluate(children[:pop_size])
            evaluations += pop_size
            elites = population[: cfg.elitism_count]
            rest = sorted(population[cfg.elitism_count :] + children, key=lambda ind: ind.value)
            population = sorted(elites + rest[:free_slots], key=lambda ind: ind.value)
        trace.append(population[0].value)
        logger.debug("ga generation %d best %.10g", generation, population[0].value)

    best = population[0]
    return OptimizationResult(
        x=best.angles,
        bits=best.bits,
        layout=best.layout,
        value=best.value,
        trace=trace,
        iterations=generation,
        evaluations=evaluations,
    )
