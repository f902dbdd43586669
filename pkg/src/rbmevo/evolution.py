"""Generational loop: truncation selection plus three reproduction models.

Reproduction models:
  * rbm   — train a fresh (or persistent) RBM on the survivors each
            generation and sample the whole next generation from it.
  * rm    — copy a random surviving parent and flip a fixed number of
            distinct bits.
  * brg   — draw a fresh random population every generation and track the
            best genome seen so far (pure-guessing baseline).

Population mean fitness is always recorded before selection so that curves
are comparable across survivor fractions.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .rbm import Rbm, RbmConfig
from .sat import FitnessFn

__all__ = [
    "RBM_MIN_SURVIVORS",
    "SurvivorSpec",
    "Population",
    "GenerationRecord",
    "RbmModel",
    "RmModel",
    "BrgModel",
    "ModelConfig",
    "init_population",
    "select_top",
    "step_rm",
    "step_rbm",
    "mean_expected_heterozygosity",
    "run_generation_loop",
]

#: An RBM cannot be fit on fewer survivors than this.
RBM_MIN_SURVIVORS = 50


@dataclass(frozen=True)
class SurvivorSpec:
    """How many individuals survive selection: a percentage or an absolute count."""

    kind: str  # "percent" | "count"
    value: float

    @classmethod
    def top_percent(cls, percent: float) -> "SurvivorSpec":
        if not 0 < percent <= 100:
            raise ValueError(f"percentage must be in (0, 100], got {percent}")
        return cls("percent", float(percent))

    @classmethod
    def top_count(cls, count: int) -> "SurvivorSpec":
        if count < 1:
            raise ValueError(f"survivor count must be >= 1, got {count}")
        return cls("count", int(count))

    def raw_count(self, population_size: int) -> int:
        """Survivor count before the minimum-1 clamp (used by admissibility rules)."""
        if self.kind == "percent":
            return round(population_size * self.value / 100.0)
        return int(self.value)

    def resolve(self, population_size: int) -> int:
        s = max(1, self.raw_count(population_size))
        if s > population_size:
            raise ValueError(f"survivor spec {self} resolves to {s} > N={population_size}")
        return s

    def __str__(self) -> str:
        if self.kind == "percent":
            v = self.value
            return f"{v:g}%"
        return str(int(self.value))

    @classmethod
    def parse(cls, text: str) -> "SurvivorSpec":
        """Parse '50%' as a percentage, '3' as an absolute count."""
        t = text.strip()
        if t.endswith("%"):
            return cls.top_percent(float(t[:-1]))
        return cls.top_count(int(t))


@dataclass
class Population:
    """Genomes of one generation plus their (pre-selection) fitness values."""

    genomes: np.ndarray  # (N, n) uint8
    fitnesses: np.ndarray  # (N,) float64

    def __post_init__(self):
        if self.genomes.ndim != 2 or self.fitnesses.shape != (self.genomes.shape[0],):
            raise ValueError("genomes must be (N, n) with one fitness per row")

    @property
    def size(self) -> int:
        return self.genomes.shape[0]


@dataclass
class GenerationRecord:
    generation: int
    mean_fitness: float
    best_fitness: float
    mean_heterozygosity: float
    histogram: np.ndarray | None = None


@dataclass
class RbmModel:
    rbm: RbmConfig
    survivors: SurvivorSpec
    persistence: str = "fresh"  # "fresh" | "persistent"

    def __post_init__(self):
        if self.persistence not in ("fresh", "persistent"):
            raise ValueError(f"persistence must be 'fresh' or 'persistent', got {self.persistence!r}")


@dataclass
class RmModel:
    mu: int
    survivors: SurvivorSpec

    def __post_init__(self):
        if self.mu < 1:
            raise ValueError("mu must be >= 1")


@dataclass
class BrgModel:
    pass


@dataclass
class ModelConfig:
    model: RbmModel | RmModel | BrgModel
    population_size: int
    fitness: FitnessFn
    generations: int
    seed: int | None = None

    def validate(self) -> None:
        if self.population_size < 1:
            raise ValueError("population_size must be >= 1")
        if self.generations < 0:
            raise ValueError("generations must be >= 0")
        n = self.fitness.n
        m = self.model
        if isinstance(m, RmModel):
            if m.mu > n:
                raise ValueError(f"mu={m.mu} exceeds genome length {n}")
            m.survivors.resolve(self.population_size)
        elif isinstance(m, RbmModel):
            s = m.survivors.resolve(self.population_size)
            if s < RBM_MIN_SURVIVORS:
                raise ValueError(
                    f"RBM training set would be {s} survivors; at least {RBM_MIN_SURVIVORS} required"
                )
            if m.rbm.batch_size > s:
                raise ValueError(
                    f"batch_size {m.rbm.batch_size} exceeds survivor count {s}"
                )


def init_population(
    population_size: int, fitness: FitnessFn, rng: np.random.Generator
) -> Population:
    """N genomes of fair-coin bits, fitness precomputed."""
    genomes = rng.integers(0, 2, size=(population_size, fitness.n), dtype=np.uint8)
    return Population(genomes, fitness.many(genomes))


def select_top(
    pop: Population, spec: SurvivorSpec, rng: np.random.Generator
) -> np.ndarray:
    """Genomes of the ``spec`` fittest individuals; cutoff ties broken uniformly."""
    s = spec.resolve(pop.size)
    f = pop.fitnesses
    order = np.argsort(-f)
    cutoff = f[order[s - 1]]
    above = np.flatnonzero(f > cutoff)
    tied = np.flatnonzero(f == cutoff)
    need = s - above.size
    if need < tied.size:
        tied = rng.choice(tied, size=need, replace=False)
    chosen = np.concatenate([above, tied])
    return pop.genomes[chosen]


def step_rm(
    survivors: np.ndarray, population_size: int, mu: int, rng: np.random.Generator
) -> np.ndarray:
    """Each offspring copies a random surviving parent and flips mu distinct bits."""
    if survivors.ndim != 2 or survivors.shape[0] == 0:
        raise ValueError("survivors must be a nonempty (s, n) matrix")
    n = survivors.shape[1]
    if not 1 <= mu <= n:
        raise ValueError(f"mu must be in [1, {n}], got {mu}")
    parents = rng.integers(0, survivors.shape[0], size=population_size)
    offspring = survivors[parents].copy()
    # mu distinct flip positions per row: the mu smallest of n random keys.
    keys = rng.random((population_size, n))
    if mu == n:
        flip = np.broadcast_to(np.arange(n), (population_size, n))
    else:
        flip = np.argpartition(keys, mu - 1, axis=1)[:, :mu]
    rows = np.repeat(np.arange(population_size), mu)
    offspring[rows, flip.ravel()] ^= 1
    return offspring


def step_rbm(
    survivors: np.ndarray,
    population_size: int,
    config: RbmConfig,
    rng: np.random.Generator,
    model: Rbm | None = None,
) -> tuple[np.ndarray, Rbm]:
    """Train an RBM on the survivors and sample the entire next generation from it.

    Pass ``model`` to keep training one RBM across generations instead of
    fitting a fresh one.
    """
    if survivors.shape[0] < RBM_MIN_SURVIVORS:
        raise ValueError(
            f"{survivors.shape[0]} survivors; RBM reproduction requires >= {RBM_MIN_SURVIVORS}"
        )
    if model is None:
        model = Rbm(survivors.shape[1], config, rng)
    model.train(survivors, rng)
    offspring = model.generate(population_size, rng=rng)
    return offspring, model


def mean_expected_heterozygosity(pop: Population | np.ndarray) -> float:
    """Mean over loci of 1 - p^2 - q^2 for allele frequencies p, q = 1 - p."""
    genomes = pop.genomes if isinstance(pop, Population) else np.atleast_2d(pop)
    if genomes.shape[0] == 0:
        raise ValueError("population is empty")
    p = genomes.mean(axis=0)
    return float(np.mean(2.0 * p * (1.0 - p)))


def _fitness_at(fitness: FitnessFn, generation: int) -> FitnessFn:
    picker = getattr(fitness, "for_generation", None)
    return picker(generation) if picker is not None else fitness


def run_generation_loop(
    config: ModelConfig,
    hooks: Callable[[int, Population, dict], None] | None = None,
    rng: np.random.Generator | None = None,
) -> list[GenerationRecord]:
    """Run the full loop and return one record per generation (index 0 included).

    ``hooks(generation, population, context)`` fires after each generation's
    statistics are taken; for the RBM model the context carries the trained
    model and the survivors it was fitted on.
    """
    config.validate()
    if rng is None:
        rng = np.random.default_rng(config.seed)
    model = config.model
    fitness0 = _fitness_at(config.fitness, 0)
    pop = init_population(config.population_size, fitness0, rng)
    best_so_far = float(pop.fitnesses.max())
    records = [
        GenerationRecord(
            0, float(pop.fitnesses.mean()), best_so_far, mean_expected_heterozygosity(pop)
        )
    ]
    if hooks is not None:
        hooks(0, pop, {})
    rbm: Rbm | None = None
    for g in range(1, config.generations + 1):
        fitness = _fitness_at(config.fitness, g)
        context: dict = {}
        if isinstance(model, BrgModel):
            genomes = rng.integers(
                0, 2, size=(config.population_size, fitness.n), dtype=np.uint8
            )
        elif isinstance(model, RmModel):
            survivors = select_top(pop, model.survivors, rng)
            genomes = step_rm(survivors, config.population_size, model.mu, rng)
            context = {"survivors": survivors}
        else:
            survivors = select_top(pop, model.survivors, rng)
            reuse = rbm if model.persistence == "persistent" else None
            genomes, rbm = step_rbm(survivors, config.population_size, model.rbm, rng, reuse)
            context = {"survivors": survivors, "rbm": rbm}
        pop = Population(genomes, fitness.many(genomes))
        gen_best = float(pop.fitnesses.max())
        best_so_far = max(best_so_far, gen_best)
        records.append(
            GenerationRecord(
                g,
                float(pop.fitnesses.mean()),
                best_so_far if isinstance(model, BrgModel) else gen_best,
                mean_expected_heterozygosity(pop),
            )
        )
        if hooks is not None:
            hooks(g, pop, context)
    return records
