"""Synchronous cellular GA on a torus.

Each generation draws one randomness tape for the whole grid from a stream
keyed by ``(seed, generation)``; row ``c`` of the tape belongs to cell ``c``
(row-major).  Every cell reads only the previous generation, so the update
does not depend on the order cells are visited.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np

from .grid import GridShape, neighbor_table
from .qap import QapInstance, evaluate_many
from .selection import SelectionDraws, SelectionOperator, apply_selection, draw_selection
from .variation import crossover_batch, draw_crossover_positions, draw_mutation_positions, mutate_batch

log = logging.getLogger(__name__)

REPLACE_MODES = ("strict", "coin")
_SEED_MASK = (1 << 64) - 1


def generation_rng(seed: int, generation: int) -> np.random.Generator:
    """Independent stream for one generation of one run (generation 0 = init)."""
    ss = np.random.SeedSequence(int(seed) & _SEED_MASK, spawn_key=(int(generation),))
    return np.random.Generator(np.random.PCG64(ss))


@dataclass
class Population:
    shape: GridShape
    individuals: np.ndarray  # (rows * cols, n), row-major cells
    costs: np.ndarray  # (rows * cols,)

    @property
    def n(self) -> int:
        return self.individuals.shape[1]

    def grid(self) -> np.ndarray:
        """Individuals viewed as ``(rows, cols, n)``."""
        return self.individuals.reshape(self.shape.rows, self.shape.cols, self.n)

    def best(self) -> tuple[np.ndarray, int | float]:
        i = int(np.argmin(self.costs))
        return self.individuals[i].copy(), self.costs[i].item()

    def copy(self) -> Population:
        return Population(self.shape, self.individuals.copy(), self.costs.copy())


def init_population(rng: np.random.Generator, inst: QapInstance, shape: GridShape) -> Population:
    base = np.tile(np.arange(inst.n), (shape.size, 1))
    individuals = rng.permuted(base, axis=1)
    return Population(shape, individuals, evaluate_many(inst, individuals))


class StepTape(NamedTuple):
    """Pre-drawn randomness for one generation, one row per cell."""

    first: SelectionDraws
    second: SelectionDraws
    crossover: np.ndarray
    mutation: np.ndarray
    coin: np.ndarray

    def rows(self, idx) -> StepTape:
        return StepTape(self.first.rows(idx), self.second.rows(idx),
                        self.crossover[idx], self.mutation[idx], self.coin[idx])


def draw_tape(rng: np.random.Generator, sel: SelectionOperator, cells: int, n: int,
              distinct_mutation: bool = False) -> StepTape:
    return StepTape(
        draw_selection(rng, sel, cells),
        draw_selection(rng, sel, cells),
        draw_crossover_positions(rng, cells, n),
        draw_mutation_positions(rng, cells, n, distinct_mutation),
        rng.random(cells),
    )


def update_cells(pop: Population, inst: QapInstance, sel: SelectionOperator, tape: StepTape,
                 cells: np.ndarray, replace: str = "strict") -> tuple[np.ndarray, np.ndarray]:
    """New individuals and costs for `cells`, computed from `pop` only.

    `tape` must hold exactly one row per entry of `cells`.
    """
    neigh = neighbor_table(pop.shape)[cells]
    neigh_costs = pop.costs[neigh]
    rows = np.arange(len(cells))
    ga = neigh[rows, apply_selection(sel, tape.first, neigh_costs)]
    gb = neigh[rows, apply_selection(sel, tape.second, neigh_costs)]
    child, _ = crossover_batch(pop.individuals[ga], pop.individuals[gb], tape.crossover)
    child = mutate_batch(child, tape.mutation)
    child_cost = evaluate_many(inst, child)
    incumbent = pop.costs[cells]
    take = child_cost < incumbent
    if replace == "coin":
        take |= (child_cost == incumbent) & (tape.coin < 0.5)
    elif replace != "strict":
        raise ValueError(f"replace must be one of {REPLACE_MODES}, got {replace!r}")
    individuals = np.where(take[:, None], child, pop.individuals[cells])
    costs = np.where(take, child_cost, incumbent)
    return individuals, costs


def apply_tape(pop: Population, inst: QapInstance, sel: SelectionOperator, tape: StepTape,
               replace: str = "strict") -> Population:
    cells = np.arange(pop.shape.size)
    individuals, costs = update_cells(pop, inst, sel, tape, cells, replace)
    return Population(pop.shape, individuals, costs)


def step(rng: np.random.Generator, pop: Population, inst: QapInstance, sel: SelectionOperator,
         replace: str = "strict", distinct_mutation: bool = False) -> Population:
    """One synchronous generation: select twice, cross, mutate, keep the fitter."""
    tape = draw_tape(rng, sel, pop.shape.size, inst.n, distinct_mutation)
    return apply_tape(pop, inst, sel, tape, replace)


@dataclass(frozen=True)
class EngineConfig:
    instance: QapInstance
    shape: GridShape
    selection: SelectionOperator
    generations: int
    seed: int = 0
    replace: str = "strict"
    distinct_mutation: bool = False
    metric_every: int = 0
    snapshot_at: tuple[int, ...] = ()
    # crossover rate 1 and one mutation per child are fixed by the algorithm
    crossover_rate: float = field(default=1.0, init=False)
    mutations_per_individual: int = field(default=1, init=False)

    def __post_init__(self):
        if self.generations < 0:
            raise ValueError("generations must be >= 0")
        if self.replace not in REPLACE_MODES:
            raise ValueError(f"replace must be one of {REPLACE_MODES}")
        if self.metric_every < 0:
            raise ValueError("metric_every must be >= 0")


class MetricRow(NamedTuple):
    generation: int
    best_cost: int | float
    gD: float
    vD: float
    hD: float


@dataclass
class RunRecord:
    seed: int
    best_cost: int | float
    best_individual: np.ndarray
    generations: int
    series: list[MetricRow] = field(default_factory=list)
    snapshots: dict[int, np.ndarray] = field(default_factory=dict)


def run(config: EngineConfig, on_generation: Callable[[int, Population], None] | None = None) -> RunRecord:
    """Initialise a random grid and evolve it for ``config.generations`` steps.

    The best individual is tracked over the whole run; with elitist
    replacement it is also the best of the final grid.
    """
    from .measures import axis_diversity, global_diversity, local_diversity_snapshot

    inst, sel = config.instance, config.selection
    pop = init_population(generation_rng(config.seed, 0), inst, config.shape)
    best_ind, best_cost = pop.best()
    series: list[MetricRow] = []
    snapshots: dict[int, np.ndarray] = {}
    wanted = set(config.snapshot_at)

    def observe(g: int):
        if config.metric_every and g % config.metric_every == 0:
            v, h = axis_diversity(pop)
            series.append(MetricRow(g, best_cost, global_diversity(pop), v, h))
        if g in wanted:
            snapshots[g] = local_diversity_snapshot(pop)
        if on_generation is not None:
            on_generation(g, pop)

    observe(0)
    for g in range(1, config.generations + 1):
        pop = step(generation_rng(config.seed, g), pop, inst, sel,
                   config.replace, config.distinct_mutation)
        ind, cost = pop.best()
        if cost < best_cost:
            best_ind, best_cost = ind, cost
        observe(g)
    log.debug("run seed=%s finished: best %s", config.seed, best_cost)
    return RunRecord(config.seed, best_cost, best_ind, config.generations, series, snapshots)
