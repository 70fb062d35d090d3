"""Neighborhood selection operators.

Every operator works on the five costs of a Von Neumann neighborhood (lower
is fitter) and returns the winning slot in ``(C, N, S, E, W)`` order.

Randomness is split from the decision: ``draw_selection`` produces a batch of
random numbers (one row per application) and ``apply_selection`` turns them
into slots. Row ``i`` of the result depends on row ``i`` of the draws only,
which is what lets the engine update cells in any order.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Union

import numpy as np

CENTER_PROBABILITY = 0.2


@dataclass(frozen=True)
class BinaryTournament:
    @property
    def label(self) -> str:
        return "binary"

    @property
    def parameter(self) -> float:
        return 0.0


@dataclass(frozen=True)
class StochasticTournament:
    """Binary tournament that keeps the worse candidate with probability `r`."""

    r: float

    def __post_init__(self):
        if not 0.0 <= self.r <= 1.0:
            raise ValueError(f"stochastic rate r must lie in [0, 1], got {self.r}")

    @property
    def label(self) -> str:
        return "stochastic"

    @property
    def parameter(self) -> float:
        return self.r


@dataclass(frozen=True)
class Anisotropic:
    """Tournament of `k` draws weighted towards north/south by `alpha`."""

    alpha: float
    k: int = 2

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"anisotropic degree alpha must lie in [0, 1], got {self.alpha}")
        if int(self.k) != self.k or not 1 <= self.k <= 5:
            raise ValueError(f"tournament size k must be an integer in [1, 5], got {self.k}")

    @property
    def label(self) -> str:
        return "anisotropic"

    @property
    def parameter(self) -> float:
        return self.alpha

    @property
    def probabilities(self) -> NeighborProbabilities:
        return anisotropic_probabilities(self.alpha)


SelectionOperator = Union[BinaryTournament, StochasticTournament, Anisotropic]


def make_selection(kind: str, param: float | None = None, k: int = 2) -> SelectionOperator:
    if kind == "binary":
        return BinaryTournament()
    if param is None:
        raise ValueError(f"{kind} selection needs a parameter")
    if kind == "stochastic":
        return StochasticTournament(float(param))
    if kind == "anisotropic":
        return Anisotropic(float(param), int(k))
    raise ValueError(f"unknown selection {kind!r}; expected binary, stochastic or anisotropic")


class NeighborProbabilities(NamedTuple):
    p_c: float
    p_n: float
    p_s: float
    p_e: float
    p_w: float

    def as_array(self) -> np.ndarray:
        return np.array(self, dtype=np.float64)

    def rotated(self) -> NeighborProbabilities:
        """Probabilities after turning the grid a quarter: N/S and E/W trade places."""
        return NeighborProbabilities(self.p_c, self.p_e, self.p_w, self.p_n, self.p_s)


def anisotropic_probabilities(alpha: float) -> NeighborProbabilities:
    """Per-slot draw probabilities for anisotropic degree `alpha`.

    ``0.4 * (1 + alpha)`` is the mass of the north/south pair together, so each
    of the two cells gets half of it; east/west likewise with ``1 - alpha``.
    """
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    pair = (1.0 - CENTER_PROBABILITY) / 2.0
    ns = pair * (1.0 + alpha)
    ew = pair * (1.0 - alpha)
    return NeighborProbabilities(CENTER_PROBABILITY, ns / 2, ns / 2, ew / 2, ew / 2)


class SelectionDraws(NamedTuple):
    """Random numbers consumed by `m` selection applications.

    ``slots`` holds the drawn neighborhood slots ``(m, k)``; ``keys`` are
    uniform tie-break keys of the same shape; ``u`` is the uniform deciding
    whether a stochastic tournament keeps the better candidate.
    """

    slots: np.ndarray
    keys: np.ndarray
    u: np.ndarray

    def rows(self, idx) -> SelectionDraws:
        return SelectionDraws(self.slots[idx], self.keys[idx], self.u[idx])


def _draw_slots(rng: np.random.Generator, probs: np.ndarray, size) -> np.ndarray:
    cdf = np.cumsum(probs)
    last = int(np.flatnonzero(probs > 0)[-1])
    cdf[last:] = 1.0
    slots = np.searchsorted(cdf, rng.random(size), side="right")
    return np.minimum(slots, last)


def draw_selection(rng: np.random.Generator, op: SelectionOperator, m: int) -> SelectionDraws:
    if isinstance(op, Anisotropic):
        slots = _draw_slots(rng, op.probabilities.as_array(), (m, op.k))
    else:
        slots = rng.integers(0, 5, size=(m, 2))
    keys = rng.random(slots.shape)
    u = rng.random(m)
    return SelectionDraws(slots, keys, u)


def _best_of_draws(costs: np.ndarray, draws: SelectionDraws) -> np.ndarray:
    rows = np.arange(costs.shape[0])[:, None]
    drawn = costs[rows, draws.slots]
    best = drawn.min(axis=1, keepdims=True)
    # uniform choice among drawn candidates sharing the best cost
    pick = np.where(drawn == best, draws.keys, np.inf).argmin(axis=1)
    return draws.slots[np.arange(costs.shape[0]), pick]


def apply_selection(op: SelectionOperator, draws: SelectionDraws, costs: np.ndarray) -> np.ndarray:
    """Winning slot of each row of the ``(m, 5)`` neighborhood cost array."""
    costs = np.asarray(costs)
    if isinstance(op, Anisotropic):
        return _best_of_draws(costs, draws)
    r = op.r if isinstance(op, StochasticTournament) else 0.0
    m = costs.shape[0]
    ia = np.arange(m)
    a, b = draws.slots[:, 0], draws.slots[:, 1]
    ca, cb = costs[ia, a], costs[ia, b]
    better = np.where(ca < cb, a, b)
    worse = np.where(ca < cb, b, a)
    chosen = np.where(draws.u < 1.0 - r, better, worse)
    tie = draws.keys[:, 0] < 0.5
    return np.where(ca == cb, np.where(tie, a, b), chosen)


def select(rng: np.random.Generator, op: SelectionOperator, costs: np.ndarray) -> np.ndarray:
    """Draw and apply in one go for an ``(m, 5)`` batch."""
    costs = np.asarray(costs)
    return apply_selection(op, draw_selection(rng, op, costs.shape[0]), costs)


def _single(rng, op, fitnesses) -> int:
    costs = np.asarray(fitnesses).reshape(1, 5)
    return int(select(rng, op, costs)[0])


def select_anisotropic(rng: np.random.Generator, probs: NeighborProbabilities | float,
                       k: int, fitnesses) -> int:
    """One anisotropic tournament. `probs` may also be given as the degree alpha."""
    if not isinstance(probs, NeighborProbabilities):
        probs = anisotropic_probabilities(float(probs))
    if int(k) != k or not 1 <= k <= 5:
        raise ValueError(f"k must be an integer in [1, 5], got {k}")
    p = np.asarray(probs, dtype=np.float64)
    costs = np.asarray(fitnesses).reshape(1, 5)
    slots = _draw_slots(rng, p, (1, int(k)))
    draws = SelectionDraws(slots, rng.random(slots.shape), rng.random(1))
    return int(_best_of_draws(costs, draws)[0])


def select_stochastic(rng: np.random.Generator, r: float, fitnesses) -> int:
    return _single(rng, StochasticTournament(r), fitnesses)


def select_binary(rng: np.random.Generator, fitnesses) -> int:
    return _single(rng, BinaryTournament(), fitnesses)
