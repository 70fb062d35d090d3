"""Selective-pressure and diversity measurements.

Distances between individuals are the fraction of positions at which two
permutations differ.  The global and axis diversities average that distance
over ordered cell pairs, self-pairs included.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np
from scipy import stats

from .engine import Population
from .grid import GridShape, neighbor_table, reachable
from .selection import Anisotropic, SelectionOperator, select

DEFAULT_CENSOR_CAP = 100_000

# ---------------------------------------------------------------- diversity


def distance(x, y) -> float:
    x, y = np.asarray(x), np.asarray(y)
    return float(np.mean(x != y))


def _grid_of(pop) -> np.ndarray:
    if isinstance(pop, Population):
        return pop.grid()
    g = np.asarray(pop)
    if g.ndim != 3:
        raise ValueError("expected a Population or a (rows, cols, n) array")
    return g


def _mean_pair_distance(groups: np.ndarray) -> np.ndarray:
    """Mean distance over all ordered pairs within each group of ``(G, M, n)``.

    Uses positional value counts: the ordered pairs agreeing at a position
    number the sum of squared counts of the values seen there.
    """
    g, m, n = groups.shape
    values = groups.max() + 1 if groups.size else 1
    offsets = (np.arange(g)[:, None, None] * n + np.arange(n)[None, None, :]) * values
    counts = np.bincount((offsets + groups).ravel(), minlength=g * n * values)
    agree = (counts.reshape(g, -1).astype(np.float64) ** 2).sum(axis=1)
    return 1.0 - agree / (m * m * n)


def global_diversity(pop) -> float:
    grid = _grid_of(pop)
    r, c, n = grid.shape
    return float(_mean_pair_distance(grid.reshape(1, r * c, n))[0])


def axis_diversity(pop) -> tuple[float, float]:
    """``(vD, hD)``: mean pair distance within rows and within columns respectively."""
    grid = _grid_of(pop)
    v = float(_mean_pair_distance(grid).mean())
    h = float(_mean_pair_distance(grid.transpose(1, 0, 2)).mean())
    return v, h


_PAIRS = np.array(list(itertools.combinations(range(5), 2)))


def local_diversity(pop) -> np.ndarray:
    """Mean distance over the 10 unordered pairs of each cell's neighborhood."""
    grid = _grid_of(pop)
    r, c, n = grid.shape
    flat = grid.reshape(r * c, n)
    neigh = flat[neighbor_table(GridShape(r, c))]  # (cells, 5, n)
    d = (neigh[:, _PAIRS[:, 0]] != neigh[:, _PAIRS[:, 1]]).mean(axis=2)
    return d.mean(axis=1).reshape(r, c)


def intensity(diversity) -> np.ndarray:
    """Grey level for a diversity in [0, 1]; 0 (black) is most diverse."""
    return np.rint(255.0 * (1.0 - np.asarray(diversity, dtype=np.float64))).astype(np.uint8)


def local_diversity_snapshot(pop) -> np.ndarray:
    return intensity(local_diversity(pop))


def pgm_bytes(image: np.ndarray) -> bytes:
    """Encode an 8-bit binary (P5) greymap."""
    image = np.asarray(image)
    if image.ndim != 2:
        raise ValueError("image must be 2-D")
    if image.dtype != np.uint8:
        if image.min() < 0 or image.max() > 255:
            raise ValueError("pixel values must lie in [0, 255]")
        image = image.astype(np.uint8)
    rows, cols = image.shape
    return f"P5\n{cols} {rows}\n255\n".encode("ascii") + np.ascontiguousarray(image).tobytes()


def write_pgm(path: str | Path, image: np.ndarray) -> Path:
    path = Path(path)
    path.write_bytes(pgm_bytes(image))
    return path


def read_pgm(path: str | Path) -> np.ndarray:
    data = Path(path).read_bytes()
    fields = []
    pos = 0
    while len(fields) < 4:
        while data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            pos = data.index(b"\n", pos) + 1
            continue
        end = pos
        while not data[end:end + 1].isspace():
            end += 1
        fields.append(data[pos:end])
        pos = end
    if fields[0] != b"P5":
        raise ValueError(f"{path}: not a binary PGM")
    cols, rows, maxval = (int(f) for f in fields[1:])
    if maxval != 255:
        raise ValueError(f"{path}: only 8-bit greymaps are supported")
    pixels = np.frombuffer(data[pos + 1:pos + 1 + rows * cols], dtype=np.uint8)
    return pixels.reshape(rows, cols)


# ----------------------------------------------------------------- takeover


@dataclass(frozen=True)
class TakeoverConfig:
    selection: SelectionOperator
    shape: GridShape = GridShape(20, 20)
    replications: int = 1000
    max_generations: int = DEFAULT_CENSOR_CAP
    unconditional: bool = False

    def __post_init__(self):
        if self.replications < 1:
            raise ValueError("replications must be >= 1")
        if self.max_generations < 0:
            raise ValueError("max_generations must be >= 0")


@dataclass
class TakeoverResult:
    times: np.ndarray  # generations to full colonisation, -1 when censored
    colonized: np.ndarray | None = None  # (generations + 1, replications) when recorded

    @property
    def censored(self) -> np.ndarray:
        return self.times < 0

    @property
    def n_censored(self) -> int:
        return int(self.censored.sum())

    @property
    def completed(self) -> np.ndarray:
        return self.times[self.times >= 0]

    @property
    def mean(self) -> float:
        done = self.completed
        return float(done.mean()) if done.size else math.nan

    @property
    def std(self) -> float:
        done = self.completed
        return float(done.std(ddof=1)) if done.size > 1 else math.nan

    @property
    def sem(self) -> float:
        done = self.completed
        return self.std / math.sqrt(done.size) if done.size > 1 else math.nan


def _drawable_slots(op: SelectionOperator) -> list[int]:
    if isinstance(op, Anisotropic):
        return [i for i, p in enumerate(op.probabilities) if p > 0]
    return list(range(5))


def takeover_time(rng: np.random.Generator, cfg: TakeoverConfig, record: bool = False) -> TakeoverResult:
    """Selection-only spread of a single best individual placed at cell (0, 0).

    Costs are 0 for copies of the best and 1 elsewhere. A cell adopts its
    tournament winner if the winner is strictly better, or on a fair coin if
    equal; with ``cfg.unconditional`` the winner always replaces it.
    Replications still incomplete at ``cfg.max_generations``, or that can
    provably never complete, are censored.
    """
    shape, reps = cfg.shape, cfg.replications
    cells = shape.size
    table = neighbor_table(shape)
    times = np.full(reps, -1, dtype=np.int64)
    costs = np.ones((reps, cells), dtype=np.int8)
    costs[:, 0] = 0
    history = [np.ones(reps, dtype=np.int64)] if record else None

    if cells == 1:
        times[:] = 0
        return TakeoverResult(times, np.array(history) if record else None)
    if not cfg.unconditional and not reachable(shape, (0, 0), _drawable_slots(cfg.selection)).all():
        # some cell never has a drawable path to the best: colonisation cannot finish
        return TakeoverResult(times, np.array(history) if record else None)

    active = np.arange(reps)
    for gen in range(1, cfg.max_generations + 1):
        sub = costs[active]
        neigh = sub[:, table].reshape(-1, 5)
        slot = select(rng, cfg.selection, neigh)
        winner = neigh[np.arange(neigh.shape[0]), slot]
        incumbent = sub.ravel()
        if cfg.unconditional:
            new = winner
        else:
            coin = rng.random(incumbent.shape) < 0.5
            take = (winner < incumbent) | ((winner == incumbent) & coin)
            new = np.where(take, winner, incumbent)
        new = new.reshape(len(active), cells)
        costs[active] = new
        best_count = (new == 0).sum(axis=1)
        if record:
            counts = history[-1].copy()
            counts[active] = best_count
            history.append(counts)
        full = best_count == cells
        times[active[full]] = gen
        # extinct replications (possible only with unconditional replacement) stay censored
        keep = ~full & (best_count > 0)
        active = active[keep]
        if active.size == 0:
            break
    return TakeoverResult(times, np.array(history) if record else None)


# -------------------------------------------------------------- statistics


def mean_std(values) -> tuple[float, float]:
    x = np.asarray(values, dtype=np.float64)
    if x.size == 0:
        return math.nan, math.nan
    return float(x.mean()), float(x.std(ddof=1)) if x.size > 1 else math.nan


class TTestResult(NamedTuple):
    t: float
    p: float
    df: float


def t_test(sample_a, sample_b, equal_var: bool = False, alternative: str = "two-sided") -> TTestResult:
    """Two-sample t-test, Welch by default (pooled variance with `equal_var`).

    `alternative` is ``"two-sided"``, ``"less"`` (mean of a below b) or
    ``"greater"``.
    """
    a = np.asarray(sample_a, dtype=np.float64)
    b = np.asarray(sample_b, dtype=np.float64)
    na, nb = a.size, b.size
    if na < 2 or nb < 2:
        raise ValueError("t-test needs at least two observations per sample")
    va, vb = a.var(ddof=1), b.var(ddof=1)
    if va == 0 and vb == 0:
        raise ValueError("t-test undefined: both samples have zero variance")
    diff = a.mean() - b.mean()
    if equal_var:
        df = na + nb - 2.0
        pooled = ((na - 1) * va + (nb - 1) * vb) / df
        se = math.sqrt(pooled * (1.0 / na + 1.0 / nb))
    else:
        qa, qb = va / na, vb / nb
        se = math.sqrt(qa + qb)
        df = (qa + qb) ** 2 / (qa**2 / (na - 1) + qb**2 / (nb - 1))
    t = diff / se
    if alternative == "two-sided":
        p = 2.0 * stats.t.sf(abs(t), df)
    elif alternative == "less":
        p = stats.t.cdf(t, df)
    elif alternative == "greater":
        p = stats.t.sf(t, df)
    else:
        raise ValueError(f"unknown alternative {alternative!r}")
    return TTestResult(float(t), float(min(1.0, p)), float(df))
