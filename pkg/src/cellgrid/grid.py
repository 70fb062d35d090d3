"""Toroidal grid topology and Von Neumann neighborhoods.

Neighborhood slots are always ordered (center, north, south, east, west);
the selection operators index probability vectors in that order.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple

import numpy as np

CENTER, NORTH, SOUTH, EAST, WEST = range(5)
SLOT_NAMES = ("C", "N", "S", "E", "W")


@dataclass(frozen=True)
class GridShape:
    rows: int
    cols: int

    def __post_init__(self):
        if int(self.rows) != self.rows or int(self.cols) != self.cols:
            raise ValueError(f"grid dimensions must be integers, got {self.rows}x{self.cols}")
        if self.rows < 1 or self.cols < 1:
            raise ValueError(f"grid dimensions must be positive, got {self.rows}x{self.cols}")

    @property
    def size(self) -> int:
        return self.rows * self.cols

    def transposed(self) -> GridShape:
        return GridShape(self.cols, self.rows)

    @classmethod
    def parse(cls, text: str) -> GridShape:
        """Parse ``"20x20"`` (or ``"20"`` for a square grid)."""
        parts = text.lower().split("x")
        if len(parts) == 1:
            parts = parts * 2
        if len(parts) != 2:
            raise ValueError(f"bad grid shape {text!r}")
        return cls(int(parts[0]), int(parts[1]))


class CellCoord(NamedTuple):
    row: int
    col: int


def wrap(shape: GridShape, row: int, col: int) -> CellCoord:
    return CellCoord(row % shape.rows, col % shape.cols)


def von_neumann(shape: GridShape, c: CellCoord | tuple[int, int]) -> tuple[CellCoord, ...]:
    """Return the radius-1 Manhattan neighborhood ``(C, N, S, E, W)`` of `c`.

    On grids thinner than 3 cells the torus folds neighbors onto each other and
    the returned tuple contains duplicates; they are kept on purpose.
    """
    r, k = c
    return (
        wrap(shape, r, k),
        wrap(shape, r - 1, k),
        wrap(shape, r + 1, k),
        wrap(shape, r, k + 1),
        wrap(shape, r, k - 1),
    )


def flat_index(shape: GridShape, c: CellCoord | tuple[int, int]) -> int:
    return (c[0] % shape.rows) * shape.cols + (c[1] % shape.cols)


@lru_cache(maxsize=64)
def _neighbor_table(rows: int, cols: int) -> np.ndarray:
    shape = GridShape(rows, cols)
    table = np.empty((shape.size, 5), dtype=np.intp)
    for r in range(rows):
        for k in range(cols):
            table[r * cols + k] = [flat_index(shape, x) for x in von_neumann(shape, (r, k))]
    table.setflags(write=False)
    return table


def neighbor_table(shape: GridShape) -> np.ndarray:
    """Row-major flat indices of every cell's neighborhood, shape ``(size, 5)``."""
    return _neighbor_table(shape.rows, shape.cols)


def reachable(shape: GridShape, start: CellCoord | tuple[int, int], slots) -> np.ndarray:
    """Cells a value at `start` can ever spread to when only `slots` may be drawn.

    A cell adopts a value by drawing a neighbor slot holding it, so spread runs
    against the slot direction: a value at x reaches y when y sees x through one
    of the allowed slots.
    """
    table = neighbor_table(shape)
    allowed = sorted(set(int(s) for s in slots))
    seen = np.zeros(shape.size, dtype=bool)
    seen[flat_index(shape, start)] = True
    while True:
        grown = seen | seen[table[:, allowed]].any(axis=1)
        if (grown == seen).all():
            return seen.reshape(shape.rows, shape.cols)
        seen = grown
