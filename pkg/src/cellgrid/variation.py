"""Permutation-preserving crossover (extended UPMX) and swap mutation.

Batch versions operate row-wise on ``(m, n)`` integer arrays and take their
random positions as arguments so the engine can pre-draw them.
"""
from __future__ import annotations

import numpy as np


def crossover_steps(n: int) -> int:
    return max(1, n // 3)


def upmx_step(p1, p2, i: int) -> tuple[np.ndarray, np.ndarray]:
    """One exchange at position `i`, returning modified copies.

    With ``j`` the position of ``p1[i]`` in `p2` and ``k`` the position of
    ``p2[i]`` in `p1`, positions ``i, j`` are swapped in `p1` and ``i, k`` in `p2`.
    Afterwards ``p1'[j] == p2[j]`` and ``p2'[k] == p1[k]``.
    """
    a = np.array(p1, copy=True)
    b = np.array(p2, copy=True)
    j = int(np.flatnonzero(b == a[i])[0])
    k = int(np.flatnonzero(a == b[i])[0])
    a[[i, j]] = a[[j, i]]
    b[[i, k]] = b[[k, i]]
    return a, b


def inverse(perms: np.ndarray) -> np.ndarray:
    perms = np.asarray(perms)
    inv = np.empty_like(perms)
    rows = np.arange(perms.shape[0])[:, None]
    inv[rows, perms] = np.arange(perms.shape[1])
    return inv


def crossover_batch(p1: np.ndarray, p2: np.ndarray, positions: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Apply ``upmx_step`` at ``positions[:, s]`` for each step ``s`` in turn."""
    a = np.array(p1, copy=True)
    b = np.array(p2, copy=True)
    inv_a = inverse(a)
    inv_b = inverse(b)
    rows = np.arange(a.shape[0])
    for i in np.asarray(positions).T:
        va = a[rows, i]
        vb = b[rows, i]
        j = inv_b[rows, va]
        k = inv_a[rows, vb]
        aj = a[rows, j]
        a[rows, i] = aj
        a[rows, j] = va
        inv_a[rows, aj] = i
        inv_a[rows, va] = j
        bk = b[rows, k]
        b[rows, i] = bk
        b[rows, k] = vb
        inv_b[rows, bk] = i
        inv_b[rows, vb] = k
    return a, b


def draw_crossover_positions(rng: np.random.Generator, m: int, n: int) -> np.ndarray:
    return rng.integers(0, n, size=(m, crossover_steps(n)))


def crossover(rng: np.random.Generator, p1, p2) -> tuple[np.ndarray, np.ndarray]:
    p1 = np.asarray(p1)
    p2 = np.asarray(p2)
    if p1.shape != p2.shape or p1.ndim != 1 or p1.size < 1:
        raise ValueError("crossover needs two non-empty permutations of equal length")
    positions = draw_crossover_positions(rng, 1, p1.size)
    a, b = crossover_batch(p1[None], p2[None], positions)
    return a[0], b[0]


def draw_mutation_positions(rng: np.random.Generator, m: int, n: int, distinct: bool = False) -> np.ndarray:
    """Two swap positions per row; with `distinct` they never coincide (for n > 1)."""
    if not distinct or n < 2:
        return rng.integers(0, n, size=(m, 2))
    first = rng.integers(0, n, size=m)
    second = rng.integers(0, n - 1, size=m)
    second = second + (second >= first)
    return np.stack([first, second], axis=1)


def mutate_batch(perms: np.ndarray, positions: np.ndarray) -> np.ndarray:
    out = np.array(perms, copy=True)
    rows = np.arange(out.shape[0])
    i, j = positions[:, 0], positions[:, 1]
    vi = out[rows, i]
    out[rows, i] = out[rows, j]
    out[rows, j] = vi
    return out


def mutate(rng: np.random.Generator, p, distinct: bool = False, positions=None) -> np.ndarray:
    """Swap two positions of `p`; `positions` forces them instead of drawing."""
    p = np.asarray(p)
    if positions is None:
        positions = draw_mutation_positions(rng, 1, p.size, distinct)
    else:
        positions = np.asarray(positions).reshape(1, 2)
    return mutate_batch(p[None], positions)[0]
