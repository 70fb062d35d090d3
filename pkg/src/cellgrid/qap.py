"""Quadratic assignment instances: QAPLIB parsing, evaluation, exhaustive oracle."""
from __future__ import annotations

import itertools
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

MAX_BRUTE_FORCE_N = 10


class QapParseError(ValueError):
    """Malformed QAPLIB text; the message names the line and column."""


@dataclass(frozen=True, eq=False)
class QapInstance:
    """Flow between facilities and distance between locations.

    A permutation ``p`` places facility ``i`` on location ``p[i]``.
    """

    dist: np.ndarray
    flow: np.ndarray
    name: str = ""
    n: int = field(init=False)

    def __post_init__(self):
        dist = _as_matrix(self.dist, "dist")
        flow = _as_matrix(self.flow, "flow")
        if dist.shape != flow.shape:
            raise ValueError(f"dist is {dist.shape} but flow is {flow.shape}")
        dist.setflags(write=False)
        flow.setflags(write=False)
        object.__setattr__(self, "dist", dist)
        object.__setattr__(self, "flow", flow)
        object.__setattr__(self, "n", dist.shape[0])

    def __eq__(self, other):
        if not isinstance(other, QapInstance):
            return NotImplemented
        return (
            self.name == other.name
            and np.array_equal(self.dist, other.dist)
            and np.array_equal(self.flow, other.flow)
        )

    __hash__ = None


def _as_matrix(values, label: str) -> np.ndarray:
    m = np.array(values)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] < 1:
        raise ValueError(f"{label} must be a non-empty square matrix, got shape {m.shape}")
    if m.dtype.kind in "iub":
        m = m.astype(np.int64)
    else:
        m = m.astype(np.float64)
        if not np.isfinite(m).all():
            raise ValueError(f"{label} has non-finite entries")
        if (m == np.round(m)).all():
            m = m.astype(np.int64)
    if (m < 0).any():
        raise ValueError(f"{label} has negative entries")
    return m


_TOKEN = re.compile(r"\S+")


def _tokens(text: str):
    for lineno, line in enumerate(text.splitlines(), start=1):
        for m in _TOKEN.finditer(line):
            yield m.group(), lineno, m.start() + 1


def _number(tok: str, lineno: int, col: int):
    try:
        return int(tok)
    except ValueError:
        pass
    try:
        value = float(tok)
    except ValueError:
        raise QapParseError(f"line {lineno}, column {col}: malformed token {tok!r}") from None
    if not math.isfinite(value):
        raise QapParseError(f"line {lineno}, column {col}: non-finite entry {tok!r}")
    return value


def parse_qaplib(text: str, name: str = "", swap_matrices: bool = False) -> QapInstance:
    """Parse QAPLIB text: ``n`` followed by two ``n x n`` matrices.

    The first matrix is the flow matrix and the second the distance matrix
    unless `swap_matrices` is set.
    """
    stream = _tokens(text)
    try:
        tok, lineno, col = next(stream)
    except StopIteration:
        raise QapParseError("line 1, column 1: empty input, expected problem size") from None
    n = _number(tok, lineno, col)
    if not isinstance(n, int) or n < 1:
        raise QapParseError(f"line {lineno}, column {col}: problem size must be a positive integer, got {tok!r}")

    matrices = []
    last = (lineno, col)
    for which in ("first", "second"):
        values = []
        for tok, lineno, col in itertools.islice(stream, n * n):
            v = _number(tok, lineno, col)
            if v < 0:
                raise QapParseError(f"line {lineno}, column {col}: negative entry {tok!r}")
            values.append(v)
            last = (lineno, col)
        if len(values) != n * n:
            raise QapParseError(
                f"line {last[0]}: expected {n * n} entries for {which} matrix, found {len(values)}"
            )
        matrices.append(np.array(values).reshape(n, n))
    extra = next(stream, None)
    if extra is not None:
        tok, lineno, col = extra
        raise QapParseError(f"line {lineno}, column {col}: trailing data {tok!r} after second matrix")

    flow, dist = matrices
    if swap_matrices:
        flow, dist = dist, flow
    return QapInstance(dist=dist, flow=flow, name=name)


def load_qaplib(path: str | Path, swap_matrices: bool = False) -> QapInstance:
    path = Path(path)
    try:
        return parse_qaplib(path.read_text(), name=path.stem, swap_matrices=swap_matrices)
    except QapParseError as exc:
        raise QapParseError(f"{path}: {exc}") from None


def serialize_qaplib(inst: QapInstance, swap_matrices: bool = False) -> str:
    """Write `inst` in the layout `parse_qaplib` reads back."""
    first, second = (inst.dist, inst.flow) if swap_matrices else (inst.flow, inst.dist)
    width = max(len(str(v)) for v in np.concatenate([first.ravel(), second.ravel()]))
    lines = [str(inst.n), ""]
    for m in (first, second):
        lines.extend(" ".join(str(v).rjust(width) for v in row) for row in m.tolist())
        lines.append("")
    return "\n".join(lines)


def _check_perm(inst: QapInstance, p: np.ndarray) -> None:
    if p.shape[-1] != inst.n:
        raise ValueError(f"permutation length {p.shape[-1]} does not match instance size {inst.n}")


def evaluate(inst: QapInstance, p) -> int | float:
    """Sum of ``dist[p[i], p[j]] * flow[i, j]`` over all ordered pairs, diagonal included."""
    p = np.asarray(p)
    if p.ndim != 1:
        raise ValueError("evaluate takes a single permutation; use evaluate_many for batches")
    _check_perm(inst, p)
    return (inst.dist[np.ix_(p, p)] * inst.flow).sum().item()


def evaluate_many(inst: QapInstance, perms: np.ndarray) -> np.ndarray:
    """Costs of a ``(m, n)`` batch of permutations."""
    perms = np.asarray(perms)
    _check_perm(inst, perms)
    gathered = inst.dist[perms[:, :, None], perms[:, None, :]]
    return np.einsum("mij,ij->m", gathered, inst.flow)


def brute_force_optimum(inst: QapInstance, chunk: int = 40320) -> tuple[np.ndarray, int | float]:
    """Enumerate all permutations; ties go to the lexicographically smallest one."""
    if inst.n > MAX_BRUTE_FORCE_N:
        raise ValueError(f"brute force refused for n={inst.n} > {MAX_BRUTE_FORCE_N}")
    best_cost = None
    best_perm = None
    # itertools.permutations yields lexicographic order, so the first strict minimum wins ties
    perms = itertools.permutations(range(inst.n))
    while True:
        block = np.array(list(itertools.islice(perms, chunk)), dtype=np.intp)
        if block.size == 0:
            break
        block = block.reshape(-1, inst.n)
        costs = evaluate_many(inst, block)
        i = int(np.argmin(costs))
        if best_cost is None or costs[i] < best_cost:
            best_cost, best_perm = costs[i].item(), block[i].copy()
    return best_perm, best_cost


def random_instance(rng: np.random.Generator, n: int, high: int = 10,
                    symmetric: bool = True, name: str | None = None) -> QapInstance:
    """Integer instance with entries in ``[0, high)`` and a zero diagonal."""

    def draw():
        m = rng.integers(0, high, size=(n, n))
        if symmetric:
            m = np.triu(m, 1)
            m = m + m.T
        np.fill_diagonal(m, 0)
        return m

    flow = draw()
    dist = draw()
    return QapInstance(dist=dist, flow=flow, name=name or f"rand{n}")
