"""Trajectory sampling on a solved grid, convergence tables and CSV export."""

from __future__ import annotations

import csv
import io
import math
import os
import time
from dataclasses import dataclass, field

import numpy as np

from .lattice import b_value
from .model import Problem, scheme_p
from .schemes import SolutionGrid, root_value, solve_backward

PATH_HEADER = ["j", "t", "b", "y", "z", "A", "K"]
TABLE_HEADER = ["n", "scheme", "p", "y0", "seconds"]
GRID_HEADER = ["j", "up", "t", "b", "y", "z", "a", "k"]


def fmt(value) -> str:
    """Shortest round-trip decimal; empty for missing values."""
    if value is None:
        return ""
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    value = float(value)
    if math.isnan(value):
        return ""
    text = repr(value)
    return text[:-2] if text.endswith(".0") else text


@dataclass
class PathSample:
    """One walk path through a solved grid.

    ``z``, ``a`` and ``k`` have ``n`` entries (no step leaves the terminal
    layer); ``A`` and ``K`` are the running sums of ``a`` and ``k``, carried
    flat into the terminal time.
    """

    seed: int
    t: np.ndarray
    b: np.ndarray
    up: np.ndarray
    y: np.ndarray
    z: np.ndarray
    a: np.ndarray
    k: np.ndarray
    lower: np.ndarray
    upper: np.ndarray

    @property
    def A(self) -> np.ndarray:
        return np.cumsum(np.append(self.a, 0.0))

    @property
    def K(self) -> np.ndarray:
        return np.cumsum(np.append(self.k, 0.0))

    def rows(self):
        A, K = self.A, self.K
        n = self.y.size - 1
        for j in range(n + 1):
            z = self.z[j] if j < n else None
            yield [j, self.t[j], self.b[j], self.y[j], z, A[j], K[j]]


def coin_flips(seed: int, n: int) -> np.ndarray:
    """``n`` fair +-1 moves: the low bit of successive PCG64 outputs."""
    raw = np.random.Generator(np.random.PCG64(seed)).bit_generator.random_raw(n)
    return np.where(raw & 1, 1, -1).astype(np.int64)


def sample_path(sol: SolutionGrid, seed: int) -> PathSample:
    if not sol.full:
        raise ValueError("sampling needs the full solution grid (solve with keep_grid=True)")
    grid = sol.grid
    n = grid.n
    eps = coin_flips(seed, n)
    up = np.concatenate([[0], np.cumsum(eps == 1)])
    nodes = list(zip(range(n + 1), up.tolist()))

    def along(f, last=n):
        return np.array([f[node] for node in nodes[: last + 1]])

    return PathSample(
        seed=seed,
        t=np.array([grid.time(j) for j in range(n + 1)]),
        b=np.array([b_value(grid, node) for node in nodes]),
        up=up,
        y=along(sol.y),
        z=along(sol.z, n - 1),
        a=along(sol.a, n - 1),
        k=along(sol.k, n - 1),
        lower=along(sol.lower),
        upper=along(sol.upper),
    )


@dataclass
class TableRow:
    n: int
    scheme: str
    p: float | None
    y0: float
    seconds: float


@dataclass
class ConvergenceTable:
    rows: list = field(default_factory=list)

    def value(self, n, scheme_name, p=None) -> float:
        for row in self.rows:
            if row.n == n and row.scheme == scheme_name and row.p == p:
                return row.y0
        raise KeyError((n, scheme_name, p))


def convergence_table(problem: Problem, n_list, schemes) -> ConvergenceTable:
    table = ConvergenceTable()
    for n in n_list:
        for scheme in schemes:
            start = time.perf_counter()
            sol = solve_backward(problem, n, scheme, keep_grid=False)
            table.rows.append(TableRow(
                n, scheme.name, scheme_p(scheme), root_value(sol), time.perf_counter() - start
            ))
    return table


def _grid_rows(sol: SolutionGrid, layer=None):
    grid = sol.grid
    layers = range(grid.n + 1) if layer is None else [layer]
    for j in layers:
        for k in range(j + 1):
            node = (j, k)
            rest = [sol.z[node], sol.a[node], sol.k[node]] if j < grid.n else [None] * 3
            yield [j, k, grid.time(j), b_value(grid, node), sol.y[node], *rest]


def _write(destination, header, rows):
    def emit(fh):
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([v if isinstance(v, str) else fmt(v) for v in row])

    if isinstance(destination, (str, os.PathLike)):
        try:
            with open(destination, "w", encoding="utf-8", newline="") as fh:
                emit(fh)
        except OSError as exc:
            raise OSError(f"cannot write {os.fspath(destination)}: {exc.strerror or exc}") from exc
    else:
        emit(destination)


def write_csv(data, destination, layer=None):
    """Write a PathSample, ConvergenceTable or SolutionGrid as CSV.

    ``destination`` is a path or an open text stream. For a SolutionGrid,
    ``layer`` restricts the output to one time layer.
    """
    if isinstance(data, PathSample):
        _write(destination, PATH_HEADER, data.rows())
    elif isinstance(data, ConvergenceTable):
        rows = ([r.n, r.scheme, r.p, r.y0, r.seconds] for r in data.rows)
        _write(destination, TABLE_HEADER, rows)
    elif isinstance(data, SolutionGrid):
        if not data.full:
            raise ValueError("grid export needs the full solution grid")
        _write(destination, GRID_HEADER, _grid_rows(data, layer))
    else:
        raise TypeError(f"cannot write {type(data).__name__} as CSV")


def write_paths_csv(samples, destination):
    """Several samples in one file, distinguished by a leading ``path_id``."""
    rows = ([i, *row] for i, s in enumerate(samples) for row in s.rows())
    _write(destination, ["path_id", *PATH_HEADER], rows)


def to_csv_text(data, **kwargs) -> str:
    buf = io.StringIO()
    write_csv(data, buf, **kwargs)
    return buf.getvalue()
