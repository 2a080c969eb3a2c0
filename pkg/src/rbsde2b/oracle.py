"""Brute-force solver on the full (non-recombining) binary tree of walk paths.

History ``m`` at step ``j`` is a bitmask over ``j`` coin flips: bit ``i`` set
means the ``(i+1)``-th move was up. Its two children at step ``j + 1`` are
``m`` (down) and ``m + 2**j`` (up), so a whole step is split as
``[:2**j]`` / ``[2**j:]``. The same kernels as the lattice solver are used;
what this checks is the recombination, not the kernel arithmetic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .lattice import WalkGrid, barrier_values, cond_expectation, z_from_children
from .model import ItoGeneral, Markovian, Problem, SchemeKind, ValidationReport, validate
from .schemes import NumericalError, StepInput, ValidationError, solve_backward, step

MAX_ORACLE_N = 25
MAX_COMPARE_N = 20
_CHUNK = 1 << 15


class OracleSizeError(ValueError):
    pass


@dataclass
class PathTree:
    grid: WalkGrid
    scheme: SchemeKind
    b: list
    lower: list
    upper: list
    y: list
    z: list
    a: list
    k: list

    @property
    def n(self):
        return self.grid.n

    def root_value(self) -> float:
        return float(self.y[0][0])


def _barrier_steps(spec, grid, b, side):
    if not isinstance(spec, ItoGeneral):
        return [barrier_values(spec, grid.time(j), b[j], side) for j in range(grid.n + 1)]
    levels = [np.full(1, float(spec.initial))]
    sd = grid.sqrt_delta
    for j in range(grid.n):
        t = grid.time(j)
        cur = levels[-1]
        drift = np.asarray(spec.drift(t, b[j]), dtype=np.float64) * grid.delta
        shock = np.asarray(spec.diffusion(t, b[j]), dtype=np.float64) * sd
        levels.append(np.concatenate([cur + drift - shock, cur + drift + shock]))
    return levels


def _terminal(problem, grid, b_last):
    spec = problem.terminal
    if isinstance(spec, Markovian):
        return np.broadcast_to(np.asarray(spec.phi(b_last), dtype=np.float64), b_last.shape).copy()
    n = grid.n
    out = np.empty(1 << n)
    steps = np.arange(n + 1)
    for start in range(0, 1 << n, _CHUNK):
        m = np.arange(start, min(start + _CHUNK, 1 << n), dtype=np.int64)
        bits = (m[:, None] >> np.arange(n)) & 1
        ups = np.concatenate([np.zeros((m.size, 1), dtype=np.int64), np.cumsum(bits, axis=1)], axis=1)
        paths = (2.0 * ups - steps) * grid.sqrt_delta
        out[m] = np.asarray(spec.gamma(paths), dtype=np.float64)
    return out


def solve_full_tree(problem: Problem, n: int, scheme: SchemeKind, check: bool = True) -> PathTree:
    """Solve on all ``2**n`` histories. Path-dependent inputs are allowed."""
    if n > MAX_ORACLE_N:
        raise OracleSizeError(f"n={n} exceeds the full-tree limit of {MAX_ORACLE_N}")
    if check:
        report = validate(problem, n, scheme, oracle=True)
        if not report.ok:
            raise ValidationError(report)
    grid = WalkGrid(n, problem.horizon)
    counts = [np.zeros(1, dtype=np.int64)]
    for j in range(n):
        counts.append(np.concatenate([counts[-1], counts[-1] + 1]))
    b = [(2.0 * counts[j] - j) * grid.sqrt_delta for j in range(n + 1)]
    lower = _barrier_steps(problem.lower, grid, b, "lower")
    upper = _barrier_steps(problem.upper, grid, b, "upper")
    for j in range(n + 1):
        bad = np.flatnonzero(lower[j] > upper[j])
        if bad.size:
            report = ValidationReport()
            report.errors.append(
                f"lower barrier above upper barrier at step {j}, history {int(bad[0])}"
            )
            raise ValidationError(report)

    y = _terminal(problem, grid, b[n])
    if problem.clamp_terminal:
        y = np.minimum(np.maximum(y, lower[n]), upper[n])
    ys, zs, as_, ks = [None] * (n + 1), [None] * n, [None] * n, [None] * n
    ys[n] = y
    for j in range(n - 1, -1, -1):
        half = 1 << j
        y_down, y_up = y[:half], y[half:]
        inp = StepInput(
            t=grid.time(j),
            delta=grid.delta,
            e_y=cond_expectation(y_up, y_down),
            z=z_from_children(grid, y_up, y_down),
            lower=lower[j],
            upper=upper[j],
            generator=problem.generator,
            p=getattr(scheme, "p", None),
        )
        try:
            out = step(scheme, inp)
        except NumericalError as exc:
            exc.args = (f"{exc.args[0]} at step {j}, history {exc.index}",)
            raise
        y = out.y
        ys[j], zs[j], as_[j], ks[j] = out.y, inp.z, out.a, out.k
    return PathTree(grid, scheme, b, lower, upper, ys, zs, as_, ks)


def compare_with_recombining(problem: Problem, n: int, scheme: SchemeKind) -> float:
    """Largest ``|full tree - lattice|`` over y, z, a, k and all histories."""
    if not problem.is_markovian:
        raise ValueError("comparison needs a Markovian terminal and node-function barriers")
    if n > MAX_COMPARE_N:
        raise OracleSizeError(f"n={n} exceeds the comparison limit of {MAX_COMPARE_N}")
    tree = solve_full_tree(problem, n, scheme)
    sol = solve_backward(problem, n, scheme)
    worst = 0.0
    counts = np.zeros(1, dtype=np.int64)
    for j in range(n + 1):
        fields = [("y", tree.y, sol.y)]
        if j < n:
            fields += [("z", tree.z, sol.z), ("a", tree.a, sol.a), ("k", tree.k, sol.k)]
        for _, full, lattice in fields:
            diff = np.abs(full[j] - lattice.layer(j)[counts])
            worst = max(worst, float(diff.max()))
        counts = np.concatenate([counts, counts + 1])
    return worst
