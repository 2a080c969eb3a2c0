"""Recombining binomial lattice for the scaled random walk.

Node ``(j, k)`` sits at time ``t_j = j * delta`` after ``k`` up-moves out of
``j``; its walk value is ``(2k - j) * sqrt(delta)``. The up-child of
``(j, k)`` is ``(j + 1, k + 1)`` and the down-child is ``(j + 1, k)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .model import Absent, BarrierSpec, Functional, ItoConstant, ItoGeneral, Markovian


class UnsupportedInRecombiningMode(ValueError):
    pass


@dataclass(frozen=True)
class WalkGrid:
    n: int
    T: float

    def __post_init__(self):
        if self.n <= 0:
            raise ValueError("n must be positive")
        if not self.T > 0:
            raise ValueError("T must be positive")

    @property
    def delta(self) -> float:
        return self.T / self.n

    @property
    def sqrt_delta(self) -> float:
        return math.sqrt(self.delta)

    def time(self, j: int) -> float:
        return j * self.delta

    def b_layer(self, j: int) -> np.ndarray:
        """Walk values of every node in layer ``j``, ordered by ``k``."""
        return (2.0 * np.arange(j + 1) - j) * self.sqrt_delta


class NodeIndex(NamedTuple):
    j: int
    k: int


class NodeField:
    """One value per lattice node, stored layer by layer."""

    def __init__(self, layers):
        self.layers = list(layers)

    def __getitem__(self, node):
        j, k = node
        if not 0 <= k <= j:
            raise IndexError(f"node {tuple(node)} outside layer {j}")
        return float(self.layers[j][k])

    def layer(self, j: int) -> np.ndarray:
        return self.layers[j]

    def __len__(self):
        return len(self.layers)


class AbsentField:
    """Stand-in for a missing barrier: constant -inf (lower) or +inf (upper)."""

    def __init__(self, sign: float):
        self.value = math.copysign(math.inf, sign)

    def __getitem__(self, node):
        return self.value

    def layer(self, j: int) -> np.ndarray:
        return np.full(j + 1, self.value)


def b_value(grid: WalkGrid, node) -> float:
    j, k = node
    if not (0 <= j <= grid.n and 0 <= k <= j):
        raise IndexError(f"node {tuple(node)} outside a grid with n={grid.n}")
    return (2.0 * k - j) * grid.sqrt_delta


def cond_expectation(y_up, y_down):
    """``E[y_{j+1} | G_j]`` for a fair coin."""
    return 0.5 * (y_up + y_down)


def z_from_children(grid: WalkGrid, y_up, y_down):
    return (y_up - y_down) / (2.0 * grid.sqrt_delta)


def _side_sign(side: str) -> float:
    if side not in ("lower", "upper"):
        raise ValueError(f"side must be 'lower' or 'upper', got {side!r}")
    return -1.0 if side == "lower" else 1.0


def barrier_values(spec: BarrierSpec, t: float, b, side: str = "lower") -> np.ndarray:
    """Barrier evaluated at time ``t`` and walk values ``b`` (node-function forms)."""
    b = np.asarray(b, dtype=np.float64)
    if isinstance(spec, Absent):
        return np.full(b.shape, math.copysign(math.inf, _side_sign(side)))
    if isinstance(spec, Functional):
        return np.broadcast_to(np.asarray(spec.f(t, b), dtype=np.float64), b.shape).copy()
    if isinstance(spec, ItoConstant):
        return spec.initial + spec.drift * t + spec.diffusion * b
    if isinstance(spec, ItoGeneral):
        raise UnsupportedInRecombiningMode(
            "state dependent Ito barrier is path dependent; use the full-tree oracle"
        )
    raise TypeError(f"not a barrier spec: {spec!r}")


def barrier_layer(spec: BarrierSpec, grid: WalkGrid, j: int, side: str = "lower") -> np.ndarray:
    return barrier_values(spec, grid.time(j), grid.b_layer(j), side)


def discretize_barrier(spec: BarrierSpec, grid: WalkGrid, side: str = "lower"):
    """Barrier on every node; an AbsentField sentinel when ``spec`` is Absent."""
    sign = _side_sign(side)
    if isinstance(spec, Absent):
        return AbsentField(sign)
    return NodeField(barrier_layer(spec, grid, j, side) for j in range(grid.n + 1))


def terminal_layer(spec, grid: WalkGrid) -> np.ndarray:
    if not isinstance(spec, Markovian):
        raise UnsupportedInRecombiningMode(
            "path functional terminal condition needs the full-tree oracle"
        )
    b = grid.b_layer(grid.n)
    return np.broadcast_to(np.asarray(spec.phi(b), dtype=np.float64), b.shape).copy()


discretize_terminal = terminal_layer
