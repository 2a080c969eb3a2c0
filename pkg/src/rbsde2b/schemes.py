"""Per-node backward kernels and the backward sweep over the lattice.

All four kernels accept numpy arrays in every node-valued field of
``StepInput`` and act elementwise, so one call handles a whole lattice
layer (or a whole layer of the full path tree in the oracle). Each
element's result depends only on that element's inputs.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .lattice import (
    NodeField,
    NodeIndex,
    WalkGrid,
    barrier_layer,
    cond_expectation,
    discretize_barrier,
    terminal_layer,
    z_from_children,
)
from .model import (
    ExplicitReflected,
    GeneratorSpec,
    ImplicitExplicitPenalization,
    ImplicitPenalization,
    ImplicitReflected,
    Problem,
    SchemeKind,
    ValidationReport,
    validate,
)

PICARD_RTOL = 1e-13
PICARD_MAX_ITER = 200


class NumericalError(ArithmeticError):
    """A kernel failed; ``index`` is the offending element, ``node`` is set by the sweep."""

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index
        self.node = None


class PicardError(NumericalError):
    def __init__(self, message, last, residual, index=None):
        super().__init__(message, index)
        self.last = last
        self.residual = residual


class ValidationError(ValueError):
    def __init__(self, report: ValidationReport):
        super().__init__("; ".join(report.errors))
        self.report = report


def picard_solve(fmap: Callable, guess, contraction: float, tol, max_iter: int = PICARD_MAX_ITER):
    """Fixed point of the contraction ``fmap`` by successive substitution.

    Works elementwise on arrays: an element is frozen at ``fmap(y)`` as soon
    as ``|fmap(y) - y| <= tol`` for it, so its result never depends on its
    neighbours. Raises PicardError after ``max_iter`` sweeps.
    """
    if not contraction < 1:
        raise ValueError(f"contraction modulus must be < 1, got {contraction}")
    scalar = np.ndim(guess) == 0
    y = np.array(guess, dtype=np.float64, ndmin=1)
    tol = np.broadcast_to(np.asarray(tol, dtype=np.float64), y.shape)
    active = np.ones(y.shape, dtype=bool)
    residual = np.full(y.shape, np.inf)
    for _ in range(max_iter):
        fy = np.asarray(fmap(y), dtype=np.float64)
        res = np.abs(fy - y)
        residual = np.where(active, res, residual)
        done = active & (res <= tol)
        y = np.where(active, fy, y)
        active &= ~done
        if not active.any():
            return float(y[0]) if scalar else y
    worst = int(np.argmax(np.where(active, residual, -np.inf)))
    raise PicardError(
        f"Picard iteration did not converge in {max_iter} steps (residual {residual[worst]:.3g})",
        last=y[worst], residual=residual[worst], index=worst,
    )


@dataclass(frozen=True)
class StepInput:
    t: float
    delta: float
    e_y: object
    z: object
    lower: object
    upper: object
    generator: GeneratorSpec
    p: float | None = None


@dataclass(frozen=True)
class StepOutput:
    y: np.ndarray
    a: np.ndarray
    k: np.ndarray


def _arrays(inp: StepInput):
    arrays = np.broadcast_arrays(
        *(np.asarray(v, dtype=np.float64) for v in (inp.e_y, inp.z, inp.lower, inp.upper))
    )
    return [np.atleast_1d(a) for a in arrays]


def _output(inp: StepInput, y, a, k) -> StepOutput:
    if np.ndim(inp.e_y) == 0 and all(np.ndim(v) == 0 for v in (inp.z, inp.lower, inp.upper)):
        return StepOutput(float(y[0]), float(a[0]), float(k[0]))
    return StepOutput(y, a, k)


def _g(inp: StepInput, y, z):
    return np.asarray(inp.generator(inp.t, y, z), dtype=np.float64)


def _barrier_gap(inp, E, z, bar, absent_value):
    """``E + g(t, bar, z) * delta - bar`` where the barrier is finite."""
    gap = np.full(E.shape, absent_value)
    m = np.isfinite(bar)
    if m.any():
        gap[m] = E[m] + _g(inp, bar[m], z[m]) * inp.delta - bar[m]
    return gap


def _tolerance(E):
    return PICARD_RTOL * np.maximum(1.0, np.abs(E))


def _solve_region(inp, E, z, mask, pull, shift, modulus):
    """Picard solve of ``y (1 + pull) = E + g(t, y, z) delta + shift`` on ``mask``."""
    idx = np.flatnonzero(mask)
    if idx.size == 0:
        return np.empty(0)
    Es, zs = E[idx], z[idx]
    sh = shift[idx] if np.ndim(shift) else shift

    def fmap(y):
        return (Es + _g(inp, y, zs) * inp.delta + sh) / (1.0 + pull)

    try:
        return picard_solve(fmap, Es, modulus, _tolerance(Es))
    except PicardError as exc:
        exc.index = int(idx[exc.index])
        raise


def _check_disjoint(lower_active, upper_active, L, U):
    both = np.flatnonzero(lower_active & upper_active & (L < U))
    if both.size:
        raise NumericalError(
            "both barriers active at a node with L < U (is mu*delta < 1?)", int(both[0])
        )


def step_explicit_reflected(inp: StepInput) -> StepOutput:
    E, z, L, U = _arrays(inp)
    c = E + _g(inp, E, z) * inp.delta
    a = np.maximum(L - c, 0.0)
    k = np.maximum(c - U, 0.0)
    y = np.minimum(np.maximum(c, L), U)
    return _output(inp, y, a, k)


def step_implicit_reflected(inp: StepInput) -> StepOutput:
    """Implicit reflected step.

    Which barrier (if any) is active is decided by the sign of
    ``E + g(t, L, z) delta - L`` and ``E + g(t, U, z) delta - U``; by
    monotonicity of ``y - g(t, y, z) delta`` this is the same as comparing
    the unconstrained implicit solution with L and U. The same two numbers
    give the pushes ``a`` and ``k``, also when ``L == U``.
    """
    E, z, L, U = _arrays(inp)
    gap_l = _barrier_gap(inp, E, z, L, np.inf)
    gap_u = _barrier_gap(inp, E, z, U, -np.inf)
    lower_active = gap_l < 0
    upper_active = gap_u > 0
    _check_disjoint(lower_active, upper_active, L, U)
    a = np.maximum(-gap_l, 0.0)
    k = np.maximum(gap_u, 0.0)
    y = np.where(lower_active, L, np.where(upper_active, U, E))
    equal = L == U
    y = np.where(equal, L, y)
    free = ~(lower_active | upper_active | equal)
    mu_delta = inp.generator.mu * inp.delta
    w = _solve_region(inp, E, z, free, 0.0, 0.0, mu_delta)
    y[free] = np.minimum(np.maximum(w, L[free]), U[free])
    return _output(inp, y, a, k)


def step_implicit_penalization(inp: StepInput) -> StepOutput:
    """Inverts ``y - g(t,y,z) delta - p delta (y-L)^- + p delta (y-U)^+ = E``.

    The region (below L, between, above U) is found from the sign of the
    map at L and U, then the region's own fixed-point equation is solved;
    the outer regions contract with modulus ``mu delta / (1 + p delta)``.
    """
    E, z, L, U = _arrays(inp)
    pd = inp.p * inp.delta
    gap_l = _barrier_gap(inp, E, z, L, np.inf)
    gap_u = _barrier_gap(inp, E, z, U, -np.inf)
    below = gap_l < 0
    above = gap_u > 0
    _check_disjoint(below, above, L, U)
    inside = ~(below | above)
    mu_delta = inp.generator.mu * inp.delta
    y = np.empty(E.shape)
    y[below] = _solve_region(inp, E, z, below, pd, pd * L, mu_delta / (1.0 + pd))
    y[above] = _solve_region(inp, E, z, above, pd, pd * U, mu_delta / (1.0 + pd))
    y[inside] = _solve_region(inp, E, z, inside, 0.0, 0.0, mu_delta)
    a = pd * np.maximum(L - y, 0.0)
    k = pd * np.maximum(y - U, 0.0)
    return _output(inp, y, a, k)


def step_impexp_penalization(inp: StepInput) -> StepOutput:
    E, z, L, U = _arrays(inp)
    pd = inp.p * inp.delta
    c = E + _g(inp, E, z) * inp.delta
    weight = pd / (1.0 + pd)
    a = weight * np.maximum(L - c, 0.0)
    k = weight * np.maximum(c - U, 0.0)
    y = c + a - k
    return _output(inp, y, a, k)


def step(scheme: SchemeKind, inp: StepInput) -> StepOutput:
    if isinstance(scheme, ExplicitReflected):
        return step_explicit_reflected(inp)
    if isinstance(scheme, ImplicitReflected):
        return step_implicit_reflected(inp)
    if isinstance(scheme, ImplicitPenalization):
        return step_implicit_penalization(inp)
    if isinstance(scheme, ImplicitExplicitPenalization):
        return step_impexp_penalization(inp)
    raise TypeError(f"unknown scheme {scheme!r}")


def generator_point(scheme: SchemeKind, y, e_y):
    """The ``y`` argument at which the scheme evaluates g in its dynamics."""
    if isinstance(scheme, (ImplicitReflected, ImplicitPenalization)):
        return y
    return e_y


@dataclass
class SolutionGrid:
    grid: WalkGrid
    scheme: SchemeKind
    y: NodeField
    z: NodeField
    a: NodeField
    k: NodeField
    lower: object
    upper: object
    full: bool = True

    @property
    def n(self):
        return self.grid.n


def root_value(sol: SolutionGrid) -> float:
    return float(sol.y.layer(0)[0])


def _check_layer(j, *arrays):
    for arr in arrays:
        bad = np.flatnonzero(~np.isfinite(arr))
        if bad.size:
            err = NumericalError(f"non-finite value at node (j={j}, k={int(bad[0])})", int(bad[0]))
            err.node = NodeIndex(j, int(bad[0]))
            raise err


def solve_backward(problem: Problem, n: int, scheme: SchemeKind, keep_grid: bool = True,
                   check: bool = True) -> SolutionGrid:
    """Run ``scheme`` backward from the terminal layer to the root.

    With ``keep_grid=False`` only the root layer is retained, which is all a
    convergence table needs.
    """
    if check:
        report = validate(problem, n, scheme)
        if not report.ok:
            raise ValidationError(report)
    grid = WalkGrid(n, problem.horizon)
    empty = [None] * (n + 1)
    ys, zs, as_, ks = list(empty), list(empty), list(empty), list(empty)

    y = terminal_layer(problem.terminal, grid)
    if problem.clamp_terminal:
        lo = barrier_layer(problem.lower, grid, n, "lower")
        up = barrier_layer(problem.upper, grid, n, "upper")
        y = np.minimum(np.maximum(y, lo), up)
    _check_layer(n, y)
    if keep_grid:
        ys[n] = y
    for j in range(n - 1, -1, -1):
        y_up, y_down = y[1:], y[:-1]
        inp = StepInput(
            t=grid.time(j),
            delta=grid.delta,
            e_y=cond_expectation(y_up, y_down),
            z=z_from_children(grid, y_up, y_down),
            lower=barrier_layer(problem.lower, grid, j, "lower"),
            upper=barrier_layer(problem.upper, grid, j, "upper"),
            generator=problem.generator,
            p=getattr(scheme, "p", None),
        )
        try:
            out = step(scheme, inp)
        except NumericalError as exc:
            if exc.index is not None:
                exc.node = NodeIndex(j, exc.index)
                exc.args = (f"{exc.args[0]} at node (j={j}, k={exc.index})",)
            raise
        _check_layer(j, out.y)
        y = out.y
        if keep_grid or j == 0:
            ys[j], zs[j], as_[j], ks[j] = out.y, inp.z, out.a, out.k

    if keep_grid:
        lower = discretize_barrier(problem.lower, grid, "lower")
        upper = discretize_barrier(problem.upper, grid, "upper")
    else:
        lower = upper = None
    return SolutionGrid(grid, scheme, NodeField(ys), NodeField(zs), NodeField(as_),
                        NodeField(ks), lower, upper, full=keep_grid)

