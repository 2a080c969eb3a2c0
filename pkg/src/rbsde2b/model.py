"""Problem description types shared by every solver, plus input validation."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np


@dataclass(frozen=True)
class GeneratorSpec:
    """Driver ``g(t, y, z)`` with its declared Lipschitz constant ``mu``.

    ``g`` is called with a scalar ``t`` and numpy arrays ``y``, ``z`` and
    must work elementwise.
    """

    g: Callable
    mu: float

    def __call__(self, t, y, z):
        return self.g(t, y, z)


# --- barriers -------------------------------------------------------------

@dataclass(frozen=True)
class Functional:
    """Barrier given as a function of the current time and Brownian value."""

    f: Callable


@dataclass(frozen=True)
class ItoConstant:
    """``initial + drift * t + diffusion * B_t``."""

    initial: float
    drift: float
    diffusion: float


@dataclass(frozen=True)
class ItoGeneral:
    """Ito barrier with state dependent coefficients ``drift(t, x)``,
    ``diffusion(t, x)``. Path dependent on the lattice, so only the full-tree
    oracle accepts it."""

    initial: float
    drift: Callable
    diffusion: Callable


@dataclass(frozen=True)
class Absent:
    pass


BarrierSpec = Union[Functional, ItoConstant, ItoGeneral, Absent]


# --- terminal condition ---------------------------------------------------

@dataclass(frozen=True)
class Markovian:
    """Terminal value ``phi(B_T)``."""

    phi: Callable


@dataclass(frozen=True)
class PathFunctional:
    """Terminal value depending on the whole path.

    ``gamma`` receives an array of shape ``(m, n + 1)`` holding ``m`` walk
    paths ``B_0 .. B_n`` and returns ``m`` values.
    """

    gamma: Callable


TerminalSpec = Union[Markovian, PathFunctional]


@dataclass(frozen=True)
class Problem:
    horizon: float
    generator: GeneratorSpec
    terminal: TerminalSpec
    lower: BarrierSpec = field(default_factory=Absent)
    upper: BarrierSpec = field(default_factory=Absent)
    clamp_terminal: bool = False

    @property
    def is_markovian(self) -> bool:
        return (
            isinstance(self.terminal, Markovian)
            and not isinstance(self.lower, ItoGeneral)
            and not isinstance(self.upper, ItoGeneral)
        )


# --- schemes ---------------------------------------------------------------

@dataclass(frozen=True)
class ImplicitPenalization:
    p: float
    name = "implicit-pen"


@dataclass(frozen=True)
class ImplicitExplicitPenalization:
    p: float
    name = "impexp-pen"


@dataclass(frozen=True)
class ImplicitReflected:
    name = "implicit-reflected"


@dataclass(frozen=True)
class ExplicitReflected:
    name = "explicit-reflected"


SchemeKind = Union[
    ImplicitPenalization, ImplicitExplicitPenalization, ImplicitReflected, ExplicitReflected
]

SCHEME_NAMES = ("implicit-pen", "impexp-pen", "implicit-reflected", "explicit-reflected")


def make_scheme(name: str, p: float | None = None) -> SchemeKind:
    """Build a scheme from its CLI name."""
    if name == "implicit-reflected":
        return ImplicitReflected()
    if name == "explicit-reflected":
        return ExplicitReflected()
    if name in ("implicit-pen", "impexp-pen"):
        if p is None:
            raise ValueError(f"scheme {name} needs a penalization parameter p")
        cls = ImplicitPenalization if name == "implicit-pen" else ImplicitExplicitPenalization
        return cls(float(p))
    raise ValueError(f"unknown scheme {name!r}; expected one of {', '.join(SCHEME_NAMES)}")


def scheme_p(scheme: SchemeKind) -> float | None:
    return getattr(scheme, "p", None)


# --- validation ------------------------------------------------------------

@dataclass
class ValidationReport:
    errors: list = field(default_factory=list)
    warnings: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.errors

    def __str__(self):
        lines = [f"error: {e}" for e in self.errors]
        lines += [f"warning: {w}" for w in self.warnings]
        return "\n".join(lines)


def _probe_lipschitz(problem: Problem, report: ValidationReport, probes: int = 64):
    gen = problem.generator
    rng = np.random.default_rng(20240101)
    t = rng.uniform(0.0, problem.horizon, probes)
    y1, z1, y2, z2 = rng.uniform(-10.0, 10.0, (4, probes))
    worst = 0.0
    for i in range(probes):
        g1 = float(np.ravel(gen(t[i], np.array([y1[i]]), np.array([z1[i]])))[0])
        g2 = float(np.ravel(gen(t[i], np.array([y2[i]]), np.array([z2[i]])))[0])
        bound = gen.mu * (abs(y1[i] - y2[i]) + abs(z1[i] - z2[i]))
        worst = max(worst, abs(g1 - g2) - bound)
    if worst > 1e-9 * max(1.0, gen.mu):
        report.warnings.append(
            f"generator violates the declared Lipschitz bound mu={gen.mu} on random probes"
        )


def validate(problem: Problem, n: int, scheme: SchemeKind | None = None,
             oracle: bool = False) -> ValidationReport:
    """Check ``problem`` for a run with ``n`` steps. Never raises.

    ``oracle=True`` permits path-dependent terminals and general Ito
    barriers, which only the full-tree solver handles; their barrier
    ordering is then checked during the oracle sweep instead.
    """
    from .lattice import WalkGrid, barrier_layer, terminal_layer

    report = ValidationReport()
    T = problem.horizon
    if not T > 0:
        report.errors.append(f"horizon T must be positive, got {T}")
    if not (isinstance(n, (int, np.integer)) and n > 0):
        report.errors.append(f"n must be a positive integer, got {n}")
    p = scheme_p(scheme) if scheme is not None else None
    if p is not None and not p > 0:
        report.errors.append(f"penalization parameter p must be positive, got {p}")
    mu = problem.generator.mu
    if not mu >= 0:
        report.errors.append(f"Lipschitz constant mu must be nonnegative, got {mu}")
    if report.errors:
        return report

    delta = T / n
    if mu * delta >= 1:
        report.errors.append(
            f"mu*delta = {mu * delta:g} >= 1; the implicit step is not a contraction (increase n)"
        )
    elif delta * (1 + 2 * mu + 2 * mu * mu) >= 1:
        report.warnings.append(
            f"delta*(1+2mu+2mu^2) = {delta * (1 + 2 * mu + 2 * mu * mu):g} >= 1; "
            "a-priori estimates do not apply"
        )
    if not oracle:
        for side in ("lower", "upper"):
            if isinstance(getattr(problem, side), ItoGeneral):
                report.errors.append(
                    f"{side} barrier has state dependent Ito coefficients; "
                    "only the full-tree oracle supports it"
                )
        if isinstance(problem.terminal, PathFunctional):
            report.errors.append(
                "path functional terminal condition is only supported by the full-tree oracle"
            )

    try:
        _probe_lipschitz(problem, report)
    except Exception as exc:  # user callables may fail arbitrarily
        report.errors.append(f"generator evaluation failed: {exc}")

    node_barriers = not any(isinstance(b, ItoGeneral) for b in (problem.lower, problem.upper))
    if report.errors or not node_barriers:
        return report

    grid = WalkGrid(n, T)
    try:
        for j in range(n + 1):
            lo = barrier_layer(problem.lower, grid, j, "lower")
            up = barrier_layer(problem.upper, grid, j, "upper")
            bad = np.flatnonzero(lo > up)
            if bad.size:
                k = int(bad[0])
                report.errors.append(
                    f"lower barrier above upper barrier at node (j={j}, k={k}): "
                    f"L={float(lo[k])!r} > U={float(up[k])!r}"
                )
                return report
        if isinstance(problem.terminal, Markovian):
            xi = terminal_layer(problem.terminal, grid)
            outside = np.flatnonzero((xi < lo) | (xi > up))
            if outside.size:
                k = int(outside[0])
                what = "clamped to" if problem.clamp_terminal else "kept outside"
                report.warnings.append(
                    f"terminal value lies outside [L_T, U_T] at {outside.size} terminal node(s), "
                    f"first at k={k} (xi={float(xi[k])!r}); {what} the barriers"
                )
    except Exception as exc:
        report.errors.append(f"barrier or terminal evaluation failed: {exc}")
    return report
