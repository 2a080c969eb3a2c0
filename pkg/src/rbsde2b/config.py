"""JSON run configs (schema version 1) and the bundled presets.

Example::

    {
      "version": 1,
      "horizon": 1.0,
      "mu": 5.0,
      "generator": "-5*abs(y+z)-1",
      "terminal": "abs(x)",
      "lower": {"kind": "functional", "expr": "-3*(x-2)^2+3"},
      "upper": {"kind": "ito", "initial": 0.5, "drift": 3, "diffusion": 0},
      "clamp_terminal": false,
      "defaults": {"n": 400, "scheme": "explicit-reflected", "p": null}
    }

Barrier blocks are ``null`` / ``{"kind": "absent"}``, ``functional`` with an
expression in ``t, x``, or ``ito`` whose ``drift`` and ``diffusion`` are
numbers (constant coefficients) or expressions in ``t, x`` (state dependent,
full-tree oracle only).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .expr import Compiled
from .model import (
    Absent,
    Functional,
    GeneratorSpec,
    ItoConstant,
    ItoGeneral,
    Markovian,
    Problem,
    make_scheme,
)

SCHEMA_VERSION = 1
PRESETS = ("table5", "fig1", "martingale", "one-barrier-lower", "classical")


class ConfigError(ValueError):
    pass


class ExprFunction:
    """Adapter giving a compiled expression a positional signature."""

    def __init__(self, source, params):
        self.params = tuple(params)
        self.expr = Compiled(source, set(self.params))

    def __call__(self, *args):
        out = self.expr(**dict(zip(self.params, args)))
        shape = np.broadcast_shapes(*(np.shape(a) for a in args))
        return np.broadcast_to(out, shape) if shape else out

    def __repr__(self):
        return f"<{self.expr.source!r} of ({', '.join(self.params)})>"


@dataclass
class RunConfig:
    horizon: float
    mu: float
    generator: str
    terminal: str
    lower: dict | None = None
    upper: dict | None = None
    clamp_terminal: bool = False
    defaults: dict = field(default_factory=dict)
    source: str = "<memory>"

    def problem(self) -> Problem:
        try:
            return Problem(
                horizon=float(self.horizon),
                generator=GeneratorSpec(ExprFunction(self.generator, "tyz"), float(self.mu)),
                terminal=Markovian(ExprFunction(self.terminal, "x")),
                lower=_barrier(self.lower, "lower"),
                upper=_barrier(self.upper, "upper"),
                clamp_terminal=bool(self.clamp_terminal),
            )
        except ValueError as exc:
            raise ConfigError(f"{self.source}: {exc}") from exc

    def scheme(self, name=None, p=None):
        name = name or self.defaults.get("scheme", "explicit-reflected")
        if p is None:
            p = self.defaults.get("p")
        return make_scheme(name, p)

    @property
    def n(self) -> int:
        return int(self.defaults.get("n", 400))


def _barrier(block, side):
    if block is None:
        return Absent()
    kind = block.get("kind")
    if kind == "absent":
        return Absent()
    if kind == "functional":
        return Functional(ExprFunction(block["expr"], "tx"))
    if kind == "ito":
        drift, diffusion = block.get("drift", 0.0), block.get("diffusion", 0.0)
        initial = float(block["initial"])
        if isinstance(drift, str) or isinstance(diffusion, str):
            return ItoGeneral(initial, ExprFunction(str(drift), "tx"), ExprFunction(str(diffusion), "tx"))
        return ItoConstant(initial, float(drift), float(diffusion))
    raise ConfigError(f"{side} barrier: unknown kind {kind!r}")


def from_dict(data: dict, source: str = "<memory>") -> RunConfig:
    if data.get("version") != SCHEMA_VERSION:
        raise ConfigError(f"{source}: unsupported config version {data.get('version')!r}")
    try:
        return RunConfig(
            horizon=data["horizon"],
            mu=data["mu"],
            generator=data["generator"],
            terminal=data["terminal"],
            lower=data.get("lower"),
            upper=data.get("upper"),
            clamp_terminal=data.get("clamp_terminal", False),
            defaults=data.get("defaults", {}),
            source=source,
        )
    except KeyError as exc:
        raise ConfigError(f"{source}: missing field {exc.args[0]!r}") from exc


def preset_path(name: str):
    return resources.files("rbsde2b") / "presets" / f"{name}.json"


def load_config(ref: str) -> RunConfig:
    """Load a config file, or a bundled preset by name (``table5`` or ``table5.json``)."""
    path = Path(ref)
    if path.is_file():
        text, source = path.read_text(encoding="utf-8"), str(path)
    else:
        name = path.name[:-5] if path.name.endswith(".json") else path.name
        if name not in PRESETS:
            raise ConfigError(f"no such config file or preset: {ref}")
        text, source = preset_path(name).read_text(encoding="utf-8"), f"preset {name}"
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{source}: invalid JSON: {exc}") from exc
    return from_dict(data, source)
