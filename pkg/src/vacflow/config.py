"""Run configuration in a line-oriented ``section.key = value`` format.

Lists are comma separated, matrix rows are separated by ``;``, ``none`` is
the null value and booleans are ``true``/``false``.  ``emit`` writes every
field so that ``parse(emit(cfg)) == cfg``.
"""
from __future__ import annotations

import dataclasses
import typing
from dataclasses import dataclass, field, fields
from typing import Optional

from .initdata import DensityFamily, VelocityFamily
from .regime import Params
from .solver import SolverConfig


class ConfigError(ValueError):
    pass


@dataclass
class ParamsSection:
    gamma: float = 2.0
    delta: float = 2.0
    alpha: float = 0.15625
    beta: float = -0.0625
    A: float = 1.0
    kappa: float = 0.4
    dim: int = 1
    viscosity_model: str = "standard"

    def build(self) -> Params:
        return Params(**dataclasses.asdict(self))


@dataclass
class GridSection:
    L: float = 16.0
    N: int = 512


@dataclass
class DensitySection:
    family: str = "gaussian"
    eps1: float = 1e-2
    sigma: float = 0.0
    support_radius: Optional[float] = None
    width: float = 1.0
    center: tuple = ()

    def build(self) -> DensityFamily:
        return DensityFamily(self.family, self.eps1, self.sigma, self.support_radius, self.width,
                             tuple(self.center))


@dataclass
class VelocitySection:
    A: tuple = ((1.0,),)
    b: tuple = ()
    eps2: float = 0.0
    direction: tuple = ()
    center: tuple = ()
    ell: float = 1.0
    kappa: float = 0.0
    normalize: bool = True
    background: str = "burgers"     # burgers | zero

    def build(self) -> VelocityFamily:
        return VelocityFamily(tuple(tuple(r) for r in self.A), tuple(self.b), self.eps2,
                              tuple(self.direction), tuple(self.center), self.ell, self.kappa,
                              self.normalize)


@dataclass
class PerturbationSection:
    """Initial w0 on top of the background: none | sine | bump."""
    kind: str = "none"
    amplitude: float = 0.0
    center: tuple = ()
    width: float = 1.0
    wavenumber: float = 1.0


@dataclass
class DiagnosticsSection:
    n: float = 2.5
    m: float = 3.0
    energy: bool = True
    residual: bool = False
    fit_t_min: float = 1.0
    fit_t_max: float = 1e300
    decay_slack: float = 0.5
    envelope: bool = False
    envelope_fit_fraction: float = 0.1
    halt_on_support: bool = True
    check_decay: bool = False


@dataclass
class BurgersSection:
    l_values: tuple = (2, 3)
    t_min: float = 1.0
    t_max: float = 100.0
    n_times: int = 25
    comoving: bool = True


@dataclass
class OdeSection:
    a: float = 2.0
    b: float = 2.0
    C1: float = 1.0
    C2: float = 0.0
    D1: float = 0.0
    D2: float = -2.0
    Z0: float = 0.5
    t_end: float = 100.0
    n_samples: int = 201
    rtol: float = 1e-12


@dataclass
class RstudySection:
    radii: tuple = (2.0, 4.0, 8.0)
    spread_tol: float = 0.1


@dataclass
class RunSection:
    experiment: str = "simulate"
    seed: int = 0
    D0: Optional[float] = None
    stamp: bool = True


@dataclass
class RunConfig:
    params: ParamsSection = field(default_factory=ParamsSection)
    grid: GridSection = field(default_factory=GridSection)
    density: DensitySection = field(default_factory=DensitySection)
    velocity: VelocitySection = field(default_factory=VelocitySection)
    perturbation: PerturbationSection = field(default_factory=PerturbationSection)
    solver: SolverConfig = field(default_factory=SolverConfig)
    diagnostics: DiagnosticsSection = field(default_factory=DiagnosticsSection)
    burgers: BurgersSection = field(default_factory=BurgersSection)
    ode: OdeSection = field(default_factory=OdeSection)
    rstudy: RstudySection = field(default_factory=RstudySection)
    run: RunSection = field(default_factory=RunSection)

    def check(self) -> None:
        """Cross-section consistency; raises ConfigError."""
        try:
            self.params.build()
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        R = self.density.support_radius
        if R is not None and 2 * R >= self.grid.L:
            raise ConfigError(f"cutoff radius {R} does not fit the half-width {self.grid.L}")
        A = self.velocity.A
        if len(A) != self.params.dim or any(len(r) != self.params.dim for r in A):
            raise ConfigError("velocity.A must be dim x dim")
        if self.velocity.background not in ("burgers", "zero"):
            raise ConfigError("velocity.background must be burgers or zero")
        if self.perturbation.kind not in ("none", "sine", "bump"):
            raise ConfigError("perturbation.kind must be none, sine or bump")


# --- value codec -------------------------------------------------------------------

def _fmt_scalar(v) -> str:
    if v is None:
        return "none"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _format(v) -> str:
    if isinstance(v, tuple):
        if v and isinstance(v[0], tuple):
            return "; ".join(", ".join(_fmt_scalar(x) for x in row) for row in v)
        return ", ".join(_fmt_scalar(x) for x in v)
    return _fmt_scalar(v)


def _scalar(text: str, kind):
    t = text.strip()
    if kind is bool:
        if t.lower() in ("true", "1", "yes"):
            return True
        if t.lower() in ("false", "0", "no"):
            return False
        raise ConfigError(f"not a boolean: {text!r}")
    if kind is int:
        return int(t)
    if kind is float:
        return float(t)
    return t


def _parse_value(text: str, hint, default):
    t = text.strip()
    origin = typing.get_origin(hint)
    args = typing.get_args(hint)
    if origin is typing.Union and type(None) in args:
        if t.lower() == "none":
            return None
        inner = [a for a in args if a is not type(None)][0]
        return _parse_value(t, inner, default)
    if hint is tuple or origin is tuple:
        if t == "":
            return ()
        if ";" in t or (default and isinstance(default[0], tuple)):
            return tuple(tuple(float(x) for x in row.split(",")) for row in t.split(";"))
        items = [x.strip() for x in t.split(",")]
        if default and isinstance(default[0], int) and not isinstance(default[0], bool):
            return tuple(int(x) for x in items)
        return tuple(float(x) for x in items)
    if hint in (bool, int, float, str):
        return _scalar(t, hint)
    return t


def emit(cfg: RunConfig) -> str:
    lines = []
    for sec in fields(cfg):
        obj = getattr(cfg, sec.name)
        for f in fields(obj):
            lines.append(f"{sec.name}.{f.name} = {_format(getattr(obj, f.name))}")
    return "\n".join(lines) + "\n"


def apply(cfg: RunConfig, key: str, value: str) -> None:
    try:
        sec, name = key.strip().split(".", 1)
    except ValueError:
        raise ConfigError(f"key {key!r} lacks a section") from None
    if not hasattr(cfg, sec):
        raise ConfigError(f"unknown section {sec!r}")
    obj = getattr(cfg, sec)
    hints = typing.get_type_hints(type(obj))
    if name not in hints:
        raise ConfigError(f"unknown key {key!r}")
    try:
        val = _parse_value(value, hints[name], getattr(obj, name))
    except ValueError as exc:
        raise ConfigError(f"{key}: {exc}") from exc
    if sec == "solver":
        try:
            setattr(cfg, sec, dataclasses.replace(obj, **{name: val}))
        except ValueError as exc:
            raise ConfigError(f"{key}: {exc}") from exc
    else:
        setattr(obj, name, val)


def parse(text: str, overrides=()) -> RunConfig:
    cfg = RunConfig()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, value = line.split("=", 1)
        apply(cfg, key, value)
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} must be key=value")
        key, value = item.split("=", 1)
        apply(cfg, key, value)
    return cfg


def load(path, overrides=()) -> RunConfig:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(str(exc)) from exc
    return parse(text, overrides)
