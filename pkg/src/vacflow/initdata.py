"""Initial density and velocity families, cutoffs and conversion to (varphi, phi, w)."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .burgers import InitialVelocity, _batch_last, kappa_distance_field
from .fields import Field, Grid, sobolev_array
from .regime import Params

FAMILIES = ("inverse_power", "bump_power", "gaussian", "anisotropic_power")
UNDERFLOW = 1e-300


class ConstraintViolated(ValueError):
    pass


class SupportExceedsBox(ValueError):
    pass


class NegativeDensity(ValueError):
    pass


def _sigma_floor(family: str, gamma: float, delta: float) -> Optional[float]:
    mx = max(1.0 / (delta - 1.0), 1.0 / (gamma - 1.0))
    return {"inverse_power": 1.5 * mx, "bump_power": 3.0 * mx,
            "anisotropic_power": 1.5 * mx + 0.5}.get(family)


@dataclass(frozen=True)
class DensityFamily:
    """One of the four example densities.

    inverse_power      eps1 / (1 + |x|)^(2 sigma)
    bump_power         eps1 * g(x)^(2 sigma), g = max(0, 1 - |x - c|^2 / width^2)
    gaussian           eps1 * exp(-|x - c|^2 / width^2)
    anisotropic_power  eps1 |x| / (1 + |x|)^(2 sigma)
    """
    family: str
    eps1: float
    sigma: float = 0.0
    support_radius: Optional[float] = None
    width: float = 1.0
    center: Sequence[float] = ()

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConstraintViolated(f"unknown density family {self.family!r}")
        if not self.eps1 > 0:
            raise ConstraintViolated("eps1 > 0")
        if not self.width > 0:
            raise ConstraintViolated("width > 0")

    def check(self, params: Params) -> None:
        floor = _sigma_floor(self.family, params.gamma, params.delta)
        if floor is not None and not self.sigma > floor:
            raise ConstraintViolated(f"{self.family}: sigma = {self.sigma} must exceed {floor}")

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        d = x.shape[0]
        c = np.zeros(d) if len(self.center) == 0 else np.asarray(self.center, dtype=float)
        if c.shape != (d,):
            raise ConstraintViolated(f"center needs {d} components")
        y = x - c.reshape((d,) + (1,) * (x.ndim - 1))
        r = np.sqrt(np.sum(y**2, axis=0))
        if self.family == "inverse_power":
            return self.eps1 * (1 + r) ** (-2 * self.sigma)
        if self.family == "gaussian":
            return self.eps1 * np.exp(-(r / self.width) ** 2)
        if self.family == "anisotropic_power":
            return self.eps1 * r * (1 + r) ** (-2 * self.sigma)
        g = np.maximum(0.0, 1.0 - (r / self.width) ** 2)
        return self.eps1 * g ** (2 * self.sigma)


def transition(s: np.ndarray) -> np.ndarray:
    """Smooth F with F = 1 on s <= 1 and F = 0 on s >= 2."""
    s = np.asarray(s, dtype=float)

    def g(z):
        out = np.zeros_like(z)
        pos = z > 0
        out[pos] = np.exp(-1.0 / z[pos])
        return out

    a, b = g(2.0 - s), g(s - 1.0)
    return a / (a + b)


def cutoff(f: Field, R: float, N_outer: Optional[int] = None) -> Field:
    """Multiply by F(|x|/R).  ``N_outer`` is accepted for interface parity and unused."""
    grid = f.grid
    if not R > 0:
        raise ValueError("R > 0")
    if 2 * R >= grid.L:
        raise SupportExceedsBox(f"2R = {2 * R} does not fit in the half-width {grid.L}")
    F = transition(grid.radius / R)
    vals = f.values * F if f.rank == "scalar" else f.values * F[None]
    return Field(grid, f.rank, vals)


def build_density(family: DensityFamily, grid: Grid, params: Optional[Params] = None) -> Field:
    if params is not None:
        family.check(params)
    rho = family.evaluate(grid.coords)
    f = Field.scalar(grid, rho)
    if family.support_radius is not None:
        f = cutoff(f, family.support_radius)
    return f


@dataclass(frozen=True)
class VelocityFamily:
    """u0 = A x + b + eps2 * v * exp(-|x - c|^2 / ell^2)."""
    A: Sequence
    b: Sequence[float] = ()
    eps2: float = 0.0
    direction: Sequence[float] = ()
    center: Sequence[float] = ()
    ell: float = 1.0
    kappa: float = 0.0
    normalize: bool = True

    def matrix(self) -> np.ndarray:
        return np.atleast_2d(np.asarray(self.A, dtype=float))

    def initial_velocity(self) -> InitialVelocity:
        A = self.matrix()
        d = A.shape[0]
        b = np.zeros(d) if len(self.b) == 0 else np.asarray(self.b, dtype=float)
        v = np.ones(d) if len(self.direction) == 0 else np.asarray(self.direction, dtype=float)
        c = np.zeros(d) if len(self.center) == 0 else np.asarray(self.center, dtype=float)
        eps, ell = float(self.eps2), float(self.ell)
        ex = lambda a, x: a.reshape(a.shape + (1,) * (x.ndim - 1))

        def bump(x):
            y = x - ex(c, x)
            return y, np.exp(-np.sum(y**2, axis=0) / ell**2)

        def u0(x):
            y, g = bump(x)
            return np.tensordot(A, x, axes=(1, 0)) + ex(b, x) + eps * ex(v, x) * g

        def grad(x):
            y, g = bump(x)
            out = np.broadcast_to(ex(A, x), (d, d) + x.shape[1:]).copy()
            out += eps * ex(v, x)[:, None] * (-2.0 * y / ell**2)[None] * g
            return out

        def hess(x):
            y, g = bump(x)
            yy = np.einsum("j...,k...->jk...", y, y)
            eye = ex(np.eye(d), x)
            inner = (4.0 * yy / ell**4 - 2.0 * eye / ell**2) * g
            return eps * ex(v, x)[:, None, None] * inner[None]

        init = InitialVelocity(d, u0, grad, hess, self.kappa)
        return init.normalized() if self.normalize else init


def build_velocity(family: VelocityFamily, grid: Grid, check_gap: bool = True):
    """(u0 sampled on the grid, analytic evaluators)."""
    init = family.initial_velocity()
    if init.dim != grid.dim:
        raise ConstraintViolated("velocity dimension differs from grid dimension")
    A = family.matrix()
    lam = np.linalg.eigvals(A)
    if check_gap and family.kappa > 0 and np.any(lam.real <= 2 * family.kappa) :
        raise ConstraintViolated(f"eigenvalues of A must exceed 2 kappa = {2 * family.kappa}")
    x = grid.coords
    if check_gap and family.kappa > 0:
        dist = kappa_distance_field(init.grad_u0(x))
        bad = np.argmin(dist)
        if dist.reshape(-1)[bad] < family.kappa:
            pt = x.reshape(grid.dim, -1)[:, bad]
            raise ConstraintViolated(f"spectrum gap {dist.reshape(-1)[bad]:.3g} < kappa at x = {pt.tolist()}")
    return Field.vector(grid, init.u0(x)), init


def frac_power(a: np.ndarray, p: float) -> np.ndarray:
    """a^p with 0^p = 0, evaluated as exp(p log a) above the underflow floor."""
    out = np.zeros_like(a, dtype=float)
    pos = a > UNDERFLOW
    out[pos] = np.exp(p * np.log(a[pos]))
    return out


def phi_scale(params: Params) -> float:
    return math.sqrt(4.0 * params.A * params.gamma / (params.gamma - 1.0) ** 2)


@dataclass(frozen=True)
class ReformInit:
    varphi0: Field
    phi0: Field
    w0: Field
    rho0: Field = field(repr=False, default=None)


def to_reform(rho0: Field, params: Params, w0: Optional[Field] = None) -> ReformInit:
    """varphi0 = rho0^((delta-1)/2), phi0 = c rho0^((gamma-1)/2), w0 = 0 unless supplied."""
    rho = rho0.values
    if np.any(rho < 0):
        raise NegativeDensity(f"min rho0 = {float(rho.min()):.3e}")
    g = rho0.grid
    varphi = frac_power(rho, (params.delta - 1) / 2)
    phi = phi_scale(params) * frac_power(rho, (params.gamma - 1) / 2)
    w = Field.vector(g, g.zeros("vector")) if w0 is None else w0
    return ReformInit(Field.scalar(g, varphi), Field.scalar(g, phi), w, rho0)


def density_from_phi(phi: np.ndarray, params: Params) -> np.ndarray:
    pref = ((params.gamma - 1) ** 2 / (4 * params.A * params.gamma)) ** (1 / (params.gamma - 1))
    return pref * frac_power(phi, 2 / (params.gamma - 1))


def density_from_varphi(varphi: np.ndarray, params: Params) -> np.ndarray:
    return frac_power(varphi, 2 / (params.delta - 1))


@dataclass(frozen=True)
class SmallnessReport:
    phi_h3: float
    varphi_h3: float
    total: float
    D0: float
    ok: bool
    varphi_binding: bool

    def to_text(self) -> str:
        return "\n".join(f"{k} = {v}" for k, v in self.__dict__.items())


def smallness_report(init: ReformInit, D0: float, params: Params, holds_P2: bool = False) -> SmallnessReport:
    """H^3 sizes of rho0^((gamma-1)/2) and rho0^((delta-1)/2) against D0.

    Under (P2) the varphi term is reported but does not enter the verdict.
    """
    g = init.phi0.grid
    raw_phi = init.phi0.values / phi_scale(params)
    a = sobolev_array(raw_phi, g, 3).h_norm(3)
    b = sobolev_array(init.varphi0.values, g, 3).h_norm(3)
    binding = not holds_P2
    total = a + b
    measured = total if binding else a
    return SmallnessReport(a, b, total, D0, bool(measured <= D0), binding)
