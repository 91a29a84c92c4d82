"""Uniform periodic grids, tensor fields and central-difference operators.

Array layout: a scalar field on a ``d``-dimensional grid has shape ``(N,)*d``,
a vector field ``(d, N, ...)`` and a matrix field ``(d, d, N, ...)``.  For a
vector ``u`` the gradient is the Jacobian, ``grad(u)[i, j] = d_j u_i``.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

RANKS = {"scalar": 0, "vector": 1, "matrix": 2}


class RankMismatch(ValueError):
    pass


@dataclass(frozen=True)
class Grid:
    dim: int
    L: float
    N: int

    def __post_init__(self):
        if self.dim not in (1, 2, 3):
            raise ValueError(f"dim must be 1, 2 or 3, got {self.dim}")
        if self.N < 8 or self.N % 2:
            raise ValueError(f"N must be even and >= 8, got {self.N}")
        if not self.L > 0:
            raise ValueError("L must be positive")

    @property
    def h(self) -> float:
        return 2.0 * self.L / self.N

    @property
    def shape(self) -> tuple:
        return (self.N,) * self.dim

    @property
    def cell_volume(self) -> float:
        return self.h**self.dim

    @property
    def volume(self) -> float:
        return (2.0 * self.L) ** self.dim

    @cached_property
    def axis(self) -> np.ndarray:
        return -self.L + self.h * np.arange(self.N)

    @cached_property
    def coords(self) -> np.ndarray:
        """Point coordinates, shape (d, N, ..., N)."""
        return np.stack(np.meshgrid(*([self.axis] * self.dim), indexing="ij"))

    @cached_property
    def radius(self) -> np.ndarray:
        return np.sqrt(np.sum(self.coords**2, axis=0))

    def scaled(self, factor: float) -> "Grid":
        return Grid(self.dim, self.L * factor, self.N)

    def zeros(self, rank: str = "scalar") -> np.ndarray:
        return np.zeros((self.dim,) * RANKS[rank] + self.shape)


@dataclass(frozen=True, eq=False)
class Field:
    grid: Grid
    rank: str
    values: np.ndarray

    def __post_init__(self):
        if self.rank not in RANKS:
            raise RankMismatch(f"unknown rank {self.rank!r}")
        expect = (self.grid.dim,) * RANKS[self.rank] + self.grid.shape
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != expect:
            raise RankMismatch(f"{self.rank} field needs shape {expect}, got {vals.shape}")
        if not np.all(np.isfinite(vals)):
            raise ValueError("field values must be finite")
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)

    @classmethod
    def scalar(cls, grid, values):
        return cls(grid, "scalar", values)

    @classmethod
    def vector(cls, grid, values):
        return cls(grid, "vector", values)

    @property
    def components(self) -> int:
        return self.grid.dim ** RANKS[self.rank]


# --- raw array stencils -------------------------------------------------------

def diff(a: np.ndarray, axis: int, h: float, order: int = 2) -> np.ndarray:
    """Periodic central first derivative along spatial ``axis`` (negative index ok)."""
    if order == 2:
        return (np.roll(a, -1, axis) - np.roll(a, 1, axis)) / (2 * h)
    if order == 4:
        return (8 * (np.roll(a, -1, axis) - np.roll(a, 1, axis))
                - (np.roll(a, -2, axis) - np.roll(a, 2, axis))) / (12 * h)
    raise ValueError(f"stencil order must be 2 or 4, got {order}")


def diff_upwind(a: np.ndarray, vel: np.ndarray, axis: int, h: float) -> np.ndarray:
    """First-order upwind derivative, one-sided against the sign of ``vel``."""
    back = (a - np.roll(a, 1, axis)) / h
    fwd = (np.roll(a, -1, axis) - a) / h
    return np.where(vel > 0, back, fwd)


def fourth_difference(a: np.ndarray, dim: int) -> np.ndarray:
    """Sum over spatial axes of the undivided 5-point fourth difference."""
    out = np.zeros_like(a)
    for j in range(dim):
        ax = a.ndim - dim + j
        out += (np.roll(a, -2, ax) + np.roll(a, 2, ax)
                - 4 * (np.roll(a, -1, ax) + np.roll(a, 1, ax)) + 6 * a)
    return out


def weighted_fourth_difference(a: np.ndarray, s: np.ndarray, dim: int) -> np.ndarray:
    """Sum over axes of d2(s d2 a) with undivided second differences; conservative and,
    for s >= 0, dissipative (sum a * result = sum s (d2 a)^2)."""
    out = np.zeros_like(a)
    for j in range(dim):
        ax = a.ndim - dim + j
        sax = s.ndim - dim + j
        d2 = np.roll(a, -1, ax) - 2 * a + np.roll(a, 1, ax)
        q = s * d2
        out += np.roll(q, -1, ax) - 2 * q + np.roll(q, 1, ax)
    return out


def grad_array(a: np.ndarray, dim: int, h: float, order: int = 2) -> np.ndarray:
    """Append a derivative index as the last tensor index: out[..., j] = d_j a."""
    ncomp = a.ndim - dim
    parts = [diff(a, ncomp + j, h, order) for j in range(dim)]
    return np.stack(parts, axis=ncomp)


def div_array(v: np.ndarray, dim: int, h: float, order: int = 2) -> np.ndarray:
    """Contract the last tensor index with the derivative: sum_j d_j v[..., j]."""
    ncomp = v.ndim - dim
    if ncomp < 1:
        raise RankMismatch("divergence needs at least one tensor index")
    return sum(diff(v[(slice(None),) * (ncomp - 1) + (j,)], ncomp - 1 + j, h, order)
               for j in range(dim))


def lap_array(a: np.ndarray, dim: int, h: float, order: int = 2) -> np.ndarray:
    """div(grad a) built from the same first-difference stencil (wide Laplacian)."""
    ncomp = a.ndim - dim
    return sum(diff(diff(a, ncomp + j, h, order), ncomp + j, h, order) for j in range(dim))


# --- field-level operators ----------------------------------------------------

def gradient(f: Field, order: int = 2) -> Field:
    if f.rank == "matrix":
        raise RankMismatch("gradient of a matrix field is not supported")
    g = f.grid
    new_rank = "vector" if f.rank == "scalar" else "matrix"
    return Field(g, new_rank, grad_array(f.values, g.dim, g.h, order))


def divergence(v: Field, order: int = 2) -> Field:
    if v.rank != "vector":
        raise RankMismatch("divergence expects a vector field")
    g = v.grid
    return Field(g, "scalar", div_array(v.values, g.dim, g.h, order))


def laplacian(f: Field, order: int = 2) -> Field:
    g = f.grid
    return Field(g, f.rank, lap_array(f.values, g.dim, g.h, order))


def _lame_coeffs(model: str, alpha: float, beta: float) -> tuple:
    """(c_lap, c_graddiv) with L u = -c_lap lap u - c_graddiv grad div u."""
    if model == "standard":
        return alpha, alpha + beta
    if model == "gradient_form":
        return 2 * alpha, beta
    if model == "laplacian_only":
        return alpha, 0.0
    raise ValueError(f"unknown viscosity model {model!r}")


def lame_array(u: np.ndarray, dim: int, h: float, alpha: float, beta: float,
               model: str = "standard", order: int = 2) -> np.ndarray:
    c_lap, c_gd = _lame_coeffs(model, alpha, beta)
    out = -c_lap * lap_array(u, dim, h, order)
    if c_gd:
        out -= c_gd * grad_array(div_array(u, dim, h, order), dim, h, order)
    return out


def lame(u: Field, alpha: float, beta: float, model: str = "standard", order: int = 2) -> Field:
    if u.rank != "vector":
        raise RankMismatch("Lame operator expects a vector field")
    g = u.grid
    return Field(g, "vector", lame_array(u.values, g.dim, g.h, alpha, beta, model, order))


def stress_from_jacobian(J: np.ndarray, alpha: float, beta: float, model: str = "standard") -> np.ndarray:
    """Viscous stress S(u) from the Jacobian array J (d, d, ...)."""
    d = J.shape[0]
    tr = np.trace(J, axis1=0, axis2=1)
    eye = np.eye(d).reshape((d, d) + (1,) * (J.ndim - 2))
    if model == "standard":
        return alpha * (J + np.swapaxes(J, 0, 1)) + beta * tr * eye
    if model == "gradient_form":
        return 2 * alpha * J + beta * tr * eye
    if model == "laplacian_only":
        return alpha * J
    raise ValueError(f"unknown viscosity model {model!r}")


def stress_S(u: Field, alpha: float, beta: float, model: str = "standard", order: int = 2) -> Field:
    J = gradient(u, order).values
    return Field(u.grid, "matrix", stress_from_jacobian(J, alpha, beta, model))


def stress_Q(u: Field, alpha: float, beta: float, delta: float,
             model: str = "standard", order: int = 2) -> Field:
    if model == "laplacian_only":
        return Field(u.grid, "matrix", u.grid.zeros("matrix"))
    S = stress_S(u, alpha, beta, model, order).values
    return Field(u.grid, "matrix", delta / (delta - 1) * S)


# --- norms --------------------------------------------------------------------

@dataclass(frozen=True)
class SobolevNorms:
    l2: tuple
    linf: float
    grad_linf: float

    def h_norm(self, s: int) -> float:
        return float(np.sqrt(sum(v**2 for v in self.l2[: s + 1])))


def _pointwise_norm(a: np.ndarray, dim: int) -> np.ndarray:
    ncomp = a.ndim - dim
    if ncomp == 0:
        return np.abs(a)
    return np.sqrt(np.sum(a**2, axis=tuple(range(ncomp))))


def l2_norm(a: np.ndarray, grid: Grid) -> float:
    return float(np.sqrt(np.sum(a * a) * grid.cell_volume))


def sobolev_array(a: np.ndarray, grid: Grid, up_to_k: int = 3, order: int = 2) -> SobolevNorms:
    if not 0 <= up_to_k <= 4:
        raise ValueError("up_to_k must lie in 0..4")
    l2 = [l2_norm(a, grid)]
    cur = a
    grad_linf = None
    for k in range(1, up_to_k + 1):
        cur = grad_array(cur, grid.dim, grid.h, order)
        if k == 1:
            grad_linf = float(np.max(_pointwise_norm(cur, grid.dim)))
        l2.append(l2_norm(cur, grid))
    if grad_linf is None:
        grad_linf = float(np.max(_pointwise_norm(grad_array(a, grid.dim, grid.h, order), grid.dim)))
    return SobolevNorms(tuple(l2), float(np.max(_pointwise_norm(a, grid.dim))), grad_linf)


def sobolev(f: Field, up_to_k: int = 3, order: int = 2) -> SobolevNorms:
    return sobolev_array(f.values, f.grid, up_to_k, order)


def inner(a: np.ndarray, b: np.ndarray, grid: Grid) -> float:
    return float(np.sum(a * b) * grid.cell_volume)


# --- commutator identity ------------------------------------------------------

@dataclass(frozen=True)
class IdentityCheck:
    lhs: float          # |phi grad^3 div w|^2
    rhs_main: float     # |phi grad^4 w|^2
    j_star: float       # remainder from the integration-by-parts formula
    j_star_exact: float  # remainder that makes the discrete split exact
    diff: float         # lhs - rhs_main

    @property
    def discretisation_error(self) -> float:
        return abs(self.j_star_exact - self.j_star)

    @property
    def slack(self) -> float:
        return self.rhs_main + self.j_star + self.discretisation_error - self.lhs


def discrete_identity_check(phi: Field, w: Field, order: int = 2) -> IdentityCheck:
    """Evaluate both sides of |phi D^3 div w|^2 <= |phi D^4 w|^2 + J*.

    ``j_star`` sums 2 * J*_ij over i < j with the remainder
    int(d_j phi^2 a_i . d_i a_j - d_i phi^2 a_i . d_j a_j), a_k = D^3 w_k.
    ``j_star_exact`` is the remainder defined by the discrete split itself.
    """
    g = phi.grid
    d, h = g.dim, g.h
    p2 = phi.values**2
    # a[k] = grad^3 w_k, shape (d, d, d, d, N...) with a[k][...]
    a = w.values
    for _ in range(3):
        a = grad_array(a, d, h, order)
    da = grad_array(a, d, h, order)           # d_l a_k: [k, m1, m2, m3, l]
    div3 = sum(da[(i,) + (slice(None),) * 3 + (i,)] for i in range(d))
    lhs = float(np.sum(p2 * np.sum(div3**2, axis=(0, 1, 2))) * g.cell_volume)
    rhs_main = float(np.sum(p2 * np.sum(da**2, axis=tuple(range(5)))) * g.cell_volume)
    dp2 = grad_array(p2, d, h, order)
    j_formula = 0.0
    j_exact = 0.0
    for i in range(d):
        for j in range(i + 1, d):
            ai, aj = a[i], a[j]
            di_ai = da[(i,) + (slice(None),) * 3 + (i,)]
            dj_aj = da[(j,) + (slice(None),) * 3 + (j,)]
            dj_ai = da[(i,) + (slice(None),) * 3 + (j,)]
            di_aj = da[(j,) + (slice(None),) * 3 + (i,)]
            J_ij = float(np.sum(p2 * np.sum(di_ai * dj_aj, axis=(0, 1, 2))) * g.cell_volume)
            main = float(np.sum(p2 * np.sum(dj_ai * di_aj, axis=(0, 1, 2))) * g.cell_volume)
            rem = float(np.sum(dp2[j] * np.sum(ai * di_aj, axis=(0, 1, 2))
                               - dp2[i] * np.sum(ai * dj_aj, axis=(0, 1, 2))) * g.cell_volume)
            j_formula += 2 * rem
            j_exact += 2 * (J_ij - main)
    return IdentityCheck(lhs, rhs_main, j_formula, j_exact, lhs - rhs_main)


# --- snapshot serialisation -----------------------------------------------------

def save_field(path, f: Field, time: float = 0.0) -> None:
    header = f"dim={f.grid.dim} N={f.grid.N} L={f.grid.L!r} rank={f.rank} time={time!r}\n"
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        fh.write(np.ascontiguousarray(f.values, dtype="<f8").tobytes())


def load_field(path) -> tuple[Field, float]:
    with open(path, "rb") as fh:
        header = fh.readline().decode("ascii").split()
        meta = dict(item.split("=", 1) for item in header)
        grid = Grid(int(meta["dim"]), float(meta["L"]), int(meta["N"]))
        rank = meta["rank"]
        shape = (grid.dim,) * RANKS[rank] + grid.shape
        data = np.frombuffer(fh.read(), dtype="<f8").reshape(shape)
    return Field(grid, rank, data.copy()), float(meta["time"])
