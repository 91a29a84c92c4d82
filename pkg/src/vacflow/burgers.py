"""Exact pressureless Burgers flow by characteristics.

Points are batched with the spatial index first: ``x`` has shape ``(d, ...)``.
Matrices returned for a batch have shape ``(d, d, ...)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.optimize import brentq

from .fields import Grid, sobolev_array


class SingularJacobian(ArithmeticError):
    pass


class NewtonDiverged(ArithmeticError):
    def __init__(self, residual):
        self.residual = residual
        super().__init__(f"characteristic inversion did not converge (residual {residual:.3e})")


class EigSolverFailure(ArithmeticError):
    pass


@dataclass(frozen=True)
class InitialVelocity:
    """Initial velocity with analytic Jacobian (and optionally Hessian).

    ``hess_u0(x)[i, j, k] = d_j d_k u0_i``.
    """
    dim: int
    u0: Callable[[np.ndarray], np.ndarray]
    grad_u0: Callable[[np.ndarray], np.ndarray]
    hess_u0: Optional[Callable[[np.ndarray], np.ndarray]] = None
    kappa_claimed: float = 0.0

    @classmethod
    def linear(cls, A, b=None, kappa_claimed=0.0) -> "InitialVelocity":
        A = np.atleast_2d(np.asarray(A, dtype=float))
        d = A.shape[0]
        b = np.zeros(d) if b is None else np.asarray(b, dtype=float)

        def u0(x):
            return np.tensordot(A, x, axes=(1, 0)) + b.reshape((d,) + (1,) * (x.ndim - 1))

        def grad(x):
            return np.broadcast_to(A.reshape((d, d) + (1,) * (x.ndim - 1)), (d, d) + x.shape[1:]).copy()

        def hess(x):
            return np.zeros((d, d, d) + x.shape[1:])

        return cls(d, u0, grad, hess, kappa_claimed)

    @classmethod
    def zero(cls, dim) -> "InitialVelocity":
        return cls.linear(np.zeros((dim, dim)))

    def normalized(self) -> "InitialVelocity":
        """Galilean shift so that u0(0) = 0; the Jacobian is unchanged."""
        shift = self.u0(np.zeros((self.dim, 1)))[:, 0]
        f = self.u0

        def u0(x):
            return f(x) - shift.reshape((self.dim,) + (1,) * (x.ndim - 1))

        return InitialVelocity(self.dim, u0, self.grad_u0, self.hess_u0, self.kappa_claimed)

    def check_consistency(self, x: np.ndarray, step: float = 1e-6, tol: float = 1e-6) -> float:
        """Max deviation between grad_u0 and a centred difference of u0 at points x."""
        G = self.grad_u0(x)
        worst = 0.0
        for j in range(self.dim):
            e = np.zeros_like(x)
            e[j] = step
            fd = (self.u0(x + e) - self.u0(x - e)) / (2 * step)
            worst = max(worst, float(np.max(np.abs(fd - G[:, j]))))
        if worst > tol:
            raise ValueError(f"grad_u0 inconsistent with u0 (deviation {worst:.2e})")
        return worst


def _as_points(x, dim) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if dim == 1 and x.ndim == 0:
        x = x.reshape(1)
    if x.shape[0] != dim:
        raise ValueError(f"points need leading axis of length {dim}")
    return x


def _batch_last(M: np.ndarray) -> np.ndarray:
    """(d, d, ...) -> (..., d, d)"""
    return np.moveaxis(np.moveaxis(M, 0, -1), 0, -1)


def _batch_first(M: np.ndarray) -> np.ndarray:
    """(..., d, d) -> (d, d, ...)"""
    return np.moveaxis(np.moveaxis(M, -1, 0), -1, 0)


def kappa_distance(G) -> float:
    """Distance from the spectrum of G to the closed half-line (-inf, 0]."""
    G = np.atleast_2d(np.asarray(G, dtype=float))
    try:
        lam = np.linalg.eigvals(G)
    except np.linalg.LinAlgError as exc:
        raise EigSolverFailure(str(exc)) from exc
    dist = np.where(lam.real > 0, np.abs(lam), np.abs(lam.imag))
    return float(np.min(dist))


def kappa_distance_field(G: np.ndarray) -> np.ndarray:
    """kappa_distance over a batch (d, d, ...)."""
    lam = np.linalg.eigvals(_batch_last(G))
    dist = np.where(lam.real > 0, np.abs(lam), np.abs(lam.imag))
    return dist.min(axis=-1)


class BurgersFlow:
    """u_t + u.grad u = 0 with u(0) = u0, solved along x = x0 + t u0(x0)."""

    def __init__(self, init: InitialVelocity, newton_tol: float = 1e-12, max_iter: int = 100):
        self.init = init
        self.dim = init.dim
        self.newton_tol = newton_tol
        self.max_iter = max_iter

    # ---- along characteristics --------------------------------------------
    def forward_map(self, t, x0):
        x0 = _as_points(x0, self.dim)
        return x0 + t * self.init.u0(x0)

    def _jac(self, t, x0):
        G0 = self.init.grad_u0(x0)
        d = self.dim
        eye = np.eye(d).reshape((d, d) + (1,) * (x0.ndim - 1))
        return eye + t * G0, G0

    def grad_along(self, t, x0):
        """(I + t G0)^-1 G0 at the characteristic foot x0."""
        x0 = _as_points(x0, self.dim)
        J, G0 = self._jac(t, x0)
        Jb = _batch_last(J)
        det = np.linalg.det(Jb)
        if np.any(np.abs(det) < 1e-12):
            raise SingularJacobian(f"det(I + t grad u0) ~ 0 at t={t}")
        return _batch_first(np.linalg.solve(Jb, _batch_last(G0)))

    def k_matrix(self, t, x0):
        d = self.dim
        x0 = _as_points(x0, d)
        G = self.grad_along(t, x0)
        eye = np.eye(d).reshape((d, d) + (1,) * (x0.ndim - 1))
        return (1 + t) ** 2 * G - (1 + t) * eye

    # ---- inversion ----------------------------------------------------------
    def invert(self, t, x):
        """Characteristic foot x0 with x0 + t u0(x0) = x (damped Newton)."""
        x = _as_points(x, self.dim)
        if t == 0:
            return x.copy()
        best = None
        for guess in (x / (1 + t), x.copy()):
            try:
                return self._newton(t, x, guess)
            except NewtonDiverged as exc:
                best = exc
        if self.dim == 1:
            return self._bisect(t, x)
        raise best

    def _newton(self, t, x, x0):
        res = self.forward_map(t, x0) - x
        rn = np.sqrt(np.sum(res**2, axis=0))
        scale = 1.0 + np.abs(x).max()
        for _ in range(self.max_iter):
            if np.max(rn) <= self.newton_tol * scale:
                return x0
            J, _ = self._jac(t, x0)
            rhs = np.moveaxis(res, 0, -1)[..., None]
            step = np.moveaxis(np.linalg.solve(_batch_last(J), rhs)[..., 0], -1, 0)
            lam = np.ones_like(rn)
            for _ in range(30):
                cand = x0 - lam * step
                cres = self.forward_map(t, cand) - x
                cn = np.sqrt(np.sum(cres**2, axis=0))
                bad = cn > rn * (1 - 1e-4 * lam) + 1e-300
                bad &= rn > self.newton_tol * scale
                if not np.any(bad):
                    break
                lam = np.where(bad, lam / 2, lam)
            x0, res, rn = cand, cres, cn
            if not np.all(np.isfinite(rn)):
                raise NewtonDiverged(float("nan"))
        if np.max(rn) <= self.newton_tol * scale:
            return x0
        raise NewtonDiverged(float(np.max(rn)))

    def _bisect(self, t, x):
        flat = x.reshape(-1)
        out = np.empty_like(flat)
        f = self.init.u0
        for i, xi in enumerate(flat):
            g = lambda s: s + t * f(np.array([[s]]))[0, 0] - xi
            lo, hi = xi - 1.0, xi + 1.0
            while g(lo) > 0:
                lo -= 2 * (hi - lo)
            while g(hi) < 0:
                hi += 2 * (hi - lo)
            out[i] = brentq(g, lo, hi, xtol=1e-14, rtol=1e-15)
        return out.reshape(x.shape)

    # ---- Eulerian evaluation ------------------------------------------------
    def eval(self, t, x):
        """(u_hat, grad u_hat) at Eulerian points x."""
        x0 = self.invert(t, x)
        return self.init.u0(x0), self.grad_along(t, x0)

    def eval_full(self, t, x):
        """(u_hat, grad u_hat, hess u_hat) with hess[i, j, k] = d_k d_j u_hat_i."""
        x = _as_points(x, self.dim)
        x0 = self.invert(t, x)
        J, G0 = self._jac(t, x0)
        Jb = _batch_last(J)
        if np.any(np.abs(np.linalg.det(Jb)) < 1e-12):
            raise SingularJacobian(f"det(I + t grad u0) ~ 0 at t={t}")
        Jinv = _batch_first(np.linalg.inv(Jb))
        G = np.einsum("ik...,kj...->ij...", Jinv, G0)
        if self.init.hess_u0 is None:
            raise ValueError("initial velocity has no Hessian evaluator")
        H0 = self.init.hess_u0(x0)
        # d G / d x0_l = Jinv (d G0 / d x0_l) Jinv ; d/dx_k = sum_l d/dx0_l Jinv[l, k]
        dG = np.einsum("ia...,abl...,bj...->ijl...", Jinv, H0, Jinv)
        H = np.einsum("ijl...,lk...->ijk...", dG, Jinv)
        return self.init.u0(x0), G, H

    def on_grid(self, t, grid: Grid):
        return self.eval_full(t, grid.coords)

    # ---- blow-up prediction ------------------------------------------------
    def singular_time(self, points: np.ndarray) -> float:
        return singular_time(points, self.init.grad_u0)

    def decay_report(self, l_range, t_grid, grid: Grid, comoving: bool = True, check_linear_bound: bool = True):
        return decay_report(self, l_range, t_grid, grid, comoving, check_linear_bound)


def singular_time(points: np.ndarray, grad_u0) -> float:
    """min over points of -1/lambda for real negative eigenvalues of grad u0."""
    pts = np.asarray(points, dtype=float)
    if pts.size == 0:
        return math.inf
    G = grad_u0(pts)
    lam = np.linalg.eigvals(_batch_last(G)).reshape(-1)
    real_neg = lam[(np.abs(lam.imag) <= 1e-12 * (1 + np.abs(lam.real))) & (lam.real < 0)].real
    if real_neg.size == 0:
        return math.inf
    return float(np.min(-1.0 / real_neg))


def vacuum_points(rho0: np.ndarray, grid: Grid, threshold: float = 1e-12) -> np.ndarray:
    mask = rho0 < threshold
    return grid.coords[:, mask]


@dataclass
class DecayRow:
    t: float
    l: int
    norm: float
    predicted_exponent: float


def decay_report(flow: BurgersFlow, l_range, t_grid, grid: Grid, comoving: bool = True,
                 check_linear_bound: bool = True):
    """Rows of (t, l, |grad^l u_hat|_2, predicted exponent) plus sup|grad^2 u_hat| per t.

    ``l = 'inf2'`` rows are not emitted; the sup-norm series is returned separately.
    With ``comoving`` the sampling box grows like (1 + t s), s = sup|grad u0|, so
    the expanding perturbation stays on the grid at fixed relative resolution.
    """
    d = flow.dim
    init = flow.init
    s = float(np.max(np.linalg.norm(_batch_last(init.grad_u0(grid.coords)), ord=2, axis=(-2, -1))))
    rows, sup2 = [], []
    for t in t_grid:
        g = grid.scaled(1 + t * s) if comoving else grid
        uh, G = flow.eval(t, g.coords)
        if check_linear_bound:
            gsup = float(np.max(np.linalg.norm(_batch_last(G), ord=2, axis=(-2, -1))))
            speed = np.sqrt(np.sum(uh**2, axis=0))
            if np.any(speed > gsup * g.radius * (1 + 1e-9) + 1e-12):
                raise AssertionError(f"linear growth bound violated at t={t}")
        norms = sobolev_array(G, g, up_to_k=max(max(l_range) - 1, 1))
        for l in l_range:
            rows.append(DecayRow(float(t), int(l), norms.l2[l - 1], d / 2 - (l + 1)))
        sup2.append(norms.grad_linf)
    return rows, np.array(sup2)


def fit_loglog(t, values):
    """Least-squares slope of log(values) against log(1+t)."""
    x = np.log1p(np.asarray(t, dtype=float))
    y = np.log(np.asarray(values, dtype=float))
    slope, _ = np.polyfit(x, y, 1)
    return float(slope)


def write_decay_csv(path, rows, fitted: dict) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write("t,l,norm,predicted_exponent,fitted_exponent\n")
        for r in rows:
            fh.write(f"{r.t!r},{r.l},{r.norm!r},{r.predicted_exponent!r},{fitted.get(r.l, float('nan'))!r}\n")
