"""Explicit SSP-RK3 integration of the reformulated system for (varphi, phi, w).

The background flow u_hat is evaluated analytically at every stage.  All rates
are written in a split form ``rates(coef, unk)`` whose coefficients come from a
frozen state; the direct solver passes the same state twice and the Picard
solver passes the previous iterate as ``coef``.  At a Picard fixed point the two
code paths perform identical floating point operations.
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np

from .burgers import BurgersFlow, InitialVelocity, SingularJacobian
from .fields import (Field, Grid, _lame_coeffs, diff, diff_upwind, div_array, weighted_fourth_difference,
                     grad_array, l2_norm, lame_array, save_field, stress_from_jacobian)
from .initdata import ReformInit, density_from_phi, density_from_varphi
from .regime import Params

TOL_NEG = 1e-12


class NonFinite(ArithmeticError):
    def __init__(self, term):
        self.term = term
        super().__init__(f"non-finite values first produced by {term}")


class ZeroDt(ArithmeticError):
    pass


class NegativityBreach(ArithmeticError):
    pass


class NegativePhi(ValueError):
    pass


class NoContraction(ArithmeticError):
    def __init__(self, gammas):
        self.gammas = list(gammas)
        super().__init__(f"Picard increments stopped contracting: {self.gammas}")


class Halt(Exception):
    """Raised by observers to stop a run with a structured reason."""

    def __init__(self, reason: str, detail: str = ""):
        self.reason = reason
        self.detail = detail
        super().__init__(f"{reason}: {detail}")


@dataclass(frozen=True)
class ReformState:
    t: float
    varphi: Field
    phi: Field
    w: Field

    @property
    def grid(self) -> Grid:
        return self.varphi.grid

    @classmethod
    def from_arrays(cls, t, grid, varphi, phi, w) -> "ReformState":
        return cls(float(t), Field.scalar(grid, varphi), Field.scalar(grid, phi), Field.vector(grid, w))

    @classmethod
    def from_init(cls, init: ReformInit, t: float = 0.0) -> "ReformState":
        return cls(float(t), init.varphi0, init.phi0, init.w0)

    def arrays(self):
        return self.varphi.values, self.phi.values, self.w.values


@dataclass
class SolverConfig:
    mode: str = "direct"
    cfl: float = 0.5
    advection_scheme: str = "central_filtered"
    stencil_order: int = 2
    filter_sigma: float = 0.01
    dt_viscous_safety: float = 0.5
    end_time: float = 1.0
    output_stride: float = 0.1
    vacuum_floor: float = 1e-12
    tol_neg: float = TOL_NEG
    clamp_mass_fraction: float = 1e-8
    blowup_grad_threshold: float = 50.0
    dt_min: float = 1e-12
    dt_fixed: Optional[float] = None
    max_steps: int = 10_000_000
    picard_eta: float = 0.0
    picard_k_max: int = 30
    picard_tol: float = 1e-28
    keep_snapshots: bool = False

    def __post_init__(self):
        if self.mode not in ("direct", "picard"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if not 0 < self.cfl <= 1:
            raise ValueError("cfl must lie in (0, 1]")
        if self.advection_scheme not in ("central_filtered", "upwind1"):
            raise ValueError(f"unknown advection scheme {self.advection_scheme!r}")
        if self.stencil_order not in (2, 4):
            raise ValueError("stencil_order must be 2 or 4")
        if not self.output_stride > 0 or not self.end_time >= 0:
            raise ValueError("need output_stride > 0 and end_time >= 0")


@dataclass
class RhsDecomposition:
    transport_phi: np.ndarray   # varphi rate
    hyperbolic_W: tuple         # (phi rate, w rate)
    elliptic_W: np.ndarray      # w rate
    source_HQ: np.ndarray       # w rate
    source_G: np.ndarray        # w rate
    filter: tuple = None        # (varphi, phi, w) rates, zero without filtering

    def totals(self):
        fv, fp, fw = self.filter
        dv = self.transport_phi + fv
        dp = self.hyperbolic_W[0] + fp
        dw = self.hyperbolic_W[1] + self.elliptic_W + self.source_HQ + self.source_G + fw
        return dv, dp, dw


class Background:
    """u_hat, grad u_hat and the Lame term of u_hat sampled on a grid, cached per time."""

    def __init__(self, flow: BurgersFlow, grid: Grid, params: Params, cache: int = 8):
        self.flow, self.grid, self.params = flow, grid, params
        self._cache: dict = {}
        self._order: list = []
        self._size = cache

    def at(self, t: float):
        t = float(t)
        hit = self._cache.get(t)
        if hit is not None:
            return hit
        u, G, H = self.flow.eval_full(t, self.grid.coords)
        p = self.params
        d = self.grid.dim
        c_lap, c_gd = _lame_coeffs(p.viscosity_model, p.alpha, p.beta)
        lap = np.einsum("ikk...->i...", H)
        graddiv = np.einsum("jji...->i...", H)
        Lu = -c_lap * lap - c_gd * graddiv
        divu = np.trace(G, axis1=0, axis2=1)
        out = (u, G, divu, Lu)
        self._cache[t] = out
        self._order.append(t)
        if len(self._order) > self._size:
            self._cache.pop(self._order.pop(0), None)
        return out


def _advect(f, u, dim, h, scheme, order):
    """sum_j u_j d_j f with f scalar or vector (leading component axes)."""
    ncomp = f.ndim - dim
    out = np.zeros_like(f)
    for j in range(dim):
        ax = ncomp + j
        if scheme == "upwind1":
            df = diff_upwind(f, np.broadcast_to(u[j], f.shape), ax, h)
        else:
            df = diff(f, ax, h, order)
        out += u[j] * df
    return out


def _check(term, *arrays):
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise NonFinite(term)


def rates(coef, unk, t: float, bg: Background, params: Params, config: SolverConfig,
          grid: Grid, eta: float = 0.0, zero_w: bool = False) -> RhsDecomposition:
    """Rates of ``unk`` = (varphi, phi, w) with advection and pressure coefficients from ``coef``."""
    _, phi_c, w_c = coef
    v, p, w = unk
    d, h = grid.dim, grid.h
    order, scheme = config.stencil_order, config.advection_scheme
    uh, Gh, divh, Luh = bg.at(t)
    g, dl = params.gamma, params.delta
    u_c = w_c + uh

    div_wc = div_array(w_c, d, h, order)
    div_w = div_array(w, d, h, order)
    tv = -_advect(v, u_c, d, h, scheme, order) - 0.5 * (dl - 1) * v * (div_wc + divh)
    _check("transport_phi", tv)
    hp = (-_advect(p, u_c, d, h, scheme, order)
          - 0.5 * (g - 1) * phi_c * div_w - 0.5 * (g - 1) * p * divh)
    if zero_w:
        zero = np.zeros_like(w)
        hw = el = hq = sg = zero
    else:
        gp = grad_array(p, d, h, order)
        hw = -_advect(w, u_c, d, h, scheme, order) - 0.5 * (g - 1) * phi_c[None] * gp
        _check("hyperbolic_W", hp, hw)
        v2 = v * v
        el = -(v2 + eta**2)[None] * lame_array(w, d, h, params.alpha, params.beta,
                                               params.viscosity_model, order)
        _check("elliptic_W", el)
        if params.viscosity_model == "laplacian_only":
            hq = np.zeros_like(w)
        else:
            J = grad_array(w, d, h, order) + Gh
            Q = dl / (dl - 1) * stress_from_jacobian(J, params.alpha, params.beta, params.viscosity_model)
            dv2 = grad_array(v2, d, h, order)
            hq = np.einsum("j...,ij...->i...", dv2, Q)
        _check("source_HQ", hq)
        sg = -np.einsum("j...,ij...->i...", w, Gh) - v2[None] * Luh
        _check("source_G", sg)
    if scheme == "central_filtered" and config.filter_sigma > 0:
        # local signal speed keeps the damping (and its undershoot) tied to the flow nearby
        speed = np.sqrt(np.sum(u_c**2, axis=0)) + 0.5 * (g - 1) * np.abs(phi_c)
        k = -config.filter_sigma / h
        fv = k * weighted_fourth_difference(v, speed, d)
        fp = k * weighted_fourth_difference(p, speed, d)
        fw = np.zeros_like(w) if zero_w else k * weighted_fourth_difference(w, speed, d)
    else:
        fv, fp, fw = np.zeros_like(v), np.zeros_like(p), np.zeros_like(w)
    return RhsDecomposition(tv, (hp, hw), el, hq, sg, (fv, fp, fw))


def rhs(state: ReformState, flow, params: Params, config: Optional[SolverConfig] = None,
        bg: Optional[Background] = None) -> RhsDecomposition:
    config = config or SolverConfig()
    bg = bg or Background(flow, state.grid, params)
    a = state.arrays()
    return rates(a, a, state.t, bg, params, config, state.grid)


def viscous_coefficient(params: Params) -> float:
    c_lap, c_gd = _lame_coeffs(params.viscosity_model, params.alpha, params.beta)
    return c_lap + abs(c_gd)


def stable_dt(state: ReformState, params: Params, config: SolverConfig, bg: Background,
              cap: Optional[float] = None, eta: float = 0.0):
    """(dt, advective bound, viscous bound)."""
    g = state.grid
    uh = bg.at(state.t)[0]
    u = state.w.values + uh
    speed = float(np.max(np.sqrt(np.sum(u**2, axis=0)) + 0.5 * (params.gamma - 1) * np.abs(state.phi.values)))
    adv = g.h / speed if speed > 0 else math.inf
    v2 = float(np.max(state.varphi.values**2)) + eta**2
    visc = config.dt_viscous_safety * g.h**2 / (2 * g.dim * v2 * viscous_coefficient(params)) if v2 > 0 else math.inf
    dt = config.cfl * min(adv, visc)
    cap = config.output_stride if cap is None else cap
    dt = min(dt, cap)
    if config.cfl * visc < config.dt_min:
        raise ZeroDt(f"viscous bound {config.cfl * visc:.3e} underflows at t={state.t}")
    if not dt > 0 or not math.isfinite(dt):
        raise ZeroDt(f"dt = {dt} at t={state.t}")
    return dt, config.cfl * adv, config.cfl * visc


@dataclass
class StepInfo:
    t: float
    dt: float
    clamped_mass: float
    stages: tuple = ()


def _clamp(v, p, config: SolverConfig, grid: Grid):
    mass = float(np.sum(np.abs(p)) + np.sum(np.abs(v))) * grid.cell_volume
    clamped = 0.0
    out = []
    for a in (v, p):
        bad = a < -config.tol_neg
        if np.any(bad):
            clamped += float(-np.sum(a[bad])) * grid.cell_volume
            a = np.where(bad, 0.0, a)
        out.append(a)
    if mass > 0 and clamped > config.clamp_mass_fraction * mass:
        raise NegativityBreach(f"clamped {clamped:.3e} of {mass:.3e}")
    return out[0], out[1], clamped


def _rk3(unk, t, dt, rate_fn):
    """One SSP-RK3 step; rate_fn(stage_index, stage_time, stage_state) -> rates tuple."""
    r0 = rate_fn(0, t, unk)
    s1 = tuple(a + dt * b for a, b in zip(unk, r0))
    r1 = rate_fn(1, t + dt, s1)
    s2 = tuple(0.75 * a + 0.25 * (b + dt * c) for a, b, c in zip(unk, s1, r1))
    r2 = rate_fn(2, t + 0.5 * dt, s2)
    out = tuple(a / 3.0 + 2.0 / 3.0 * (b + dt * c) for a, b, c in zip(unk, s2, r2))
    return out, (unk, s1, s2)


def step(state: ReformState, flow, params: Params, config: SolverConfig, dt: Optional[float] = None,
         bg: Optional[Background] = None):
    """Advance one SSP-RK3 step; returns (new state, StepInfo)."""
    g = state.grid
    bg = bg or Background(flow, g, params)
    if dt is None:
        dt = stable_dt(state, params, config, bg)[0]

    def rate_fn(i, tau, s):
        return rates(s, s, tau, bg, params, config, g).totals()

    (v, p, w), stages = _rk3(state.arrays(), state.t, dt, rate_fn)
    _check("step", v, p, w)
    v, p, clamped = _clamp(v, p, config, g)
    new = ReformState.from_arrays(state.t + dt, g, v, p, w)
    return new, StepInfo(new.t, dt, clamped, stages)


@dataclass
class HaltRecord:
    reason: str
    t: float
    step: int
    detail: str = ""

    def to_text(self) -> str:
        return f"reason={self.reason}\nt={self.t!r}\nstep={self.step}\ndetail={self.detail}\n"


@dataclass
class Trajectory:
    final: ReformState
    halt: Optional[HaltRecord]
    steps: int
    dt_log: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)
    clamped_total: float = 0.0

    @property
    def completed(self) -> bool:
        return self.halt is None

    def write_dt_log(self, path) -> None:
        with open(path, "w", newline="\n") as fh:
            fh.write("step,t,dt,dt_advective,dt_viscous,clamped_mass\n")
            for row in self.dt_log:
                fh.write(",".join(repr(float(x)) if i else str(x) for i, x in enumerate(row)) + "\n")


def grad_u_sup(state: ReformState, bg: Background, order: int = 2) -> float:
    g = state.grid
    J = grad_array(state.w.values, g.dim, g.h, order) + bg.at(state.t)[1]
    return float(np.max(np.sqrt(np.sum(J**2, axis=(0, 1)))))


Observer = Callable[[ReformState, "Background"], None]


def run(init, flow, params: Params, config: SolverConfig, observers: Sequence[Observer] = ()) -> Trajectory:
    """Integrate to config.end_time, calling observers at t = 0 and every output stride.

    Observers with an ``on_step(state, background, info)`` method are also
    called after every step.

    Physics halts (dt collapse, negativity breach, gradient threshold, observer
    Halt, singular background) end the run with a HaltRecord; NonFinite is
    recorded the same way.
    """
    state = init if isinstance(init, ReformState) else ReformState.from_init(init)
    g = state.grid
    bg = Background(flow, g, params)
    traj = Trajectory(state, None, 0)
    next_out = state.t + config.output_stride
    nstep = 0

    def notify(s):
        for ob in observers:
            ob(s, bg)
        if config.keep_snapshots:
            traj.snapshots.append(s)

    def halt(reason, detail=""):
        traj.halt = HaltRecord(reason, state.t, nstep, detail)

    try:
        notify(state)
        while state.t < config.end_time - 1e-12 * max(1.0, config.end_time):
            if nstep >= config.max_steps:
                halt("max_steps")
                break
            cap = min(next_out, config.end_time) - state.t
            if config.dt_fixed is not None:
                dt, adv, visc = min(config.dt_fixed, cap), math.nan, math.nan
            else:
                dt, adv, visc = stable_dt(state, params, config, bg, cap=cap)
            state, info = step(state, flow, params, config, dt, bg)
            nstep += 1
            traj.clamped_total += info.clamped_mass
            traj.dt_log.append((nstep, state.t, dt, adv, visc, info.clamped_mass))
            for ob in observers:
                hook = getattr(ob, "on_step", None)
                if hook is not None:
                    hook(state, bg, info)
            if grad_u_sup(state, bg, config.stencil_order) > config.blowup_grad_threshold:
                halt("gradient_blowup", f"|grad u|_inf > {config.blowup_grad_threshold}")
                break
            if state.t >= next_out - 1e-12 * max(1.0, next_out) or state.t >= config.end_time - 1e-12:
                notify(state)
                next_out += config.output_stride
    except ZeroDt as exc:
        halt("zero_dt", str(exc))
    except NegativityBreach as exc:
        halt("negativity_breach", str(exc))
    except NonFinite as exc:
        halt("non_finite", str(exc))
    except SingularJacobian as exc:
        halt("singular_background", str(exc))
    except Halt as exc:
        halt(exc.reason, exc.detail)
    traj.final = state
    traj.steps = nstep
    return traj


# --- Picard linearisation -------------------------------------------------------

@dataclass
class PicardResult:
    iterates: list            # final state per iterate
    gammas: list              # Gamma^{k+1} for k = 0, 1, ...
    times: np.ndarray
    final: ReformState

    @property
    def ratios(self) -> list:
        g = self.gammas
        return [g[i + 1] / g[i] if g[i] > 0 else 0.0 for i in range(len(g) - 1)]


def _picard_pass(u0, times, bg, params, config, grid, frozen, eta, zero_w):
    """Integrate one linear iterate; returns (per-step states, per-step stage values)."""
    unk = u0
    states, stages_all = [unk], []
    for n in range(len(times) - 1):
        t, dt = times[n], times[n + 1] - times[n]

        def rate_fn(i, tau, s):
            coef = s if frozen is None else frozen[n][i]
            return rates(coef, s, tau, bg, params, config, grid, eta, zero_w).totals()

        out, stages = _rk3(unk, t, dt, rate_fn)
        _check("picard", *out)
        v, p, clamped = _clamp(out[0], out[1], config, grid)
        unk = (v, p, out[2])
        states.append(unk)
        stages_all.append(stages)
    return states, stages_all


def picard_solve(init, flow, params: Params, config: SolverConfig, k_max: Optional[int] = None,
                 horizon: Optional[float] = None) -> PicardResult:
    """Iterate the linearised problem on [0, horizon] with a fixed time step.

    Iterate 0 transports (varphi0, phi0) by u_hat with w = 0.  Iterate k+1 uses
    iterate k's stage values as coefficients.  Stops when Gamma drops below
    config.picard_tol or after k_max iterates.
    """
    state = init if isinstance(init, ReformState) else ReformState.from_init(init)
    g = state.grid
    bg = Background(flow, g, params, cache=4)
    T = config.end_time if horizon is None else horizon
    k_max = config.picard_k_max if k_max is None else k_max
    dt = config.dt_fixed or stable_dt(state, params, config, bg, cap=T, eta=config.picard_eta)[0]
    n = max(1, int(math.ceil(T / dt - 1e-9)))
    times = np.linspace(0.0, T, n + 1)
    u0 = state.arrays()
    seed = (u0[0], u0[1], np.zeros_like(u0[2]))
    states, stages = _picard_pass(seed, times, bg, params, config, g, None, config.picard_eta, True)
    iterates = [ReformState.from_arrays(T, g, *states[-1])]
    gammas = []
    rising = 0
    for k in range(k_max):
        new_states, new_stages = _picard_pass(u0, times, bg, params, config, g, stages, config.picard_eta, False)
        gam = 0.0
        for a, b in zip(new_states, states):
            dv = l2_norm(a[0] - b[0], g) ** 2
            dW = l2_norm(a[1] - b[1], g) ** 2 + l2_norm(a[2] - b[2], g) ** 2
            gam = max(gam, dv + dW)
        gammas.append(gam)
        states, stages = new_states, new_stages
        iterates.append(ReformState.from_arrays(T, g, *states[-1]))
        if len(gammas) > 1 and gammas[-2] > 0 and gammas[-1] / gammas[-2] > 1:
            rising += 1
            if rising >= 2:
                raise NoContraction(gammas)
        else:
            rising = 0
        if gam <= config.picard_tol:
            break
    return PicardResult(iterates, gammas, times, iterates[-1])


def run_fixed(init, flow, params: Params, config: SolverConfig, times) -> ReformState:
    """Direct solver on a prescribed time grid (no clamping differences from picard_solve)."""
    state = init if isinstance(init, ReformState) else ReformState.from_init(init)
    g = state.grid
    bg = Background(flow, g, params, cache=4)
    for n in range(len(times) - 1):
        state, _ = step(state, flow, params, config, float(times[n + 1] - times[n]), bg)
    return state


# --- physical variables ----------------------------------------------------------

@dataclass(frozen=True)
class PhysicalState:
    rho: Field
    u: Field
    rho_dual: Field
    gap: float


def to_physical(state: ReformState, params: Params, flow=None, bg: Optional[Background] = None,
                vacuum_floor: float = 1e-12) -> PhysicalState:
    phi = state.phi.values
    if np.any(phi < -TOL_NEG):
        raise NegativePhi(f"min phi = {float(phi.min()):.3e}")
    g = state.grid
    rho = density_from_phi(np.maximum(phi, 0.0), params)
    dual = density_from_varphi(np.maximum(state.varphi.values, 0.0), params)
    if bg is None and flow is not None:
        bg = Background(flow, g, params)
    uh = bg.at(state.t)[0] if bg is not None else 0.0
    u = state.w.values + uh
    mask = rho > vacuum_floor
    gap = float(np.max(np.abs(dual[mask] - rho[mask]) / rho[mask])) if np.any(mask) else 0.0
    return PhysicalState(Field.scalar(g, rho), Field.vector(g, u), Field.scalar(g, dual), gap)


def save_checkpoint(directory, state: ReformState, tag: str = "") -> None:
    os.makedirs(directory, exist_ok=True)
    stem = f"t{state.t:.6f}{tag}"
    for name, f in (("varphi", state.varphi), ("phi", state.phi), ("w", state.w)):
        save_field(os.path.join(directory, f"{stem}_{name}.bin"), f, state.t)


def zero_background(dim: int) -> BurgersFlow:
    return BurgersFlow(InitialVelocity.zero(dim))
