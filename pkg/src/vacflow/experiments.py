"""Config-driven experiment drivers shared by the CLI, scripts and acceptance tests."""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import odebound
from .burgers import BurgersFlow, decay_report, fit_loglog, singular_time
from .config import RunConfig
from .diagnostics import DecayFit, Recorder, fit_decay
from .fields import Field, Grid, grad_array, l2_norm
from .initdata import build_density, build_velocity, to_reform
from .regime import Params, RegimeReport, classify, predicted_decay
from .solver import (PicardResult, ReformState, Trajectory, picard_solve, run, run_fixed,
                     zero_background)


@dataclass
class Setup:
    params: Params
    grid: Grid
    rho0: Field
    init: object            # ReformInit
    flow: BurgersFlow
    u0: Field
    velocity: object        # InitialVelocity of the full initial velocity


def perturbation_field(cfg: RunConfig, grid: Grid) -> Optional[np.ndarray]:
    p = cfg.perturbation
    if p.kind == "none":
        return None
    x = grid.coords
    d = grid.dim
    c = np.zeros(d) if not p.center else np.asarray(p.center, dtype=float)
    if p.kind == "sine":
        prof = np.prod(np.sin(p.wavenumber * x), axis=0)
    else:
        r2 = np.sum((x - c.reshape((d,) + (1,) * d)) ** 2, axis=0)
        prof = np.exp(-r2 / p.width**2)
    return p.amplitude * np.broadcast_to(prof, (d,) + grid.shape).copy()


def build(cfg: RunConfig) -> Setup:
    cfg.check()
    params = cfg.params.build()
    grid = Grid(params.dim, cfg.grid.L, cfg.grid.N)
    rho0 = build_density(cfg.density.build(), grid, params if cfg.density.family != "gaussian" else None)
    u0, vel = build_velocity(cfg.velocity.build(), grid)
    if cfg.velocity.background == "zero":
        flow = zero_background(params.dim)
        w0 = u0.values.copy()
    else:
        flow = BurgersFlow(vel)
        w0 = np.zeros_like(u0.values)
    extra = perturbation_field(cfg, grid)
    if extra is not None:
        w0 = w0 + extra
    init = to_reform(rho0, params, Field.vector(grid, w0))
    return Setup(params, grid, rho0, init, flow, u0, vel)


def predicted_singular_time(setup: Setup, threshold: float = 1e-12) -> float:
    """-1/lambda_min of grad u0 over the initial vacuum set.

    When w0 is nonzero the full initial velocity is only known on the grid, so
    its Jacobian is taken by fourth-order differences there.
    """
    g = setup.grid
    mask = setup.rho0.values < threshold
    w0 = setup.init.w0.values
    if not np.any(w0):
        return singular_time(g.coords[:, mask], setup.velocity.grad_u0)
    u = setup.flow.init.u0(g.coords) + w0
    J = grad_array(u, g.dim, g.h, order=4)[:, :, mask]
    lam = np.linalg.eigvals(np.moveaxis(J, -1, 0))
    neg = lam.real[(np.abs(lam.imag) <= 1e-12) & (lam.real < 0)]
    return float(np.min(-1.0 / neg)) if neg.size else math.inf


@dataclass
class SimulationResult:
    setup: Setup
    trajectory: Trajectory
    recorder: Recorder
    report: RegimeReport

    @property
    def series(self):
        return self.recorder.series


def simulate(cfg: RunConfig, setup: Optional[Setup] = None) -> SimulationResult:
    setup = setup or build(cfg)
    rep = classify(setup.params, cfg.diagnostics.n, cfg.diagnostics.m)
    dg = cfg.diagnostics
    R0 = cfg.density.support_radius or cfg.density.width
    rec = Recorder(setup.params, dg.n, dg.m, cfg.solver.vacuum_floor, cfg.solver.stencil_order,
                   cfg.solver.advection_scheme, dg.energy, dg.residual, R0, dg.halt_on_support)
    traj = run(setup.init, setup.flow, setup.params, cfg.solver, [rec])
    return SimulationResult(setup, traj, rec, rep)


def predicted_z_exponent(rep: RegimeReport) -> Optional[float]:
    try:
        return predicted_decay(rep).Z
    except ValueError:
        return None


def z_fit(res: SimulationResult, cfg: RunConfig) -> DecayFit:
    s = res.series
    t_max = min(cfg.diagnostics.fit_t_max, cfg.solver.end_time)
    return fit_decay(s.column("t"), s.column("Z"), (cfg.diagnostics.fit_t_min, t_max))


def envelope_spec(rep: RegimeReport, Z0: float) -> odebound.OdeSpec:
    """ODE of the weighted-energy inequality with unit prefactors (fitted later)."""
    b = (1 - rep.nu_star) * rep.b_star
    eps = rep.eps_star
    return odebound.OdeSpec(a=3.0, b=b, C1=1.0, C2=1.0, D1=1 + eps, D2=-1 - eps, Z0=Z0)


def envelope(res: SimulationResult, cfg: RunConfig) -> odebound.EnvelopeVerdict:
    s = res.series
    t, Z = s.column("t"), s.column("Z")
    return odebound.envelope_check(t, Z, envelope_spec(res.report, float(Z[0])),
                                   cfg.diagnostics.envelope_fit_fraction)


def default_D0(rep: RegimeReport) -> float:
    """Threshold of the comparison ODE with unit prefactors, used as the smallness proxy."""
    if rep.holds_P0 or rep.holds_P1:
        try:
            return odebound.threshold_lambda(envelope_spec(rep, 1.0)).lam
        except (odebound.HypothesesViolated, ArithmeticError):
            return 0.0
    return math.inf if rep.holds_P2 else 0.0


# --- Burgers decay --------------------------------------------------------------------

@dataclass
class BurgersDecay:
    rows: list
    sup2: np.ndarray
    times: np.ndarray
    slopes: dict
    sup2_slope: float


def burgers_decay(cfg: RunConfig) -> BurgersDecay:
    params = cfg.params.build()
    grid = Grid(params.dim, cfg.grid.L, cfg.grid.N)
    vel = cfg.velocity.build().initial_velocity()
    flow = BurgersFlow(vel)
    b = cfg.burgers
    ts = np.geomspace(b.t_min, b.t_max, b.n_times)
    rows, sup2 = decay_report(flow, list(b.l_values), ts, grid, b.comoving)
    slopes = {l: fit_loglog(ts, [r.norm for r in rows if r.l == l]) for l in b.l_values}
    return BurgersDecay(rows, sup2, ts, slopes, fit_loglog(ts, sup2))


# --- Picard --------------------------------------------------------------------------

@dataclass
class PicardStudy:
    result: PicardResult
    direct_gap: float
    self_convergence: float


def picard_study(cfg: RunConfig) -> PicardStudy:
    """Picard iterates, their distance to the direct solver and the direct N vs 2N gap."""
    setup = build(cfg)
    T = cfg.solver.end_time
    pr = picard_solve(setup.init, setup.flow, setup.params, cfg.solver, horizon=T)
    direct = run_fixed(setup.init, setup.flow, setup.params, cfg.solver, pr.times)
    g = setup.grid
    gap = max(l2_norm(a - b, g) for a, b in zip(pr.final.arrays(), direct.arrays()))
    fine_cfg = dataclasses.replace(cfg, grid=dataclasses.replace(cfg.grid, N=2 * cfg.grid.N))
    fine_setup = build(fine_cfg)
    fine_times = np.linspace(0.0, T, 2 * (len(pr.times) - 1) + 1)
    fine = run_fixed(fine_setup.init, fine_setup.flow, fine_setup.params, cfg.solver, fine_times)
    sub = (Ellipsis,) + (slice(None, None, 2),) * g.dim
    sc = max(l2_norm(a - b[sub], g) for a, b in zip(direct.arrays(), fine.arrays()))
    return PicardStudy(pr, gap, sc)


# --- R-independence ------------------------------------------------------------------

@dataclass
class RStudyRow:
    R: float
    slope: float
    stderr: float
    mass_drift: float
    halted: Optional[str]


def r_study(cfg: RunConfig) -> list:
    rows = []
    for R in cfg.rstudy.radii:
        c = dataclasses.replace(cfg, density=dataclasses.replace(cfg.density, support_radius=float(R)))
        res = simulate(c)
        fit = z_fit(res, c)
        m = res.series.column("m")
        rows.append(RStudyRow(float(R), fit.slope, fit.stderr, float(np.max(np.abs(m / m[0] - 1))),
                              res.trajectory.halt.reason if res.trajectory.halt else None))
    return rows
