"""Observers for conservation, energy bounds, weighted norms, vacuum residuals and blow-up."""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import stats

from .fields import Grid, _pointwise_norm, diff, grad_array, sobolev_array
from .regime import Params, RegimeReport
from .solver import Background, ReformState, _advect, grad_u_sup, to_physical


class BoundViolated(AssertionError):
    def __init__(self, what, t):
        self.what, self.t = what, t
        super().__init__(f"{what} violated first at t={t}")


class FitDegenerate(ValueError):
    pass


# --- conservation -------------------------------------------------------------

@dataclass(frozen=True)
class ConservedQuantities:
    m: float
    P: tuple
    E_k: float
    u_sup_support: float

    @property
    def P_norm(self) -> float:
        return float(np.sqrt(np.sum(np.square(self.P))))

    def cauchy_schwarz_ok(self) -> bool:
        return self.P_norm <= math.sqrt(2 * self.m * self.E_k) * (1 + 1e-14) + 1e-300


def conserved_arrays(rho: np.ndarray, u: np.ndarray, grid: Grid, floor: float = 0.0) -> ConservedQuantities:
    dv = grid.cell_volume
    m = float(np.sum(rho) * dv)
    P = tuple(float(np.sum(rho * u[i]) * dv) for i in range(grid.dim))
    speed = _pointwise_norm(u, grid.dim)
    E = float(0.5 * np.sum(rho * speed**2) * dv)
    mask = rho > floor
    usup = float(np.max(speed[mask])) if np.any(mask) else 0.0
    return ConservedQuantities(m, P, E, usup)


def conserved(state: ReformState, params: Params, bg: Background, floor: float = 0.0) -> ConservedQuantities:
    ph = to_physical(state, params, bg=bg)
    return conserved_arrays(ph.rho.values, ph.u.values, state.grid, floor)


@dataclass
class KineticVerdict:
    applicable: bool
    ok: bool
    worst_energy_ratio: float = math.nan
    worst_speed_ratio: float = math.nan


def kinetic_lower_bound(t, m, P, E, u_sup, tol: float = 1e-3, raise_on_fail: bool = True) -> KineticVerdict:
    """E_k(t) >= |P(0)|^2 / (2 m(0)) and |u(t)|_inf >= |P(0)| / m(0), both up to (1 - tol)."""
    P = np.atleast_2d(np.asarray(P, dtype=float))
    if P.shape[0] != len(t):
        P = P.T
    P0 = float(np.linalg.norm(P[0]))
    if P0 == 0 or m[0] == 0:
        return KineticVerdict(False, True)
    e_ratio = np.asarray(E) / (P0**2 / (2 * m[0]))
    s_ratio = np.asarray(u_sup) / (P0 / m[0])
    for name, r in (("kinetic energy bound", e_ratio), ("sup velocity bound", s_ratio)):
        bad = np.nonzero(r < 1 - tol)[0]
        if bad.size and raise_on_fail:
            raise BoundViolated(name, float(t[bad[0]]))
    ok = bool(np.all(e_ratio >= 1 - tol) and np.all(s_ratio >= 1 - tol))
    return KineticVerdict(True, ok, float(e_ratio.min()), float(s_ratio.min()))


# --- weighted energy ----------------------------------------------------------

@dataclass(frozen=True)
class WeightedEnergy:
    t: float
    Y_k: tuple
    U_k: tuple
    Y: float
    U: float
    Z: float
    linf_ratio: float


def weighted_energy(state: ReformState, n: float, m: float, order: int = 2) -> WeightedEnergy:
    g = state.grid
    W = np.concatenate([state.phi.values[None], state.w.values])
    sW = sobolev_array(W, g, 3, order)
    sV = sobolev_array(state.varphi.values, g, 3, order)
    s = 1.0 + state.t
    Y2 = sum(s ** (2 * (k - n)) * sW.l2[k] ** 2 for k in range(4))
    U2 = sum(s ** (2 * (k - m)) * sV.l2[k] ** 2 for k in range(4))
    Y = math.sqrt(Y2)
    denom = s ** ((2 * n - 3) / 2) * Y
    ratio = sW.linf / denom if denom > 0 else 0.0
    return WeightedEnergy(state.t, sW.l2, sV.l2, Y, math.sqrt(U2), math.sqrt(Y2 + U2), ratio)


def weighted_energy_report(state: ReformState, report: RegimeReport, order: int = 2) -> WeightedEnergy:
    return weighted_energy(state, report.n, report.m, order)


# --- decay fits -----------------------------------------------------------------

@dataclass(frozen=True)
class DecayFit:
    slope: float
    stderr: float
    intercept: float
    npoints: int

    def passes(self, predicted: float, slack: float = 0.5) -> bool:
        """One-sided: measured slope must not exceed predicted + slack."""
        return self.slope <= predicted + slack


def fit_decay(t, values, t_window: Optional[tuple] = None, min_points: int = 20) -> DecayFit:
    t = np.asarray(t, dtype=float)
    y = np.asarray(values, dtype=float)
    if t_window is not None:
        sel = (t >= t_window[0]) & (t <= t_window[1])
        t, y = t[sel], y[sel]
    if t.size < min_points:
        raise FitDegenerate(f"need {min_points} samples, got {t.size}")
    if np.any(y <= 0):
        raise FitDegenerate("values must be positive")
    res = stats.linregress(np.log1p(t), np.log(y))
    return DecayFit(float(res.slope), float(res.stderr), float(res.intercept), int(t.size))


# --- vacuum residual ------------------------------------------------------------

def bdf2_derivative(t3, f3):
    """Variable-step second-order backward difference at the newest of three samples."""
    (t0, t1, t2), (f0, f1, f2) = t3, f3
    h1, h0 = t2 - t1, t1 - t0
    w = h1 / h0
    return ((1 + 2 * w) / (1 + w) * f2 - (1 + w) * f1 + w * w / (1 + w) * f0) / h1


def vacuum_residual(states: Sequence[ReformState], bg: Background, params: Params,
                    vacuum_floor: float = 1e-12, order: int = 2, scheme: str = "central_filtered") -> float:
    """sup over {rho < floor} of |w_t + u . grad w + w . grad u_hat| at the newest state.

    u_hat solves the pressureless equation exactly, so this equals the residual
    of u_t + u . grad u on the vacuum set.
    """
    if len(states) < 3:
        raise ValueError("need three consecutive states")
    s0, s1, s2 = states[-3:]
    g = s2.grid
    wt = bdf2_derivative((s0.t, s1.t, s2.t), (s0.w.values, s1.w.values, s2.w.values))
    uh, Gh, _, _ = bg.at(s2.t)
    w = s2.w.values
    adv = _advect(w, w + uh, g.dim, g.h, scheme if scheme == "upwind1" else "central", order)
    res = wt + adv + np.einsum("j...,ij...->i...", w, Gh)
    rho = to_physical(s2, params, bg=bg).rho.values
    mask = rho < vacuum_floor
    if not np.any(mask):
        return 0.0
    return float(np.max(_pointwise_norm(res, g.dim)[mask]))


# --- blow-up and support ----------------------------------------------------------

@dataclass(frozen=True)
class Event:
    t: float
    kind: str
    value: float

    def to_text(self) -> str:
        return f"t={self.t!r} kind={self.kind} value={self.value!r}"


def blowup_monitor(series: "DiagnosticsSeries", grad_threshold: float = 50.0, dt_floor: float = 1e-10) -> list:
    events = []
    for row in series.rows:
        if row["grad_u_sup"] > grad_threshold:
            events.append(Event(row["t"], "gradient", row["grad_u_sup"]))
        dt = row.get("dt", math.inf)
        if dt < dt_floor:
            events.append(Event(row["t"], "dt_collapse", dt))
    return events


@dataclass(frozen=True)
class SupportStatus:
    radius: float
    envelope: float
    ok: bool


def support_radius(state: ReformState, thresh: float = 1e-12) -> float:
    g = state.grid
    live = (np.abs(state.varphi.values) > thresh) | (np.abs(state.phi.values) > thresh) \
        | (_pointwise_norm(state.w.values, g.dim) > thresh)
    return float(np.max(g.radius[live])) if np.any(live) else 0.0


def support_tracker(state: ReformState, R0: float, bg: Background, grad_sup: Optional[float] = None,
                    margin_cells: int = 4) -> SupportStatus:
    """Support radius against R0 exp(sup|grad u_hat| t); ok while the support stays off the box edge."""
    g = state.grid
    r = support_radius(state)
    if grad_sup is None:
        G0 = bg.at(0.0)[1]
        grad_sup = float(np.max(np.sqrt(np.sum(G0**2, axis=(0, 1)))))
    env = R0 * math.exp(grad_sup * state.t)
    edge = g.L - margin_cells * g.h
    ok = r <= edge
    return SupportStatus(r, env, ok)


# --- series and recorder ------------------------------------------------------------

COLUMNS = ("t", "m", "P", "E_k", "u_sup", "u_sup_support", "grad_u_sup", "Z", "Y", "U", "linf_ratio",
           "vacuum_residual", "support_radius", "clamped_mass", "dual_gap")


class DiagnosticsSeries:
    def __init__(self):
        self.rows: list = []

    def append(self, row: dict) -> None:
        if self.rows and not row["t"] > self.rows[-1]["t"]:
            raise ValueError("diagnostic time stamps must increase strictly")
        self.rows.append(row)

    def column(self, name) -> np.ndarray:
        return np.array([r[name] for r in self.rows], dtype=float)

    def __len__(self):
        return len(self.rows)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="\n") as fh:
            fh.write(",".join(COLUMNS) + "\n")
            for r in self.rows:
                vals = []
                for c in COLUMNS:
                    v = r.get(c, math.nan)
                    if isinstance(v, tuple):
                        v = v[0] if len(v) == 1 else float(np.linalg.norm(v))
                    vals.append(repr(float(v)))
                fh.write(",".join(vals) + "\n")


class Recorder:
    """Stride observer plus per-step hook that fills a DiagnosticsSeries."""

    def __init__(self, params: Params, n: float = 2.5, m: float = 3.0, vacuum_floor: float = 1e-12,
                 order: int = 2, scheme: str = "central_filtered", energy: bool = True,
                 residual: bool = True, R0: Optional[float] = None, halt_on_support: bool = False):
        self.params, self.n, self.m = params, n, m
        self.floor, self.order, self.scheme = vacuum_floor, order, scheme
        self.energy, self.residual = energy, residual
        self.R0, self.halt_on_support = R0, halt_on_support
        self.series = DiagnosticsSeries()
        self.recent: deque = deque(maxlen=3)
        self.residual_max = 0.0
        self.last_residual = math.nan
        self.clamped = 0.0
        self.last_dt = math.inf

    def on_step(self, state: ReformState, bg: Background, info) -> None:
        self.clamped += info.clamped_mass
        self.last_dt = info.dt
        if self.residual:
            self.recent.append(state)
            if len(self.recent) == 3:
                r = vacuum_residual(list(self.recent), bg, self.params, self.floor, self.order, self.scheme)
                self.last_residual = r
                self.residual_max = max(self.residual_max, r)

    def __call__(self, state: ReformState, bg: Background) -> None:
        from .solver import Halt
        if self.residual and not self.recent:
            self.recent.append(state)
        ph = to_physical(state, self.params, bg=bg, vacuum_floor=self.floor)
        c = conserved_arrays(ph.rho.values, ph.u.values, state.grid, self.floor)
        row = {"t": state.t, "m": c.m, "P": c.P, "E_k": c.E_k,
               "u_sup": float(np.max(_pointwise_norm(ph.u.values, state.grid.dim))),
               "u_sup_support": c.u_sup_support, "grad_u_sup": grad_u_sup(state, bg, self.order),
               "vacuum_residual": self.last_residual, "clamped_mass": self.clamped,
               "dual_gap": ph.gap, "dt": self.last_dt}
        if self.energy:
            we = weighted_energy(state, self.n, self.m, self.order)
            row.update(Z=we.Z, Y=we.Y, U=we.U, linf_ratio=we.linf_ratio)
        st = support_tracker(state, self.R0 or 0.0, bg)
        row["support_radius"] = st.radius
        self.series.append(row)
        if self.halt_on_support and not st.ok:
            raise Halt("support_wraparound", f"support radius {st.radius:.3f} reaches the box edge")
