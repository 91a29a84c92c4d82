"""Comparison ODE  Z' + b Z/(1+t) = C1 (1+t)^D1 Z^a + C2 (1+t)^D2 Z.

Closed form, adaptive numerical integration, the global-existence threshold
on Z0, and a fitted-envelope test for measured energy series.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
from scipy import integrate, optimize


class QuadratureFailure(ArithmeticError):
    pass


class HypothesesViolated(ValueError):
    def __init__(self, failures):
        self.failures = list(failures)
        self.lam = 0.0
        super().__init__("hypotheses violated: " + "; ".join(self.failures))


class FitDegenerate(ValueError):
    pass


class ExtrapolationWarning(UserWarning):
    pass


@dataclass(frozen=True)
class OdeSpec:
    a: float
    b: float
    C1: float
    C2: float
    D1: float
    D2: float
    Z0: float = 1.0

    def __post_init__(self):
        if not self.a > 1:
            raise ValueError("need a > 1")
        if self.C1 < 0 or self.C2 < 0:
            raise ValueError("need C1, C2 >= 0")

    @property
    def M(self) -> float:
        return self.D1 - (self.a - 1) * self.b

    def hypotheses(self) -> list[str]:
        """Failed members of {D1 - (a-1) b < -1, D2 < -1}."""
        out = []
        if not self.M < -1:
            out.append("M = D1 - (a-1)*b < -1")
        if not self.D2 < -1:
            out.append("D2 < -1")
        return out

    @property
    def extrapolated(self) -> bool:
        return self.D2 == -1

    def with_(self, **kw) -> "OdeSpec":
        return replace(self, **kw)


@dataclass(frozen=True)
class Blowup:
    time: float


def _log_linear_factor(spec: OdeSpec, t, scale=1.0):
    """log of exp(scale*C2/(D2+1) ((1+t)^(D2+1) - 1)); log-antiderivative when D2 = -1."""
    if spec.C2 == 0:
        return np.zeros_like(np.asarray(t, dtype=float))
    if spec.D2 == -1:
        return scale * spec.C2 * np.log1p(t)
    p = spec.D2 + 1
    return scale * spec.C2 / p * np.expm1(p * np.log1p(t))


def _integrand(spec: OdeSpec, s):
    return np.exp(spec.M * np.log1p(s) + _log_linear_factor(spec, s, spec.a - 1))


def weight_integral(spec: OdeSpec, t: float, epsabs=1e-15, epsrel=1e-13, start: float = 0.0) -> float:
    """Integral of the weight over [start, t] by adaptive quadrature on geometrically growing panels."""
    if t <= start:
        return 0.0
    f = lambda s: _integrand(spec, s)
    total, lo = 0.0, float(start)
    while lo < t:
        hi = min(4.0 * (1.0 + lo) - 1.0, t)
        val, err, info, *msg = integrate.quad(f, lo, hi, epsabs=epsabs, epsrel=epsrel, limit=200,
                                              full_output=1)
        if msg and err > 1e-8 * max(abs(val), 1e-300):
            raise QuadratureFailure(msg[0])
        total += val
        lo = hi
    return float(total)


def _denominator(spec: OdeSpec, t: float) -> float:
    return spec.Z0 ** (-(spec.a - 1)) - (spec.a - 1) * spec.C1 * weight_integral(spec, t)


def blowup_time(spec: OdeSpec, horizon: float = 1e12) -> float:
    """Root of the closed-form denominator, or inf if it stays positive up to ``horizon``."""
    if spec.C1 == 0:
        return math.inf
    if _denominator(spec, 0.0) <= 0:
        return 0.0
    hi = 1.0
    while _denominator(spec, hi) > 0:
        if hi >= horizon:
            return math.inf
        hi = min(hi * 4, horizon)
    lo = 0.0 if hi <= 1.0 else hi / 4
    return float(optimize.brentq(lambda s: _denominator(spec, s), lo, hi, xtol=1e-15, rtol=1e-15))


def closed_form(spec: OdeSpec, t: float):
    """Exact Z(t), or :class:`Blowup` when t lies at or beyond the blow-up time."""
    if spec.extrapolated:
        warnings.warn("D2 = -1 lies outside D2 < -1; log antiderivative used", ExtrapolationWarning)
    den = _denominator(spec, t) if spec.C1 else spec.Z0 ** (-(spec.a - 1))
    if den <= 0:
        return Blowup(blowup_time(spec))
    lin = -spec.b * math.log1p(t) + float(_log_linear_factor(spec, t))
    return math.exp(lin) * den ** (-1.0 / (spec.a - 1))


def trajectory(spec: OdeSpec, ts) -> np.ndarray:
    """closed_form on an increasing array of times, with I(t) accumulated panel by panel; inf after blow-up."""
    ts = np.asarray(ts, dtype=float)
    if np.any(np.diff(ts) < 0) or (ts.size and ts[0] < 0):
        raise ValueError("times must be nonnegative and increasing")
    f = lambda s: _integrand(spec, s)
    I = np.zeros(ts.size)
    acc, prev = 0.0, 0.0
    with np.errstate(over="ignore"):
        for i, t in enumerate(ts):
            if spec.C1 and t > prev:
                acc += weight_integral(spec, t, start=prev)
            prev = max(prev, t)
            I[i] = acc
    den = spec.Z0 ** (-(spec.a - 1)) - (spec.a - 1) * spec.C1 * I
    lin = -spec.b * np.log1p(ts) + _log_linear_factor(spec, ts)
    out = np.full(ts.size, np.inf)
    ok = den > 0
    out[ok] = np.exp(lin[ok]) * den[ok] ** (-1.0 / (spec.a - 1))
    return out


@dataclass(frozen=True)
class Threshold:
    lam: float
    J_inf: float
    error: float
    reason: str = ""


def threshold_lambda(spec: OdeSpec, rtol: float = 1e-12) -> Threshold:
    """Largest Z0 for which the closed form never blows up (Z0 in the spec is ignored)."""
    if spec.C1 == 0:
        return Threshold(math.inf, 0.0, 0.0, "C1 = 0: linear equation")
    bad = spec.hypotheses()
    if bad:
        raise HypothesesViolated(bad)
    f = lambda s: _integrand(spec, s)
    T = 1e4
    head, e1 = integrate.quad(f, 0.0, T, epsabs=0.0, epsrel=rtol, limit=1000)
    tail, e2 = integrate.quad(f, T, np.inf, epsabs=0.0, epsrel=rtol, limit=1000)
    # integrand <= (1+s)^M exp((a-1) C2 / |D2+1|) beyond T
    tail_bound = math.exp((spec.a - 1) * spec.C2 / abs(spec.D2 + 1)) * (1 + T) ** (spec.M + 1) / abs(spec.M + 1)
    if tail > tail_bound * (1 + 1e-9):
        raise QuadratureFailure("tail integral exceeds its analytic bound")
    J = head + tail
    lam = ((spec.a - 1) * spec.C1 * J) ** (-1.0 / (spec.a - 1))
    err_J = e1 + e2
    err_lam = lam * err_J / (J * (spec.a - 1))
    return Threshold(float(lam), float(J), float(err_lam))


@dataclass
class Integration:
    t: np.ndarray
    Z: np.ndarray
    blowup: Optional[Blowup] = None
    message: str = ""


def _rhs(spec: OdeSpec):
    a, b, C1, C2, D1, D2 = spec.a, spec.b, spec.C1, spec.C2, spec.D1, spec.D2

    def f(t, z):
        s = 1.0 + t
        return -b * z / s + C1 * s**D1 * z**a + C2 * s**D2 * z

    return f


def integrate_ode(spec: OdeSpec, t_end: float, rtol: float = 1e-12, t_eval=None) -> Integration:
    """Adaptive DOP853 integration; stops at the blow-up guard Z > max(1, Z0) * 1e6 / rtol."""
    cap = max(1.0, spec.Z0) * 1e6 / rtol

    def guard(t, z):
        return z[0] - cap

    guard.terminal = True
    guard.direction = 1
    sol = integrate.solve_ivp(_rhs(spec), (0.0, t_end), [spec.Z0], method="DOP853", rtol=rtol,
                              atol=1e-300, events=guard, dense_output=True)
    blow = None
    t_stop = float(sol.t[-1])
    if sol.status == 1 and sol.t_events[0].size:
        blow = Blowup(float(sol.t_events[0][0]))
    elif sol.status == -1:
        # step-size underflow: treat as blow-up evidence
        blow = Blowup(t_stop)
    if t_eval is None:
        return Integration(sol.t, sol.y[0], blow, sol.message)
    te = np.asarray(t_eval, dtype=float)
    te = te[te <= t_stop]
    return Integration(te, sol.sol(te)[0], blow, sol.message)


integrate_spec = integrate_ode


@dataclass
class EnvelopeVerdict:
    bounded: bool
    C1: float
    C2: float
    violated_at: Optional[float] = None
    worst_ratio: float = 0.0

    @property
    def verdict(self) -> str:
        return "bounded_by" if self.bounded else "violated_at"


def envelope_check(t, values, spec: OdeSpec, fit_fraction: float = 0.1, slack: float = 0.0,
                   rtol: float = 1e-7) -> EnvelopeVerdict:
    """Fit C1, C2 >= 0 on the first ``fit_fraction`` of the series, then test the rest.

    The prefactors are fitted by nonnegative least squares in log space of the
    closed-form trajectory against the samples (started from an NNLS fit of
    the differential relation).  The remainder passes when every sample lies
    below (1 + slack) times the fitted solution, up to ``rtol``.
    """
    t = np.asarray(t, dtype=float)
    z = np.asarray(values, dtype=float)
    if t.size < 20:
        raise FitDegenerate("need at least 20 samples")
    if np.any(np.diff(t) <= 0):
        raise FitDegenerate("time stamps must increase")
    if np.any(z <= 0):
        raise FitDegenerate("values must be positive")
    nfit = max(int(math.ceil(fit_fraction * t.size)), 5)
    tf, zf = t[:nfit], z[:nfit]
    base = spec.with_(Z0=float(z[0]))

    # initial guess from the differential relation
    dz = np.gradient(zf, tf, edge_order=2)
    lhs = dz + base.b * zf / (1 + tf)
    A = np.column_stack([(1 + tf) ** base.D1 * zf**base.a, (1 + tf) ** base.D2 * zf])
    x0, _ = optimize.nnls(A, lhs)

    def shoot(logc):
        c = np.exp(np.clip(logc, -300.0, 300.0))
        traj = trajectory(base.with_(C1=float(c[0]), C2=float(c[1])), tf)
        with np.errstate(divide="ignore", invalid="ignore"):
            r = np.log(traj) - np.log(zf)
        return np.where(np.isfinite(r), r, 1e3)

    starts = [np.log(np.maximum(x0, 1e-12))]
    starts += [np.array([p, q]) for p in (-8.0, -2.0, 1.0) for q in (-8.0, -2.0, 1.0)]
    best = None
    for s0 in starts:
        res = optimize.least_squares(shoot, s0, xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=400)
        if best is None or res.cost < best.cost:
            best = res
    C1, C2 = np.exp(best.x).tolist()
    fitted = base.with_(C1=C1, C2=C2)
    rest_t, rest_z = t[nfit:], z[nfit:]
    env = trajectory(fitted, rest_t)
    ratio = rest_z / env
    limit = (1 + slack) * (1 + rtol)
    over = np.nonzero(ratio > limit)[0]
    worst = float(np.max(ratio)) if ratio.size else 0.0
    if over.size:
        return EnvelopeVerdict(False, C1, C2, float(rest_t[over[0]]), worst)
    return EnvelopeVerdict(True, C1, C2, None, worst)


def write_trajectory_csv(path, t, Z) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write("t,Z\n")
        for ti, zi in zip(t, Z):
            fh.write(f"{float(ti)!r},{float(zi)!r}\n")
