"""Parameter admissibility, regime classification and derived constants.

All formulas are plain arithmetic so they also work on ``fractions.Fraction``
inputs, which the test-suite uses to check algebraic identities exactly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, fields
from typing import Mapping, Optional

VISCOSITY_MODELS = ("standard", "gradient_form", "laplacian_only")
FIVE_THIRDS = 5.0 / 3.0


class InadmissibleParams(ValueError):
    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("inadmissible parameters: " + "; ".join(self.violations))


class DivisionDegenerate(ArithmeticError):
    """2*alpha + beta == 0, so M1..M4 and the P0 constants are undefined."""


class NoActiveRegime(ValueError):
    pass


def validate(params) -> list[str]:
    """Return the list of violated base inequalities (empty when admissible).

    ``params`` may be a :class:`Params` or any mapping with the same keys.
    """
    get = params.get if isinstance(params, Mapping) else lambda k, d=None: getattr(params, k, d)
    gamma, delta = get("gamma"), get("delta")
    alpha, beta = get("alpha"), get("beta", 0.0)
    out = []
    if not gamma > 1:
        out.append("gamma > 1")
    if not delta > 1:
        out.append("delta > 1")
    if not alpha > 0:
        out.append("alpha > 0")
    if not 2 * alpha + 3 * beta >= 0:
        out.append("2*alpha + 3*beta >= 0")
    A = get("A", 1.0)
    if not A > 0:
        out.append("A > 0")
    kappa = get("kappa", 1.0)
    if not kappa > 0:
        out.append("kappa > 0")
    dim = get("dim", 3)
    if dim not in (1, 2, 3):
        out.append("dim in {1, 2, 3}")
    model = get("viscosity_model", "standard")
    if model not in VISCOSITY_MODELS:
        out.append(f"viscosity_model in {VISCOSITY_MODELS}")
    elif model == "laplacian_only" and beta != 0:
        out.append("laplacian_only requires beta = 0")
    return out


@dataclass(frozen=True)
class Params:
    gamma: float
    delta: float
    alpha: float
    beta: float = 0.0
    A: float = 1.0
    kappa: float = 0.4
    dim: int = 3
    viscosity_model: str = "standard"

    def __post_init__(self):
        bad = validate(self)
        if bad:
            raise InadmissibleParams(bad)

    def replace(self, **kw) -> "Params":
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d.update(kw)
        return Params(**d)


# --- individual constants ---------------------------------------------------

def r_constant(gamma):
    return -0.5 if gamma >= FIVE_THIRDS else 1.5 * gamma - 3


def ab_constants(gamma, k):
    """(A_k, B_k) coefficients of the first-order background-gradient terms."""
    return k - 0.5, 1.5 * gamma - 3 + k


def b_m_constant(gamma, delta, n, m):
    if gamma >= FIVE_THIRDS:
        return min(n - 0.5, 1.5 * delta - 3 + m)
    return min(1.5 * gamma - 3 + n, 1.5 * delta - 3 + m)


def m_constants(alpha, beta, delta):
    """(M1, M2, M3) ; raises DivisionDegenerate when 2*alpha + beta == 0."""
    s = 2 * alpha + beta
    if s == 0:
        raise DivisionDegenerate("2*alpha + beta = 0")
    M1 = (2 * alpha + 3 * beta) / s
    M3 = (delta - 1) ** 2 / (4 * s) + 4 * delta**2 * s / (delta - 1) ** 2 * M1**2 + 2 * M1 * delta
    M2 = -3 * delta + 1 + M3 / 2
    return M1, M2, M3


def F_quadratic(x, M1, delta):
    """x + delta^2 M1^2 / x + 2 M1 delta - 6 delta + 4 (minimised at x = delta*M1)."""
    return x + delta**2 * M1**2 / x + 2 * M1 * delta - 6 * delta + 4


def p0_constants(gamma, delta, M2, M3):
    """(M4, eps_star, nu_star, b_star) of the P0 energy inequality."""
    e = min((3 * gamma - 3) / 2, (-M2 - 1) / 2, 1) / 2
    M4 = e + M2
    nu = min((3 * gamma - 3) / (4 * (3 * gamma - 1)), (-M4 - 1) / (6 * delta - M3), 0.1)
    if gamma >= FIVE_THIRDS:
        b = min(2, 1.5 * delta - M3 / 4)
    else:
        b = min(1.5 * gamma - 0.5, 1.5 * delta - M3 / 4)
    return M4, e, nu, b


def iota_constant(gamma, delta):
    return (delta - 1) / (gamma - 1)


def default_eta(gamma, iota):
    return min(0.5 * 3 * iota * (gamma - 1) / (2 * iota - 1), 0.01)


def k_exponent(gamma, iota, n, eta):
    """K_{a,iota,eta} = 2 iota n - 3 iota - 1 + 2 iota eta - eta - 2 iota a, a = r + n."""
    a = r_constant(gamma) + n
    return 2 * iota * n - 3 * iota - 1 + 2 * iota * eta - eta - 2 * iota * a


# --- report -----------------------------------------------------------------

@dataclass
class RegimeReport:
    params: Params
    n: float
    m: float
    holds_P0: bool
    holds_P1: bool
    holds_P2: bool
    holds_P3: bool
    r: float
    A_k: tuple
    B_k: tuple
    b_m: float
    iota: float
    M1: Optional[float] = None
    M2: Optional[float] = None
    M3: Optional[float] = None
    M4: Optional[float] = None
    eps_star: Optional[float] = None
    nu_star: Optional[float] = None
    b_star: Optional[float] = None
    p0_applicable: bool = True
    notes: list = field(default_factory=list)
    predicted_Y_exponents: Optional[tuple] = None
    predicted_U_exponents: Optional[tuple] = None
    predicted_Z_exponent: Optional[float] = None
    active_path: Optional[str] = None

    def as_dict(self) -> dict:
        p = self.params
        out = {
            "gamma": p.gamma, "delta": p.delta, "alpha": p.alpha, "beta": p.beta,
            "A": p.A, "kappa": p.kappa, "dim": p.dim, "viscosity_model": p.viscosity_model,
            "n": self.n, "m": self.m,
            "holds_P0": self.holds_P0, "holds_P1": self.holds_P1,
            "holds_P2": self.holds_P2, "holds_P3": self.holds_P3,
            "M1": self.M1, "M2": self.M2, "M3": self.M3, "M4": self.M4,
            "r": self.r,
        }
        for k in range(4):
            out[f"A_{k}"] = self.A_k[k]
            out[f"B_{k}"] = self.B_k[k]
        out.update({
            "b_m": self.b_m, "eps_star": self.eps_star, "nu_star": self.nu_star,
            "b_star": self.b_star, "iota": self.iota, "active_path": self.active_path,
            "predicted_Z_exponent": self.predicted_Z_exponent,
        })
        for k in range(4):
            out[f"Y{k}_exponent"] = None if self.predicted_Y_exponents is None else self.predicted_Y_exponents[k]
            out[f"U{k}_exponent"] = None if self.predicted_U_exponents is None else self.predicted_U_exponents[k]
        return out

    def to_text(self) -> str:
        return "".join(f"{k} = {_fmt(v)}\n" for k, v in self.as_dict().items())

    def csv_header(self) -> str:
        return ",".join(self.as_dict().keys())

    def csv_row(self) -> str:
        return ",".join(_fmt(v) for v in self.as_dict().values())


def _fmt(v) -> str:
    if v is None:
        return "NA"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def derived_constants(params: Params, n: float = 2.5, m: float = 3.0, strict: bool = False) -> dict:
    """Every derived constant as a dict.

    The P0 constants are ``None`` when 2*alpha + beta == 0, unless ``strict``
    is set, in which case :class:`DivisionDegenerate` propagates.
    """
    g, d = params.gamma, params.delta
    out = {
        "r": r_constant(g),
        "A_k": tuple(ab_constants(g, k)[0] for k in range(4)),
        "B_k": tuple(ab_constants(g, k)[1] for k in range(4)),
        "b_m": b_m_constant(g, d, n, m),
        "iota": iota_constant(g, d),
        "M1": None, "M2": None, "M3": None, "M4": None,
        "eps_star": None, "nu_star": None, "b_star": None,
    }
    try:
        M1, M2, M3 = m_constants(params.alpha, params.beta, d)
    except DivisionDegenerate:
        if strict:
            raise
        return out
    M4, e, nu, b = p0_constants(g, d, M2, M3)
    out.update(M1=M1, M2=M2, M3=M3, M4=M4, eps_star=e, nu_star=nu, b_star=b)
    return out


def classify(params: Params, n: float = 2.5, m: float = 3.0) -> RegimeReport:
    g, d = params.gamma, params.delta
    c = derived_constants(params, n, m)
    notes = []
    applicable = c["M1"] is not None
    if not applicable:
        notes.append("2*alpha+beta = 0: P0 not applicable")
    holds_P0 = applicable and 0 < c["M1"] < 1.5 - 1 / d and c["M2"] < -1
    iota = c["iota"]
    rep = RegimeReport(
        params=params, n=n, m=m,
        holds_P0=bool(holds_P0),
        holds_P1=2 * params.alpha + 3 * params.beta == 0,
        holds_P2=d >= 2 * g - 1,
        holds_P3=d == g,
        p0_applicable=applicable, notes=notes,
        **c,
    )
    if (rep.holds_P2 or rep.holds_P3) and not (iota >= 2 or iota == 1):
        notes.append("iota outside {1} U [2, inf)")
    try:
        table = predicted_decay(rep)
    except NoActiveRegime:
        return rep
    rep.active_path = table.path
    rep.predicted_Y_exponents = table.Y
    rep.predicted_U_exponents = table.U
    rep.predicted_Z_exponent = table.Z
    return rep


@dataclass(frozen=True)
class DecayTable:
    path: str
    Y: tuple
    U: Optional[tuple]
    Z: float
    K: Optional[float] = None
    eta: Optional[float] = None
    smallness_ok: Optional[bool] = None


def predicted_decay(report: RegimeReport, eta: Optional[float] = None) -> DecayTable:
    """Exponents e such that the quantity is bounded by C (1+t)^e.

    Path priority: P0, then P1, then P2/P3.
    """
    n, m = report.n, report.m
    if report.holds_P0:
        rate = (1 - report.nu_star) * report.b_star
        return DecayTable(
            path="P0",
            Y=tuple(n - k - rate for k in range(4)),
            U=tuple(m - k - rate for k in range(4)),
            Z=-rate,
        )
    if report.holds_P1:
        rate = report.b_m
        return DecayTable(
            path="P1",
            Y=tuple(n - k - rate for k in range(4)),
            U=tuple(m - k - rate for k in range(4)),
            Z=-rate,
        )
    if report.holds_P2 or report.holds_P3:
        g, iota = report.params.gamma, report.iota
        if eta is None:
            eta = default_eta(g, iota)
        K = k_exponent(g, iota, n, eta)
        return DecayTable(
            path="P2" if report.holds_P2 else "P3",
            Y=tuple(-k - report.r for k in range(4)),
            U=None,
            Z=-(report.r + n),
            K=K,
            eta=eta,
            smallness_ok=K < -1,
        )
    raise NoActiveRegime("none of P0..P3 holds")


def eta_window(gamma, iota) -> float:
    """Upper end of the admissible eta interval (0, 3 iota (gamma-1) / (2 iota - 1))."""
    return 3 * iota * (gamma - 1) / (2 * iota - 1)


def p0_family_sweep(delta, a1, a2, etas, gamma=2.0):
    """Rows (eta, alpha, beta, M1, M2, holds_P0) for alpha = a1*eta, beta = a2*eta."""
    rows = []
    for eta in etas:
        p = Params(gamma=gamma, delta=delta, alpha=a1 * eta, beta=a2 * eta)
        rep = classify(p)
        rows.append((eta, p.alpha, p.beta, rep.M1, rep.M2, rep.holds_P0))
    return rows


def eta_for_minimum(delta, a1, a2) -> float:
    """eta placing x = (delta-1)^2 / (4 (2 a1 + a2) eta) at the minimiser delta*M1."""
    M1 = (2 * a1 + 3 * a2) / (2 * a1 + a2)
    if M1 <= 0:
        raise ValueError("need M1 > 0")
    return (delta - 1) ** 2 / (4 * (2 * a1 + a2) * delta * M1)


def is_finite_report(rep: RegimeReport) -> bool:
    vals = [v for v in rep.as_dict().values() if isinstance(v, float)]
    return all(math.isfinite(v) for v in vals)
