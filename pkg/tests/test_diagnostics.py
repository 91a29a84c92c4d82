import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from vacflow.diagnostics import (BoundViolated, DiagnosticsSeries, FitDegenerate, bdf2_derivative,
                                 blowup_monitor, conserved_arrays, fit_decay, kinetic_lower_bound,
                                 support_radius, weighted_energy)
from vacflow.fields import Grid
from vacflow.solver import ReformState


@settings(max_examples=50, deadline=None)
@given(h0=st.floats(0.01, 1), h1=st.floats(0.01, 1), a=st.floats(-3, 3), b=st.floats(-3, 3),
       c=st.floats(-3, 3))
def test_bdf2_exact_on_quadratics(h0, h1, a, b, c):
    ts = (0.0, h0, h0 + h1)
    f = [a + b * t + c * t * t for t in ts]
    assert bdf2_derivative(ts, f) == pytest.approx(b + 2 * c * ts[2], abs=1e-7)


def test_conserved_and_cauchy_schwarz(rng):
    g = Grid(1, 4.0, 64)
    rho = np.exp(-g.axis**2)
    u = rng.normal(size=(1,) + g.shape)
    c = conserved_arrays(rho, u, g)
    assert c.m == pytest.approx(np.sqrt(np.pi), rel=1e-6)
    assert c.cauchy_schwarz_ok
    assert c.E_k >= c.P_norm**2 / (2 * c.m)


def test_kinetic_bound_violation():
    t = np.array([0.0, 1.0])
    v = kinetic_lower_bound(t, [1.0, 1.0], [[1.0], [1.0]], [0.5, 0.6], [1.0, 1.2])
    assert v.applicable and v.ok
    with pytest.raises(BoundViolated):
        kinetic_lower_bound(t, [1.0, 1.0], [[1.0], [1.0]], [0.5, 0.3], [1.0, 1.2])
    assert not kinetic_lower_bound(t, [1.0, 1.0], [[0.0], [0.0]], [0, 0], [0, 0]).applicable


def test_fit_decay_power_law():
    t = np.linspace(0, 50, 100)
    fit = fit_decay(t, 3 * (1 + t) ** -1.7, (1, 50))
    assert fit.slope == pytest.approx(-1.7, abs=1e-12)
    assert fit.passes(-1.8) and not fit.passes(-2.5)
    with pytest.raises(FitDegenerate):
        fit_decay(t[:5], np.ones(5))


def test_weighted_energy_weights():
    g = Grid(1, np.pi, 64)
    x = g.axis
    st0 = ReformState.from_arrays(0.0, g, np.zeros(g.shape), np.sin(x), np.zeros((1,) + g.shape))
    st1 = ReformState.from_arrays(3.0, g, np.zeros(g.shape), np.sin(x), np.zeros((1,) + g.shape))
    e0, e1 = weighted_energy(st0, 2.5, 3.0), weighted_energy(st1, 2.5, 3.0)
    assert e0.U == 0 and e0.Z == pytest.approx(e0.Y)
    # Y_0 carries (1+t)^(-n) so the weighted norm shrinks at least like 4^(-n + 3)
    assert e1.Y < e0.Y * 4 ** 0.5
    assert e1.Y_k == e0.Y_k


def test_support_radius():
    g = Grid(1, 8.0, 64)
    v = np.where(np.abs(g.axis) < 2.1, 1.0, 0.0)
    st0 = ReformState.from_arrays(0.0, g, v, v, np.zeros((1,) + g.shape))
    assert support_radius(st0) == pytest.approx(2.0)


def test_series_and_monitor(tmp_path):
    s = DiagnosticsSeries()
    s.append({"t": 0.0, "grad_u_sup": 1.0, "dt": 0.1, "P": (1.0,)})
    s.append({"t": 0.5, "grad_u_sup": 80.0, "dt": 1e-12, "P": (1.0,)})
    with pytest.raises(ValueError):
        s.append({"t": 0.5, "grad_u_sup": 1.0})
    kinds = [e.kind for e in blowup_monitor(s)]
    assert kinds == ["gradient", "dt_collapse"]
    s.to_csv(tmp_path / "d.csv")
    lines = (tmp_path / "d.csv").read_text().splitlines()
    assert len(lines) == 3 and lines[0].startswith("t,m,P")
    assert math.isnan(float(lines[1].split(",")[1]))
