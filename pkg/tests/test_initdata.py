import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from vacflow.fields import Field, Grid
from vacflow.initdata import (ConstraintViolated, DensityFamily, NegativeDensity, SupportExceedsBox,
                              VelocityFamily, build_density, build_velocity, cutoff,
                              density_from_phi, density_from_varphi, smallness_report, to_reform,
                              transition)
from vacflow.regime import Params

P = Params(gamma=2, delta=2, alpha=0.5, beta=0, dim=1)


@settings(max_examples=50, deadline=None)
@given(st.floats(-5, 5))
def test_transition_bounds(s):
    F = float(transition(np.array([s]))[0])
    assert 0 <= F <= 1
    if s <= 1:
        assert F == 1
    if s >= 2:
        assert F == 0


def test_transition_monotone():
    s = np.linspace(1, 2, 101)
    assert np.all(np.diff(transition(s)) <= 0)


def test_sigma_floor():
    with pytest.raises(ConstraintViolated):
        DensityFamily("bump_power", 0.01, sigma=2.0).check(P)
    DensityFamily("bump_power", 0.01, sigma=3.5).check(P)


def test_cutoff_support_and_box():
    g = Grid(1, 16.0, 256)
    f = cutoff(Field.scalar(g, np.ones(g.shape)), 3.0)
    assert np.all(f.values[np.abs(g.axis) >= 6] == 0)
    assert np.all(f.values[np.abs(g.axis) <= 3] == 1)
    with pytest.raises(SupportExceedsBox):
        cutoff(f, 8.0)


def test_reform_roundtrip():
    g = Grid(1, 8.0, 128)
    rho = build_density(DensityFamily("gaussian", 0.1, support_radius=2.0), g)
    init = to_reform(rho, P)
    assert np.allclose(density_from_phi(init.phi0.values, P), rho.values, rtol=1e-12, atol=1e-300)
    assert np.allclose(density_from_varphi(init.varphi0.values, P), rho.values, rtol=1e-12, atol=1e-300)
    with pytest.raises(NegativeDensity):
        to_reform(Field.scalar(g, -rho.values - 1e-3), P)


def test_velocity_gap_check():
    g = Grid(1, 4.0, 64)
    with pytest.raises(ConstraintViolated):
        build_velocity(VelocityFamily(A=((0.5,),), kappa=0.4), g)
    u, init = build_velocity(VelocityFamily(A=((1.0,),), kappa=0.4), g)
    init.check_consistency(g.coords)
    assert np.allclose(u.values, g.coords)


def test_perturbed_velocity_consistent():
    fam = VelocityFamily(A=((1.0, 0.0), (0.0, 1.0)), eps2=0.2, direction=(1.0, 0.5), ell=0.7)
    g = Grid(2, 3.0, 16)
    _, init = build_velocity(fam, g, check_gap=False)
    init.check_consistency(g.coords, tol=1e-5)
    assert np.allclose(init.u0(np.zeros((2, 1))), 0)


def test_smallness_report():
    g = Grid(1, 8.0, 128)
    init = to_reform(build_density(DensityFamily("gaussian", 1e-4, support_radius=2.0), g), P)
    rep = smallness_report(init, 1.0, P)
    assert rep.ok and rep.total == pytest.approx(rep.phi_h3 + rep.varphi_h3)
    assert not smallness_report(init, 0.0, P).ok
