import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from vacflow.burgers import (BurgersFlow, InitialVelocity, SingularJacobian, decay_report,
                             fit_loglog, kappa_distance, singular_time, vacuum_points)
from vacflow.fields import Grid
from vacflow.initdata import VelocityFamily


def test_linear_flow_closed_form(rng):
    A = np.array([[1.0, 0.3], [-0.2, 0.8]])
    flow = BurgersFlow(InitialVelocity.linear(A))
    x = rng.uniform(-5, 5, size=(2, 50))
    for t in (0.0, 0.5, 3.0):
        u, G = flow.eval(t, x)
        K = np.linalg.inv(np.eye(2) + t * A)
        assert np.allclose(G, (K @ A)[:, :, None], atol=1e-12)
        assert np.allclose(u, K @ A @ x, atol=1e-10)


@settings(max_examples=25, deadline=None)
@given(t=st.floats(0, 20), x=st.floats(-10, 10), eps=st.floats(0, 0.3))
def test_inversion_roundtrip(t, x, eps):
    fam = VelocityFamily(A=((1.0,),), eps2=eps, ell=1.0, normalize=False)
    flow = BurgersFlow(fam.initial_velocity())
    x0 = flow.invert(t, np.array([x]))
    assert flow.forward_map(t, x0)[0] == pytest.approx(x, abs=1e-9)


def test_eval_full_hessian_matches_differences():
    fam = VelocityFamily(A=((1.0, 0.2), (0.0, 0.9)), eps2=0.2, direction=(1.0, -0.5), ell=1.3,
                         normalize=False)
    flow = BurgersFlow(fam.initial_velocity())
    x = np.array([[0.4], [-0.3]])
    t, h = 1.5, 1e-5
    _, G, H = flow.eval_full(t, x)
    for k in range(2):
        e = np.zeros_like(x)
        e[k] = h
        fd = (flow.eval(t, x + e)[1] - flow.eval(t, x - e)[1]) / (2 * h)
        assert np.allclose(H[:, :, k], fd, atol=1e-7)


def test_singular_time_and_jacobian():
    init = InitialVelocity.linear([[-1.0]])
    assert singular_time(np.zeros((1, 3)), init.grad_u0) == pytest.approx(1.0)
    with pytest.raises(SingularJacobian):
        BurgersFlow(init).grad_along(1.0, np.zeros((1, 2)))
    assert singular_time(np.zeros((1, 0)), init.grad_u0) == np.inf


def test_vacuum_points():
    g = Grid(1, 2.0, 8)
    rho = np.where(np.abs(g.axis) < 1, 1.0, 0.0)
    pts = vacuum_points(rho, g)
    assert np.all(np.abs(pts) >= 1)


def test_kappa_distance():
    assert kappa_distance(np.diag([2.0, 3.0])) == pytest.approx(2.0)
    assert kappa_distance(np.array([[0.0, -1.0], [1.0, 0.0]])) == pytest.approx(1.0)


def test_consistency_check_catches_bad_gradient():
    good = InitialVelocity.linear([[2.0]])
    good.check_consistency(np.linspace(-1, 1, 5)[None])
    bad = InitialVelocity(1, good.u0, lambda x: np.ones((1, 1) + x.shape[1:]))
    with pytest.raises(ValueError):
        bad.check_consistency(np.linspace(-1, 1, 5)[None])


def test_decay_slopes_1d():
    fam = VelocityFamily(A=((1.0,),), eps2=0.3, direction=(1.0,), center=(0.3,))
    flow = BurgersFlow(fam.initial_velocity())
    ts = np.geomspace(1, 100, 15)
    rows, sup2 = decay_report(flow, [2, 3], ts, Grid(1, 8.0, 256))
    for l in (2, 3):
        s = fit_loglog(ts, [r.norm for r in rows if r.l == l])
        assert s == pytest.approx(0.5 - (l + 1), abs=0.15)
