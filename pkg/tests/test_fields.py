import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from vacflow.fields import (Field, Grid, diff, discrete_identity_check, fourth_difference, inner,
                            lame, load_field, save_field, sobolev, stress_Q,
                            weighted_fourth_difference)


def _sine_grid(N, order):
    g = Grid(1, np.pi, N)
    x = g.axis
    return float(np.max(np.abs(diff(np.sin(x), 0, g.h, order) - np.cos(x))))


@pytest.mark.parametrize("order", [2, 4])
def test_diff_convergence_order(order):
    e1, e2 = _sine_grid(64, order), _sine_grid(128, order)
    assert np.log2(e1 / e2) == pytest.approx(order, abs=0.1)


def test_grid_rejects_odd():
    with pytest.raises(ValueError):
        Grid(1, 1.0, 9)
    with pytest.raises(ValueError):
        Grid(4, 1.0, 16)


def test_lame_on_trig_field():
    g = Grid(2, np.pi, 64)
    x, y = g.coords
    u = Field.vector(g, np.stack([np.sin(x) * np.cos(y), np.zeros_like(x)]))
    a, b = 0.7, 0.2
    Lu = lame(u, a, b, order=4).values
    # -a lap u - (a+b) grad div u, with div u = cos x cos y
    lap0 = -2 * np.sin(x) * np.cos(y)
    gd = np.stack([-np.sin(x) * np.cos(y), -np.cos(x) * np.sin(y)])
    exact = -a * np.stack([lap0, np.zeros_like(x)]) - (a + b) * gd
    assert np.max(np.abs(Lu - exact)) < 1e-4


def test_stress_Q_zero_for_laplacian_only():
    g = Grid(1, 1.0, 16)
    u = Field.vector(g, np.sin(np.pi * g.coords))
    assert not np.any(stress_Q(u, 1.0, 0.0, 2.0, "laplacian_only").values)


def test_sobolev_norms_of_sine():
    g = Grid(1, np.pi, 256)
    n = sobolev(Field.scalar(g, np.sin(g.axis)), up_to_k=3, order=4)
    assert n.l2[0] == pytest.approx(np.sqrt(np.pi), rel=1e-10)
    assert n.l2[1] == pytest.approx(np.sqrt(np.pi), rel=1e-5)
    assert n.linf == pytest.approx(1.0, abs=1e-3)
    assert n.h_norm(2) == pytest.approx(np.sqrt(3 * np.pi), rel=1e-4)


@settings(max_examples=40, deadline=None)
@given(a=arrays(np.float64, 32, elements=st.floats(-1, 1)),
       s=arrays(np.float64, 32, elements=st.floats(0, 2)))
def test_weighted_filter_conservative_and_dissipative(a, s):
    out = weighted_fourth_difference(a, s, 1)
    assert abs(out.sum()) < 1e-10
    assert np.dot(a, out) >= -1e-10


def test_weighted_filter_constant_weight():
    a = np.random.default_rng(0).normal(size=(16, 16))
    assert np.allclose(weighted_fourth_difference(a, np.ones_like(a), 2), fourth_difference(a, 2))


def test_identity_is_exact_in_1d():
    g = Grid(1, np.pi, 128)
    x = g.axis
    chk = discrete_identity_check(Field.scalar(g, 1 + 0.5 * np.cos(x)), Field.vector(g, np.sin(2 * x)[None]))
    assert chk.j_star == 0 and chk.diff == pytest.approx(0, abs=1e-12 * chk.lhs)


def test_identity_slack_2d(rng):
    g = Grid(2, np.pi, 64)
    x, y = g.coords
    phi = Field.scalar(g, 1 + 0.3 * np.sin(x) * np.cos(2 * y))
    w = Field.vector(g, np.stack([np.sin(x + y), np.cos(2 * x - y)]))
    chk = discrete_identity_check(phi, w)
    assert chk.slack >= 0
    # the discrete split bounds lhs by AM-GM without any integration by parts
    assert chk.lhs <= chk.rhs_main + chk.j_star_exact + 1e-9 * chk.lhs
    # and the continuum remainder approximates the discrete one
    assert chk.discretisation_error < 0.05 * abs(chk.j_star_exact)


def test_inner_and_roundtrip(tmp_path):
    g = Grid(2, 1.0, 8)
    v = Field.vector(g, np.random.default_rng(1).normal(size=(2, 8, 8)))
    save_field(tmp_path / "f.bin", v, time=0.25)
    w, t = load_field(tmp_path / "f.bin")
    assert t == 0.25 and w.rank == "vector" and np.array_equal(w.values, v.values)
    assert inner(v.values, v.values, g) == pytest.approx(np.sum(v.values**2) * g.h**2)
