import os

import pytest
from hypothesis import given, settings, strategies as st

from vacflow.config import ConfigError, RunConfig, emit, parse

from conftest import CONFIG_DIR


def test_defaults_roundtrip():
    cfg = RunConfig()
    assert parse(emit(cfg)) == cfg


@pytest.mark.parametrize("name", sorted(os.listdir(CONFIG_DIR)))
def test_shipped_configs_roundtrip(name):
    with open(os.path.join(CONFIG_DIR, name)) as fh:
        cfg = parse(fh.read())
    cfg.check()
    assert parse(emit(cfg)) == cfg


@settings(max_examples=30, deadline=None)
@given(L=st.floats(1, 100), N=st.integers(4, 512).map(lambda n: 2 * n), cfl=st.floats(0.01, 1),
       D0=st.one_of(st.none(), st.floats(0, 10)), flag=st.booleans(),
       radii=st.lists(st.floats(0.5, 10), min_size=1, max_size=4))
def test_random_roundtrip(L, N, cfl, D0, flag, radii):
    text = (f"grid.L = {L!r}\ngrid.N = {N}\nsolver.cfl = {cfl!r}\nrun.D0 = {D0 if D0 is not None else 'none'}\n"
            f"diagnostics.envelope = {str(flag).lower()}\nrstudy.radii = {', '.join(map(repr, radii))}\n")
    cfg = parse(text)
    assert cfg.grid.N == N and cfg.run.D0 == D0 and cfg.rstudy.radii == tuple(radii)
    assert parse(emit(cfg)) == cfg


def test_matrix_and_overrides():
    cfg = parse("params.dim = 2\nvelocity.A = 1, 0; 0, 2\n", ["grid.N=64", "velocity.background = zero"])
    assert cfg.velocity.A == ((1.0, 0.0), (0.0, 2.0))
    assert cfg.grid.N == 64 and cfg.velocity.background == "zero"
    cfg.check()


@pytest.mark.parametrize("text", [
    "grid.N",                       # no '='
    "nosuch.key = 1",
    "grid.nosuch = 1",
    "grid.N = many",
    "diagnostics.energy = perhaps",
    "solver.cfl = 3",
    "gridN = 4",
])
def test_parse_errors(text):
    with pytest.raises(ConfigError):
        parse(text)


def test_check_errors():
    with pytest.raises(ConfigError):
        parse("params.beta = -1\nparams.alpha = 1").check()
    with pytest.raises(ConfigError):
        parse("density.support_radius = 10\ngrid.L = 16").check()
    with pytest.raises(ConfigError):
        parse("params.dim = 2").check()
