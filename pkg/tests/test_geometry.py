import math

import pytest
from hypothesis import given, strategies as st

from polysle.geometry import (
    AT_INFINITY,
    ConfigError,
    Corner,
    PrevertexConfig,
    exterior_angle_sum,
    infinity_angle,
    rho_beta_convert,
    validate_config,
)

finite = st.floats(-1e6, 1e6, allow_nan=False)


def test_open_polygon_flagged():
    rep = validate_config(PrevertexConfig((-1, 1), (0.5, 0.5), 4))
    assert rep.open_polygon
    assert rep.planar


def test_no_prevertex_left_of_zero():
    with pytest.raises(ConfigError, match="left of 0"):
        validate_config(PrevertexConfig((1, 2), (0.5, 0.5), 4))


def test_cubic_config_warns_non_injective():
    rep = validate_config(PrevertexConfig((-1, 1), (-1, -1), 2))
    assert not rep.planar
    assert any("not injective" in w for w in rep.warnings)


@pytest.mark.parametrize("z, msg", [
    ((), "empty"),
    ((-1, 0, 1), "coincides"),
    ((-1, 2, 1), "increasing"),
    ((-1, -1, 1), "increasing"),
])
def test_validation_errors(z, msg):
    with pytest.raises(ConfigError, match=msg):
        validate_config(PrevertexConfig(z, (0.1,) * len(z), 2))


def test_nonfinite_rejected():
    with pytest.raises(ConfigError):
        validate_config(PrevertexConfig((-1, 1), (0.5, math.nan), 2))
    with pytest.raises(ConfigError):
        validate_config(PrevertexConfig((-1, 1), (0.5, 0.5), -2))


def test_single_point_either_side():
    assert validate_config(PrevertexConfig((1.0,), (0.5,), 4)).config.n == 1
    assert validate_config(PrevertexConfig((-1.0,), (0.5,), 4)).config.n == 1


def test_slit_endpoint_accepted_without_planarity_warning():
    rep = validate_config(PrevertexConfig((-1, 1), (-1.0, 3.0), 2))
    assert not rep.open_polygon
    assert any("at infinity" in w for w in rep.warnings)
    assert rep.planar


def test_validation_is_pure():
    cfg = PrevertexConfig((-2, 1), (0.7, 1.2), 3)
    before = (cfg.prevertices, cfg.betas, cfg.kappa)
    validate_config(cfg)
    assert (cfg.prevertices, cfg.betas, cfg.kappa) == before


def test_rho_beta_examples():
    assert rho_beta_convert([0.5, 0.5], 4, "to_rho") == [1.0, 1.0]
    assert rho_beta_convert([0, 0], 7.3, "to_beta") == [0.0, 0.0]
    assert rho_beta_convert([-1, -1], 2, "to_rho") == [-1.0, -1.0]
    with pytest.raises(ConfigError):
        rho_beta_convert([1.0], 0.0, "to_rho")


@given(st.lists(finite, max_size=8), st.floats(1e-3, 1e3))
def test_rho_beta_round_trip(vals, kappa):
    back = rho_beta_convert(rho_beta_convert(vals, kappa, "to_rho"), kappa, "to_beta")
    for a, b in zip(vals, back):
        assert b == pytest.approx(a, rel=1e-15, abs=1e-300)


def test_angle_sums():
    assert exterior_angle_sum([2 / 3] * 3) == pytest.approx(2.0, abs=1e-15)
    assert exterior_angle_sum([1.0, 1.0]) == 2.0
    assert exterior_angle_sum([-1.0, 3.0]) == 2.0
    assert infinity_angle([0.5, 0.5]) == 1.0


@given(st.lists(st.floats(-3, 3), max_size=10), st.randoms())
def test_angle_sum_permutation_invariant(betas, rnd):
    shuffled = list(betas)
    rnd.shuffle(shuffled)
    assert exterior_angle_sum(shuffled) == exterior_angle_sum(betas)


def test_corner_bookkeeping():
    c = Corner(1 + 2j, 0.25)
    assert c.alpha + c.beta == 1.0
    assert not c.at_infinity
    assert Corner(AT_INFINITY, 1.5).at_infinity


def test_from_rhos():
    cfg = PrevertexConfig.from_rhos((-1, 1), (1, 1), 4)
    assert cfg.betas == (0.5, 0.5)
    assert cfg.rhos == (1.0, 1.0)
