import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from polysle import verify as V
from polysle.driving import driven_path, simulate_driver
from polysle.geometry import PrevertexConfig
from polysle.stats import EnsembleStats, TimeChange


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_martingale_flat_control(seed):
    cfg = PrevertexConfig((-1.0, 1.0), (0.0, 0.0), 2.0)
    rep = V.martingale_test(cfg, 0.05, 1e-4, 2000, seed, eps_coll=0.0)
    assert rep.status == V.PASS
    assert rep.details["attrition"] == 0.0


def test_martingale_single_slit_point():
    cfg = PrevertexConfig((1.0,), (-1.0,), 2.0)
    rep = V.martingale_test(cfg, 0.05, 1e-4, 4000, seed=3)
    assert rep.status == V.PASS


def test_martingale_inconclusive_under_attrition():
    cfg = PrevertexConfig((-0.05, 0.05), (0.5, 0.5), 4.0)
    rep = V.martingale_test(cfg, 0.05, 1e-4, 200, seed=0)
    assert rep.details["attrition"] > 0.5
    assert rep.status == V.INCONCLUSIVE


@pytest.mark.parametrize("kappa", [1.0, 4.0])
def test_qv_flat_control(kappa):
    cfg = PrevertexConfig((-50.0, 50.0), (0.0, 0.0), kappa)
    p = simulate_driver(cfg, 1.0, 1e-4, seed=8)
    q = V.qv_test(p)
    assert q.clock == pytest.approx(kappa * 1.0, rel=1e-12)
    assert q.rel_error <= 0.05
    assert q.increments_ok


def test_qv_error_shrinks_with_dt():
    cfg = PrevertexConfig((-50.0, 50.0), (0.0, 0.0), 1.0)
    means = []
    for dt in (4e-4, 1e-4):
        errs = [V.qv_test(simulate_driver(cfg, 0.2, dt, seed=s)).rel_error for s in range(60)]
        means.append(np.mean(errs))
    # relative error of realized quadratic variation scales like sqrt(dt)
    assert 1.5 <= means[0] / means[1] <= 2.7


def test_hitting_formula_values():
    assert V.hitting_probability_formula(8, 1, 1) == pytest.approx(0.5, abs=1e-12)
    assert V.hitting_probability_formula(6, 2, 2) == pytest.approx(0.5, abs=1e-12)
    assert abs(V.hitting_probability_formula(8, 1, 3) - 2 / 3) <= 1e-8
    with pytest.raises(ValueError):
        V.hitting_probability_formula(4, 1, 1)
    with pytest.raises(ValueError):
        V.hitting_probability_formula(8, -1, 1)


@settings(max_examples=40, deadline=None)
@given(st.floats(4.2, 20), st.floats(0.05, 20), st.floats(0.05, 20), st.floats(0.1, 10))
def test_hitting_formula_invariances(kappa, x, y, lam):
    p = V.hitting_probability_formula(kappa, x, y)
    assert abs(p - V.hitting_probability_formula(kappa, lam * x, lam * y)) <= 1e-12
    assert abs(p + V.hitting_probability_formula(kappa, y, x) - 1) <= 1e-8
    assert 0 <= p <= 1


def test_hitting_formula_report():
    assert V.hitting_formula_report(8, 1, 3).status == V.PASS


def test_hitting_mc_symmetric():
    rep, stats = V.hitting_probability_mc(6.0, 1.0, 1.0, 3000, seed=4)
    assert rep.details["undecided"] == 0.0
    assert abs(stats.mean - 0.5) <= 3 * stats.se


def test_hitting_mc_far_left_point_is_hit_less_often():
    # the farther half-line is reached first less often; the estimate sits at 1 - p(8, 1, 3)
    rep, stats = V.hitting_probability_mc(8.0, 1.0, 3.0, 4000, seed=6)
    assert stats.mean < 0.5
    assert abs(rep.details["z_complement"]) <= 3


def test_theorem_rate_flat():
    cfg = PrevertexConfig((-1.0, 1.0), (0.0, 0.0), 4.0)
    p = simulate_driver(cfg, 0.02, 1e-4, seed=1)
    for t in V.cell_midpoints(p, 5):
        assert V.theorem_rate_check(p, 0.2 + 0.4j, t).residual <= 1e-3


def test_theorem_rate_constant_driver():
    cfg = PrevertexConfig((1.0,), (0.5,), 4.0)
    p = driven_path(cfg, np.zeros(201), 1e-4)
    for w, t in [(0.3 + 0.5j, 0.005), (-0.5 + 0.2j, 0.01), (2 + 1j, 0.015)]:
        assert V.theorem_rate_check(p, w, t, h=1e-4).residual <= 1e-3


def test_theorem_rate_swallowed_point_rejected():
    p = driven_path(PrevertexConfig((1.0,), (0.5,), 4.0), np.zeros(2001), 1e-4)
    with pytest.raises(ValueError, match="swallowed"):
        V.theorem_rate_check(p, 0.1j, 0.15)
    rep = V.theorem_rate_report(p, [0.1j], times=[0.15])
    assert rep.status == V.INCONCLUSIVE


def test_metric_equivalence_flat_control():
    cfg = PrevertexConfig((-30.0, 30.0), (0.0, 0.0), 4.0)
    rep = V.metric_equivalence_test(cfg, N=3000, seed=2, t_star=0.05, dt=1e-3)
    assert rep.details["coefficient_residual"] <= 1e-12
    assert rep.status == V.PASS


def test_sc_oracles_report_round_trips():
    rep = V.sc_oracles(cfg=PrevertexConfig((-1.0, 1.0), (-1.0, -1.0), 2.0))
    assert rep.passed
    doc = json.loads(rep.to_json())
    assert doc["test"] == "sc-oracles" and doc["status"] == "pass"
    assert "sc-oracles" in V.report_table([rep])


def test_config_hash_stable():
    cfg = PrevertexConfig((-1.0, 1.0), (0.5, 0.5), 4.0)
    assert V.config_hash(cfg) == V.config_hash(PrevertexConfig((-1, 1), (0.5, 0.5), 4))
    assert V.config_hash(cfg) != V.config_hash(cfg.with_betas((0.5, 0.4)))


# -- statistics helpers ----------------------------------------------------


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-1e3, 1e3), min_size=2, max_size=40),
       st.lists(st.floats(-1e3, 1e3), min_size=2, max_size=40),
       st.lists(st.floats(-1e3, 1e3), min_size=2, max_size=40))
def test_merge_matches_union_and_is_associative(a, b, c):
    sa, sb, sc = (EnsembleStats.from_samples(x) for x in (a, b, c))
    whole = EnsembleStats.from_samples(a + b + c)
    left = sa.merge(sb).merge(sc)
    right = sa.merge(sb.merge(sc))
    for s in (left, right):
        assert s.n == whole.n
        assert s.mean == pytest.approx(whole.mean, rel=1e-9, abs=1e-9)
        assert s.se == pytest.approx(whole.se, rel=1e-7, abs=1e-9)


def test_time_change_inverse():
    t = np.linspace(0, 1, 101)
    A = t + t ** 2
    tc = TimeChange(t, A)
    assert np.allclose(tc.tau(tc(t)), t, atol=1e-12)
    with pytest.raises(ValueError):
        TimeChange(t, np.zeros_like(t))
    with pytest.raises(ValueError):
        tc.tau(5.0)


def test_two_sample_z_zero_for_identical():
    x = np.arange(10.0)
    assert V.two_sample_z(x, x) == 0.0
    assert math.isfinite(V.two_sample_z(x, x + 1))
