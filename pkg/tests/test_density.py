import math

import numpy as np
import pytest

import regime_stop as rs
from regime_stop.density import switch_time_rule
from regime_stop.errors import NonPositiveTime


def test_density_point_value():
    # sqrt(2/pi) * 2 * exp(-2)
    assert rs.max_joint_density(1.0, 0.0, 1.0) == pytest.approx(0.21596386605275225, rel=1e-12)


def test_density_vanishes_where_factor_does():
    assert rs.max_joint_density(1.0, 0.0, 0.0) == 0.0


def test_density_support():
    assert rs.max_joint_density(1.0, 0.5, -0.1) == 0.0   # y < 0
    assert rs.max_joint_density(1.0, 0.7, 0.5) == 0.0    # x > y
    assert rs.max_joint_density(1.0, -3.0, 0.2) > 0.0


def test_density_rejects_nonpositive_time():
    with pytest.raises(NonPositiveTime):
        rs.max_joint_density(0.0, 0.0, 1.0)
    with pytest.raises(NonPositiveTime):
        rs.triangle_rule(rs.QuadratureSpec(), -1.0)


def test_density_against_simulated_histogram():
    # exact joint sampling: endpoint Gaussian, max from the bridge-max law
    r, x0, y0 = 0.25, -0.5, 0.5
    n = 1_000_000
    gen = np.random.default_rng(1234)
    x = gen.normal(0.0, np.sqrt(r), size=n)
    u = 1.0 - gen.random(n)
    m = 0.5 * (x + np.sqrt(x * x - 2.0 * r * np.log(u)))
    half = 0.05
    inside = (np.abs(x - x0) < half) & (np.abs(m - y0) < half)
    count = inside.sum()
    expect = rs.max_joint_density(r, x0, y0) * (2 * half) ** 2 * n
    assert abs(count - expect) < 4.0 * np.sqrt(expect)


def test_density_scaling_identity():
    # phi_r(x, y) = phi_1(x/sqrt(r), y/sqrt(r)) / r  (2-D change of variables)
    gen = np.random.default_rng(9)
    for _ in range(200):
        r = gen.uniform(0.01, 4.0)
        y = gen.uniform(0.0, 3.0)
        x = y - gen.uniform(0.0, 4.0)
        s = np.sqrt(r)
        assert rs.max_joint_density(r, x, y) == pytest.approx(
            rs.max_joint_density(1.0, x / s, y / s) / r, rel=1e-12, abs=1e-300
        )


def test_max_tail_whole_support():
    assert rs.max_tail_from_density(1.0, 0.0) == pytest.approx(1.0, abs=1e-9)


def test_max_tail_reflection_values():
    assert rs.max_tail_from_density(1.0, 1.0) == pytest.approx(0.31731050786291415, abs=1e-9)
    # independent reference: 2 * Phi(-0.7 / sqrt(0.5)) via math.erfc
    expect = math.erfc(0.7 / math.sqrt(0.5) / math.sqrt(2.0))
    assert rs.max_tail_from_density(0.5, 0.7) == pytest.approx(expect, abs=1e-9)


def test_rule_mass_close_to_one_at_defaults():
    rule = rs.triangle_rule(rs.QuadratureSpec(), 0.02)
    assert abs(rule.total_weight - 1.0) <= 1e-6


def test_rule_mass_deficit_when_truncated_tight():
    rule = rs.triangle_rule(rs.QuadratureSpec(nodes_y=4, nodes_x=4, nodes_r=2, trunc_sd=2.0), 1.0)
    assert rule.total_weight < 0.999
    assert rule.total_weight == pytest.approx(0.9315814854033238, abs=1e-6)


def test_rule_weights_nonnegative():
    for spec in (rs.QuadratureSpec(), rs.QuadratureSpec(nodes_y=5, nodes_x=7, nodes_r=2, trunc_sd=3.0)):
        rule = rs.triangle_rule(spec, 0.7)
        assert (rule.w >= 0.0).all()


def test_rule_mass_improves_with_truncation_and_nodes():
    coarse = rs.triangle_rule(rs.QuadratureSpec(nodes_y=8, nodes_x=8, nodes_r=2, trunc_sd=3.0), 1.0)
    fine = rs.triangle_rule(rs.QuadratureSpec(), 1.0)
    assert abs(fine.total_weight - 1.0) < abs(coarse.total_weight - 1.0)


def test_exponential_martingale_identity():
    # E[exp(lam * B_r - lam^2 r / 2)] = 1 for |lam| sqrt(r) <= 3
    for r in (0.02, 0.5, 1.0):
        rule = rs.triangle_rule(rs.QuadratureSpec(), r)
        for lam_sd in (-3.0, -1.0, 0.5, 3.0):
            lam = lam_sd / np.sqrt(r)
            val = float(np.exp(lam * rule.x - 0.5 * lam * lam * r) @ rule.w)
            assert val == pytest.approx(1.0, abs=1e-5)


def test_switch_time_rule_open_on_left():
    spec = rs.QuadratureSpec()
    r, w = switch_time_rule(spec, 0.01)
    assert (r > 0.0).all() and (r < 0.01).all()
    assert w.sum() == pytest.approx(0.01)


def test_quadrature_spec_validation():
    with pytest.raises(ValueError):
        rs.QuadratureSpec(nodes_y=3)
    with pytest.raises(ValueError):
        rs.QuadratureSpec(nodes_r=1)
    with pytest.raises(ValueError):
        rs.QuadratureSpec(trunc_sd=0.0)
