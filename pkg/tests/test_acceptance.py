"""Acceptance gate: every criterion prints one PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the report lines.
Criterion 5 is implemented exactly as stated and is expected to fail: at the
stated two-state parameters the solver's boundaries (cross-validated against
recursion-independent path-policy searches) are monotone with the falling
state stopping everywhere, so the required direction change and curve
crossing do not exist.  The analysis lives in the project notes, outside the
package.
"""

import time

import numpy as np
import pytest

import regime_stop as rs
from regime_stop.cli import main


def report(num, ok, detail):
    print(f"ACCEPTANCE {num} {'PASS' if ok else 'FAIL'}: {detail}")
    return ok


def test_criterion_1_oracle_agreement_constant_case(model_const):
    t0 = time.perf_counter()
    grid = rs.make_grid(model_const, n=50, a_points=200)
    value, stop = rs.solve_surfaces(model_const, grid)
    curve = rs.extract_boundary(value, stop)
    rng = np.random.default_rng(20240809)
    est, se = rs.boundary_policy_value(model_const, curve, 0.0, 1.0, 0, 200_000, rng)
    elapsed = time.perf_counter() - t0
    solver_v = float(value.values[0][0, 0])
    gap = abs(solver_v - est)
    tol = 3.0 * se + 2.0 * grid.delta * solver_v
    ok = gap <= tol and elapsed <= 120.0
    assert report(
        1, ok,
        f"|V(0,1) - oracle| = {gap:.5f} <= {tol:.5f} (V={solver_v:.5f}, "
        f"oracle={est:.5f} +- {se:.5f}), runtime {elapsed:.1f}s <= 120s",
    )


def test_criterion_2_stop_value_cross_validation(model_const):
    sups = {}
    for n in (50, 100):
        grid = rs.make_grid(model_const, n=n, a_points=200)
        stop = rs.solve_stop_value(model_const, grid)
        direct = rs.stop_value_direct(0.15, 0.5, 0.0, grid.a_nodes, 1.0)
        sups[n] = float(np.abs(stop.values[0][:, 0] - direct).max())
    ok = sups[50] <= 5e-3 and sups[100] < sups[50]
    assert report(
        2, ok,
        f"sup|G_n(0,a) - direct| = {sups[50]:.2e} (n=50) <= 5e-3, "
        f"{sups[100]:.2e} (n=100) decreasing={sups[100] < sups[50]}",
    )


def test_criterion_3_constant_boundary_shape(solved_const):
    _, _, _, curve = solved_const
    rep = rs.shape_report(curve, 0)
    ok = rep.direction_changes == 0 and curve.b_raw[-1, 0] == 1.0
    assert report(
        3, ok,
        f"direction changes = {rep.direction_changes} (need 0), "
        f"b(T) = {curve.b_raw[-1, 0]} (need 1)",
    )


def test_criterion_4_immediate_exercise_cases():
    results = []
    single = rs.single_state_model(mu=-0.2, sigma=0.5, horizon=1.0)
    grid = rs.make_grid(single, n=50)
    value, stop = rs.solve_surfaces(single, grid)
    curve = rs.extract_boundary(value, stop)
    results.append(float(np.abs(curve.b_raw - 1.0).max()))

    both_neg = rs.validate_model(
        rs.RegimeModel(mu=[-0.1, -0.2], sigma=[0.5, 0.3],
                       generator=[[-2.5, 2.5], [2.0, -2.0]], horizon=0.5)
    )
    grid = rs.make_grid(both_neg, n=50)
    value, stop = rs.solve_surfaces(both_neg, grid)
    curve = rs.extract_boundary(value, stop)
    results.append(float(np.abs(curve.b_raw - 1.0).max()))

    ok = max(results) == 0.0
    assert report(
        4, ok,
        f"max |b - 1| = {max(results)} over the single-state and two-state "
        f"negative-drift models (need 0)",
    )


def test_criterion_5_mixed_sign_boundary_shapes(solved_mixed_full):
    _, _, _, curve = solved_mixed_full
    rep0 = rs.shape_report(curve, 0)
    rep1 = rs.shape_report(curve, 1)
    diff = curve.b_raw[:, 0] - curve.b_raw[:, 1]
    crossings = int(np.sum(np.sign(diff[:-1]) * np.sign(diff[1:]) < 0))
    ok = rep0.direction_changes >= 1 and rep1.direction_changes == 0 and crossings >= 1
    assert report(
        5, ok,
        f"state-1 changes = {rep0.direction_changes} (need >= 1), "
        f"state-2 changes = {rep1.direction_changes} (need 0), "
        f"crossings = {crossings} (need >= 1)",
    )


def test_criterion_6_invariant_suite(model_const, model_mixed,
                                     solved_const, solved_mixed_full):
    single_neg = rs.single_state_model(mu=-0.2, sigma=0.5, horizon=1.0)
    grid_neg = rs.make_grid(single_neg, n=50)
    solved_neg = rs.solve_surfaces(single_neg, grid_neg)
    both_neg = rs.validate_model(
        rs.RegimeModel(mu=[-0.1, -0.2], sigma=[0.5, 0.3],
                       generator=[[-2.5, 2.5], [2.0, -2.0]], horizon=0.5)
    )
    grid_bneg = rs.make_grid(both_neg, n=50)
    solved_bneg = rs.solve_surfaces(both_neg, grid_bneg)

    cases = [
        (model_const, solved_const[0], solved_const[1], solved_const[2]),
        (model_mixed, solved_mixed_full[0], solved_mixed_full[1], solved_mixed_full[2]),
        (single_neg, grid_neg, solved_neg[0], solved_neg[1]),
        (both_neg, grid_bneg, solved_bneg[0], solved_bneg[1]),
    ]
    worst = {"vg": 0.0, "floor": 0.0, "mono_a": 0.0, "mono_t": 0.0,
             "mass": 0.0, "rows": 0.0, "ck": 0.0}
    for model, grid, value, stop in cases:
        band = 1e-6 + 1e-4 + 1e-4 * stop.values
        worst["vg"] = max(worst["vg"], float((value.values - stop.values - band).max()))
        worst["floor"] = max(worst["floor"], float((1.0 - value.values).max()))
        worst["mono_a"] = max(
            worst["mono_a"],
            float((-np.diff(value.values, axis=1)).max()),
            float((-np.diff(stop.values, axis=1)).max()),
        )
        worst["mono_t"] = max(worst["mono_t"], float(np.diff(stop.values, axis=0).max()))
        rule = rs.triangle_rule(rs.QuadratureSpec(), grid.delta)
        worst["mass"] = max(worst["mass"], abs(rule.total_weight - 1.0))
        tm = rs.transition_matrix(model, grid.delta)
        worst["rows"] = max(worst["rows"], float(np.abs(tm.probs.sum(axis=1) - 1.0).max()),
                            tm.residual)
        p_s = rs.transition_matrix(model, 0.2 * grid.delta).probs
        p_t = rs.transition_matrix(model, 0.8 * grid.delta).probs
        p_st = rs.transition_matrix(model, grid.delta).probs
        worst["ck"] = max(worst["ck"], float(np.abs(p_s @ p_t - p_st).max()))

    ok = (
        worst["vg"] <= 0.0
        and worst["floor"] <= 1e-9
        and worst["mono_a"] <= 1e-9
        and worst["mono_t"] <= 1e-8
        and worst["mass"] <= 1e-6
        and worst["rows"] <= 1e-10
        and worst["ck"] <= 1e-8
    )
    assert report(
        6, ok,
        "worst residuals: "
        + ", ".join(f"{k}={v:.2e}" for k, v in worst.items()),
    )


def test_criterion_7_policy_dominance(model_const, model_mixed,
                                      solved_const, solved_mixed_full):
    failures = []
    margins = []
    for tag, model, solved, states in (
        ("const", model_const, solved_const, (0,)),
        ("mixed", model_mixed, solved_mixed_full, (0, 1)),
    ):
        curve = solved[3]
        for j in states:
            rng = np.random.default_rng(31_000 + j)
            rows = rs.compare_policies(model, curve, 0.0, 1.0, j, 100_000, rng)
            opt_name, opt, opt_se = rows[0]
            assert opt_name == "hit_boundary"
            for name, est, se in rows[1:]:
                slack = est + 3.0 * (opt_se + se) - opt
                margins.append(slack)
                if slack < 0:
                    failures.append(f"{tag}/state{j}/{name}: {slack:.2e}")
    ok = not failures
    assert report(
        7, ok,
        f"min dominance slack = {min(margins):.4f} over "
        f"{len(margins)} comparisons" + (f"; failures: {failures}" if failures else ""),
    )


def test_criterion_8_linear_complexity(tmp_path):
    cfg = tmp_path / "bench.cfg"
    cfg.write_text(
        "model.mu = [0.2]\nmodel.sigma = [0.5]\nmodel.q = [[0.0]]\nmodel.T = 1.0\n"
    )
    out = tmp_path / "out"
    rc = main(["bench", "--config", str(cfg), "--n-list", "25,50,100",
               "--out", str(out)])
    text = (out / "bench.csv").read_text()
    exponent = float(text.rsplit("fitted_exponent=", 1)[1])
    ok = rc == 0 and 0.8 <= exponent <= 1.3
    assert report(8, ok, f"fitted runtime exponent = {exponent:.3f} in [0.8, 1.3]")


def test_criterion_9_byte_identical_reruns(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(
        "model.mu = [0.2, -0.2]\nmodel.sigma = [0.5, 0.3]\n"
        "model.q = [[-2.5, 2.5], [2.0, -2.0]]\nmodel.T = 0.5\n"
        "grid.n = 16\ngrid.a_points = 100\n"
        "quadrature.nodes_y = 24\nquadrature.nodes_x = 16\nquadrature.nodes_r = 2\n"
        "mc.paths = 10000\nmc.seed = 7\n"
    )
    outs = []
    for name in ("o1", "o2"):
        out = tmp_path / name
        assert main(["solve", "--config", str(cfg), "--out", str(out)]) == 0
        assert main(["oracle", "--config", str(cfg),
                     "--boundary", str(out / "boundary.csv"), "--out", str(out)]) == 0
        outs.append(out)
    same = all(
        (outs[0] / f).read_bytes() == (outs[1] / f).read_bytes()
        for f in ("surface.csv", "boundary.csv", "oracle.csv")
    )
    assert report(9, same, "surface.csv, boundary.csv, oracle.csv byte-identical on rerun")
