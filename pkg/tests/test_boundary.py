import warnings

import numpy as np
import pytest

import regime_stop as rs
from regime_stop.boundary import CONTINUE, STOP, BoundaryCurve, _moving_median
from regime_stop.errors import DominanceViolation, EmptyStopSet, NonMonotoneSetWarning


def test_classify_exact_equality_stops():
    assert rs.classify(1.5, 1.5) == STOP


def test_classify_band():
    assert rs.classify(1.4999, 1.5, tol_abs=1e-4, tol_rel=1e-4) == STOP
    assert rs.classify(1.49, 1.5, tol_abs=1e-4, tol_rel=1e-4) == CONTINUE


def test_classify_dominance_violation():
    with pytest.raises(DominanceViolation):
        rs.classify(1.51, 1.5)


def test_constant_case_node_at_origin_continues(solved_const):
    grid, value, stop, curve = solved_const
    v = float(value.value_at(0.1, 1.0, 0))
    g = float(stop.value_at(0.1, 1.0, 0))
    assert rs.classify(v, g) == CONTINUE
    # regression value from this solver, pinned loosely
    k = grid.ceil_index(0.1)
    assert curve.b_raw[k, 0] == pytest.approx(2.395, abs=0.05)


def test_terminal_layer_all_stop(solved_const):
    grid, value, stop, curve = solved_const
    band = 1e-4 + 1e-4 * stop.values[-1]
    assert (stop.values[-1] - value.values[-1] <= band).all()
    assert (curve.b_raw[-1] == 1.0).all()
    assert (curve.b_smoothed[-1] == pytest.approx(1.0, abs=1e-12))


def test_immediate_exercise_boundary_flat():
    model = rs.single_state_model(mu=-0.2, sigma=0.5, horizon=1.0)
    grid = rs.make_grid(model, n=50)
    value, stop = rs.solve_surfaces(model, grid)
    curve = rs.extract_boundary(value, stop)
    assert (curve.b_raw == 1.0).all()
    rep = rs.shape_report(curve, 0)
    assert rep.direction_changes == 0
    assert rep.max_rise == 0.0


def test_constant_case_boundary_nonincreasing(solved_const):
    _, _, _, curve = solved_const
    rep = rs.shape_report(curve, 0)
    assert rep.direction_changes == 0
    assert curve.b_raw[0, 0] > 2.0
    assert (np.diff(curve.b_raw[:, 0]) <= 1e-12).all()


def test_no_pockets_on_solved_surfaces(model_const):
    grid = rs.make_grid(model_const, n=25)
    value, stop = rs.solve_surfaces(model_const, grid)
    with warnings.catch_warnings():
        warnings.simplefilter("error", NonMonotoneSetWarning)
        rs.extract_boundary(value, stop)


def _toy_surfaces(gaps):
    """Build one-layer fake surfaces with prescribed stop gaps per node."""
    p = len(gaps)
    model = rs.single_state_model(0.2, 0.5, 1.0)
    grid = rs.SolverGrid(
        n=1, horizon=1.0,
        a_nodes=np.exp(np.linspace(0.0, 1.0, p)),
        log_a=np.linspace(0.0, 1.0, p),
    )
    g = np.tile(grid.a_nodes[:, None] + 1.0, (2, 1, 1)).reshape(2, p, 1)
    v = g - np.stack([np.asarray(gaps), np.zeros(p)]).reshape(2, p, 1)
    stop = rs.StopValueSurface(grid=grid, values=g)
    value = rs.ValueSurface(grid=grid, values=v, stop=stop)
    return value, stop


def test_pocket_reported_and_curve_from_top_transition():
    # nodes: stop, continue pocket, stop, stop -> boundary at index 2
    gaps = [0.0, 0.5, 0.0, 0.0, 0.0]
    value, stop = _toy_surfaces(gaps)
    with pytest.warns(NonMonotoneSetWarning) as rec:
        curve = rs.extract_boundary(value, stop, refine=False)
    assert rec[0].message.pockets == [(0, 0, 1)]
    assert curve.b_raw[0, 0] == pytest.approx(stop.grid.a_nodes[2])


def test_empty_stop_set_raises():
    gaps = [0.5, 0.5, 0.5, 0.5, 0.5]
    value, stop = _toy_surfaces(gaps)
    with pytest.raises(EmptyStopSet):
        rs.extract_boundary(value, stop)


def test_refinement_lands_between_nodes():
    gaps = [0.5, 0.3, 0.0, 0.0]
    value, stop = _toy_surfaces(gaps)
    curve = rs.extract_boundary(value, stop)
    a = stop.grid.a_nodes
    assert a[1] < curve.b_raw[0, 0] <= a[2]


def test_scaled_curve_floors_at_one(solved_const):
    _, _, _, curve = solved_const
    down = curve.scaled(0.5)
    assert (down.b_raw >= 1.0).all()
    up = curve.scaled(1.1)
    assert up.b_raw[0, 0] == pytest.approx(1.1 * curve.b_raw[0, 0])


def test_threshold_at_left_constant(solved_const):
    grid, _, _, curve = solved_const
    dt = grid.delta
    assert curve.threshold_at(0.0, 0) == curve.b_raw[0, 0]
    assert curve.threshold_at(0.5 * dt, 0) == curve.b_raw[0, 0]
    assert curve.threshold_at(dt, 0) == curve.b_raw[1, 0]


def test_moving_median_window():
    b = np.array([[1.0], [5.0], [1.0], [1.0], [1.0]])
    sm = _moving_median(b, 5)
    assert sm[2, 0] == 1.0
    assert sm[0, 0] == 1.0


def _curve_from(b_vals, spacing=0.01):
    b = np.asarray(b_vals, dtype=float)[:, None]
    return BoundaryCurve(
        times=np.linspace(0.0, 1.0, len(b)),
        b_raw=b,
        b_smoothed=b.copy(),
        tol_abs=1e-4,
        tol_rel=1e-4,
        log_spacing=spacing,
    )


def test_shape_report_flat_line():
    rep = rs.shape_report(_curve_from([1.0] * 20), 0)
    assert rep.direction_changes == 0
    assert rep.max_rise == 0.0
    assert rep.nonincreasing_prefix == 20


def test_shape_report_ignores_subthreshold_noise():
    # genuinely non-monotone wiggles, but below the 2-spacing threshold
    i = np.arange(30)
    noisy = np.exp(np.log(2.0) - 0.004 * i + 0.008 * np.sin(i))
    assert (np.diff(noisy) > 0).any()
    rep = rs.shape_report(_curve_from(noisy), 0)
    assert rep.direction_changes == 0


def test_shape_report_detects_real_rise():
    path = np.concatenate([np.linspace(1.8, 1.2, 10), np.linspace(1.25, 1.6, 8),
                           np.linspace(1.55, 1.0, 10)])
    rep = rs.shape_report(_curve_from(path), 0)
    assert rep.direction_changes == 2
    assert rep.max_rise == pytest.approx(0.4, abs=0.05)
    assert rep.nonincreasing_prefix == 10


def test_upset_property_on_solved_layers(solved_mixed_small):
    _, value, stop, _ = solved_mixed_small
    band = 1e-4 + 1e-4 * stop.values
    mask = (stop.values - value.values) <= band
    for k in range(mask.shape[0]):
        for j in range(mask.shape[2]):
            col = mask[k, :, j]
            first = int(np.argmax(col))
            assert col[first:].all()
