import numpy as np
import pytest

from app.court.loops import PLLoop, calibration_ratios, period_pairing, pl_mass, random_competitor
from app.court.trials import PERIOD_TOL, delta_for_resolution, minimization_trial, run_trial
from app.errors import InvalidInputError
from app.forge.grid import ClosedForm, CovectorField, MetricField, TorusGrid


@pytest.fixture(scope="module")
def flat64():
    return MetricField.flat(TorusGrid.cubic(2, 64))


@pytest.fixture(scope="module")
def dx64():
    return ClosedForm.build(TorusGrid.cubic(2, 64), (1.0, 0.0))


# ==================== 闭路 ====================

def test_zero_edges_are_merged():
    loop = PLLoop(np.array([[0.0, 0.5], [0.0, 0.5], [0.5, 0.5]]), np.array([1, 0]))
    assert len(loop.vertices) == 2
    assert np.all(np.linalg.norm(loop.edges, axis=1) > 0)


def test_loop_validation():
    with pytest.raises(InvalidInputError):
        PLLoop(np.array([[0.0, 0.0], [0.5, 0.0]]), np.array([0.5, 0.0]))
    with pytest.raises(InvalidInputError):
        PLLoop(np.array([[0.0, 0.0], [np.nan, 0.0]]), np.array([1, 0]))
    with pytest.raises(InvalidInputError):
        PLLoop(np.array([[0.2, 0.2], [0.2, 0.2]]), np.array([0, 0]))


def test_from_torus_points_infers_winding():
    loop = PLLoop.from_torus_points([[0.9, 0.5], [0.1, 0.5], [0.5, 0.5]])
    np.testing.assert_array_equal(loop.winding, [1, 0])
    assert np.sum(loop.edges[:, 0]) == pytest.approx(1.0)


def test_straight_mass_and_period(flat64, dx64):
    loop = PLLoop.straight((0.0, 0.5), (1, 0), 32)
    assert pl_mass(loop, flat64) == pytest.approx(1.0)
    assert pl_mass(loop, flat64.scaled(4.0)) == pytest.approx(2.0)
    assert period_pairing(loop, dx64) == pytest.approx(1.0)
    assert period_pairing(loop.scaled(2.0), dx64) == pytest.approx(2.0)
    np.testing.assert_allclose(calibration_ratios(loop, dx64, flat64), 1.0)


def test_diagonal_class_mass(flat64):
    loop = PLLoop.straight((0.1, 0.2), (1, 1), 16)
    assert pl_mass(loop, flat64) == pytest.approx(np.sqrt(2.0))


def test_reverse_and_rotation(flat64, dx64):
    loop = random_competitor((1, 0), seed=5)
    back = loop.reversed()
    np.testing.assert_array_equal(back.winding, [-1, 0])
    assert pl_mass(back, flat64) == pytest.approx(pl_mass(loop, flat64), rel=1e-12)
    assert period_pairing(back, dx64) == pytest.approx(-period_pairing(loop, dx64), abs=1e-12)
    rotated = loop.rotated(17)
    assert pl_mass(rotated, flat64) == pytest.approx(pl_mass(loop, flat64), rel=1e-12)


def test_refinement_keeps_flat_mass(flat64):
    loop = random_competitor((0, 1), seed=2, complexity=4)
    assert pl_mass(loop.refined(), flat64) == pytest.approx(pl_mass(loop, flat64), rel=1e-12)


def test_payload_roundtrip():
    loop = random_competitor((1, 0), seed=1)
    again = PLLoop.from_payload(loop.to_payload())
    np.testing.assert_array_equal(again.vertices, loop.vertices)


# ==================== 竞争者 ====================

def test_competitor_with_zero_amplitude_is_straight(flat64):
    loop = random_competitor((1, 0), seed=3, amplitude=0.0)
    assert pl_mass(loop, flat64) == pytest.approx(1.0)
    assert np.ptp(loop.vertices[:, 1]) == pytest.approx(0.0, abs=1e-12)


def test_competitor_is_deterministic():
    a = random_competitor((1, 2), seed=np.random.SeedSequence(9))
    b = random_competitor((1, 2), seed=np.random.SeedSequence(9))
    np.testing.assert_array_equal(a.vertices, b.vertices)
    np.testing.assert_array_equal(a.winding, [1, 2])


def test_competitor_validation():
    with pytest.raises(InvalidInputError):
        random_competitor((1, 0), seed=0, complexity=2)
    with pytest.raises(InvalidInputError):
        random_competitor((1, 0), seed=0, amplitude=-0.1)


def test_competitor_mass_bounded_below(flat64, dx64):
    for seed in range(10):
        loop = random_competitor((1, 0), seed=seed, complexity=5)
        assert pl_mass(loop, flat64) >= period_pairing(loop, dx64) - 1e-12


# ==================== 试验 ====================

def test_delta_scales_with_resolution():
    assert delta_for_resolution(256) == pytest.approx(5e-3)
    assert delta_for_resolution(128) == pytest.approx(1e-2)


def test_zero_competitors_warns(flat64, dx64):
    M = PLLoop.straight((0.0, 0.5), (1, 0), 64)
    report = minimization_trial(M, dx64, flat64, 0, seed=0)
    assert report.passed
    assert report.competitors == 0
    assert report.min_margin is None
    assert report.warnings


def test_flat_trial_passes(flat64, dx64):
    M = PLLoop.straight((0.0, 0.5), (1, 0), 64)
    report = run_trial([M], dx64, flat64, 12, seed=4)
    assert report.passed
    assert report.mass_M == pytest.approx(1.0)
    assert report.min_margin >= 0.0
    assert report.max_calibration_ratio <= 1.0 + 1e-12
    assert report.periods_max_deviation < 1e-9


def test_trial_independent_of_workers(flat64, dx64):
    M = PLLoop.straight((0.0, 0.5), (1, 0), 64)
    one = run_trial([M], dx64, flat64, 8, seed=11, workers=1)
    many = run_trial([M], dx64, flat64, 8, seed=11, workers=4)
    assert one.masses == many.masses


def test_shrunken_metric_breaks_lower_bound(flat64, dx64):
    M = PLLoop.straight((0.0, 0.5), (1, 0), 64)
    report = run_trial([M], dx64, flat64.scaled(0.81), 4, seed=0)
    assert not report.passed
    kinds = {(v.competitor, v.kind) for v in report.lower_bound_violations}
    assert (-1, "lower_bound") in kinds


def test_extra_competitor_shorter_than_target(flat64, dx64):
    wavy = random_competitor((1, 0), seed=8)
    straight = PLLoop.straight((0.0, 0.5), (1, 0), 64)
    report = run_trial([wavy], dx64, flat64, 0, seed=0, extra={"straight": [straight]})
    assert not report.passed
    assert report.extra["straight"] == pytest.approx(1.0)
    assert any(v.kind == "mass:straight" for v in report.lower_bound_violations)


def test_negative_competitor_count(flat64, dx64):
    with pytest.raises(InvalidInputError):
        run_trial([PLLoop.straight((0.0, 0.5), (1, 0))], dx64, flat64, -1, seed=0)


def _sagging_field(grid):
    """x 分量 1 − 0.2·sin²(π(y − ½))：逐点 comass ≤ 1 但不闭"""
    nodes = grid.nodes()
    values = np.zeros(grid.shape + (2,))
    values[..., 0] = 1.0 - 0.2 * np.sin(np.pi * (nodes[..., 1] - 0.5)) ** 2
    return CovectorField(grid, values)


def test_period_drift_fails_trial(flat64):
    Phi = _sagging_field(flat64.grid)
    M = PLLoop.straight((0.0, 0.5), (1, 0), 64)
    report = run_trial([M], Phi, flat64, 12, seed=4)
    assert report.period_M == pytest.approx(1.0)
    assert report.max_calibration_ratio <= 1.0 + 1e-12
    assert report.periods_max_deviation > PERIOD_TOL
    assert not report.passed
    drifted = [v for v in report.lower_bound_violations if v.kind == "period"]
    assert drifted
    assert all(v.excess > PERIOD_TOL for v in drifted)


def test_period_drift_on_extra_competitor(flat64):
    Phi = _sagging_field(flat64.grid)
    M = PLLoop.straight((0.0, 0.5), (1, 0), 64)
    low = PLLoop.straight((0.0, 0.0), (1, 0), 64)
    report = run_trial([M], Phi, flat64, 0, seed=0, extra={"low": [low]})
    assert not report.passed
    assert report.periods_max_deviation == pytest.approx(0.2, abs=1e-3)
    assert any(v.kind == "period:low" for v in report.lower_bound_violations)


def test_closed_form_period_is_exact(flat64):
    grid = flat64.grid
    nodes = grid.nodes()
    Phi = ClosedForm.build(grid, (1.0, 0.0), 0.05 * np.sin(2 * np.pi * nodes[..., 0]) * np.cos(2 * np.pi * nodes[..., 1]))
    for seed in range(5):
        loop = random_competitor((1, 0), seed=seed)
        assert period_pairing(loop, Phi) == pytest.approx(1.0, abs=1e-12)
        assert period_pairing(loop.scaled(-2.0), Phi) == pytest.approx(-2.0, abs=1e-12)
