import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.linalg import subspace_angles

from app.errors import AdmissibilityError, DegenerateError, InvalidInputError
from app.geometry.comass import comass_exact
from app.geometry.metric_lab import (
    STAR_EXPONENTS,
    STAR_PRIME_EXPONENTS,
    asterisk_exponents,
    asterisk_prime_exponents,
    bundle_point_model,
    calibration_pair_metric,
    glue_metrics,
    gluing_bound,
    hl_adapted_metric,
    hl_decompose,
    hl_metric,
    minimal_hl_constant,
    normalize_pair,
    scale_metric,
    split_blocks,
    split_weight_transform,
)
from app.geometry.multilinear import AltForm, Frame, MetricPoint, evaluate, gram_norm, random_form

seeds = st.integers(min_value=0, max_value=2 ** 32 - 1)


def _nonflat(rng, n, p):
    g = MetricPoint.random_spd(n, rng)
    while True:
        phi = random_form(n, p, rng)
        xi = Frame(rng.standard_normal((n, p)))
        theta = evaluate(phi, xi) / gram_norm(xi, g)
        if abs(theta) > 0.1:
            break
    if theta < 0:
        xi = xi.reversed()
    return phi, xi, g


# ==================== 缩放与粘合 ====================

def test_scale_metric_rejects_nonpositive():
    with pytest.raises(InvalidInputError):
        scale_metric(MetricPoint.identity(3), 0.0)


def test_glue_metrics_validation():
    with pytest.raises(InvalidInputError):
        glue_metrics(1.0, MetricPoint.identity(3), 1.0, MetricPoint.identity(4))
    with pytest.raises(InvalidInputError):
        glue_metrics(-1.0, MetricPoint.identity(3), 1.0, MetricPoint.identity(3))


@settings(derandomize=True, deadline=None, max_examples=40)
@given(seed=seeds)
def test_gluing_bound_holds(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(3, 7))
    p = int(rng.choice([1, 2, n - 1]))
    phi = random_form(n, p, rng)
    g1 = MetricPoint.random_spd(n, rng)
    g2 = MetricPoint.random_spd(n, rng)
    a, b = rng.uniform(0.1, 3.0, 2)
    c1 = comass_exact(phi, g1).lower
    c2 = comass_exact(phi, g2).lower
    glued = comass_exact(phi, glue_metrics(a, g1, b, g2)).lower
    assert glued <= gluing_bound(a, c1, b, c2, p) + 1e-8


def test_gluing_bound_degree_one_equality():
    phi = AltForm.axis(3, [1])
    g = MetricPoint.identity(3)
    assert comass_exact(phi, glue_metrics(1.0, g, 1.0, g)).lower == pytest.approx(gluing_bound(1.0, 1.0, 1.0, 1.0, 1))


def test_monotone_under_larger_metric(rng):
    phi = random_form(5, 2, rng)
    g = MetricPoint.random_spd(5, rng)
    B = rng.standard_normal((5, 5))
    bigger = MetricPoint(g.entries + B @ B.T)
    assert comass_exact(phi, bigger).lower <= comass_exact(phi, g).lower + 1e-9


def test_calibration_pair_metric_gives_comass_one(rng):
    phi = random_form(5, 2, rng)
    g = MetricPoint.random_spd(5, rng)
    assert comass_exact(phi, calibration_pair_metric(phi, g)).lower == pytest.approx(1.0, abs=1e-12)


def test_calibration_pair_metric_rejects_zero():
    with pytest.raises(DegenerateError):
        calibration_pair_metric(AltForm.zero(4, 2), MetricPoint.identity(4))


def test_normalize_pair_keeps_comass(rng):
    phi = random_form(4, 3, rng)
    g = MetricPoint.random_spd(4, rng)
    phi_hat, g_hat = normalize_pair(phi, g, 2.5)
    assert comass_exact(phi_hat, g_hat).lower == pytest.approx(comass_exact(phi, g).lower, rel=1e-10)


# ==================== 适配分解 ====================

@settings(derandomize=True, deadline=None, max_examples=40)
@given(seed=seeds)
def test_hl_decomposition_pattern(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(3, 7))
    p = int(rng.integers(2, n))
    phi, xi, g = _nonflat(rng, n, p)
    dec = hl_decompose(phi, xi, g)
    assert dec.theta > 0
    assert dec.pattern_violation() <= 1e-9
    assert dec.normalized.coeffs[0] == pytest.approx(1.0, abs=1e-9)
    np.testing.assert_allclose(dec.V.T @ g.entries @ dec.V, np.eye(p), atol=1e-10)


@settings(derandomize=True, deadline=None, max_examples=30)
@given(seed=seeds)
def test_hl_complement_is_unique(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(3, 7))
    p = int(rng.integers(1, n))
    phi, xi, g = _nonflat(rng, n, p)
    first = hl_decompose(phi, xi, g)
    second = hl_decompose(phi, xi, g, complement=Frame(rng.standard_normal((n, n - p))))
    assert np.max(subspace_angles(first.W.vectors, second.W.vectors)) <= 1e-8


def test_hl_decompose_rejects_vanishing_value():
    phi = AltForm.axis(4, [1, 2])
    with pytest.raises(DegenerateError):
        hl_decompose(phi, Frame.standard(4, [3, 4]))


def test_hl_decompose_rejects_nontransversal_complement():
    phi = AltForm.axis(3, [1])
    with pytest.raises(DegenerateError):
        hl_decompose(phi, Frame.standard(3, [1]), complement=Frame(np.array([[1.0, 0.0], [0.0, 1.0], [0.0, 1.0]])))


def test_hl_adapted_metric_makes_xi_unit(rng):
    phi, xi, g = _nonflat(rng, 5, 2)
    dec = hl_decompose(phi, xi, g)
    adapted = hl_adapted_metric(dec, g)
    assert gram_norm(xi, adapted) == pytest.approx(gram_norm(xi, g), rel=1e-10)
    cross = dec.V.T @ adapted.entries @ dec.W.vectors
    np.testing.assert_allclose(cross, 0.0, atol=1e-10)


@pytest.mark.parametrize("n, p", [(3, 1), (4, 2), (5, 3), (5, 4), (6, 2)])
def test_hl_metric_realizes_theta(n, p):
    rng = np.random.default_rng(n * 10 + p)
    phi, xi, g = _nonflat(rng, n, p)
    theta = hl_decompose(phi, xi, g).theta
    C = np.sqrt(1.5) * minimal_hl_constant(phi, xi, g)
    adapted = hl_metric(phi, xi, g, C)
    assert comass_exact(phi, adapted).lower == pytest.approx(theta, abs=1e-6)
    assert evaluate(phi, xi) / gram_norm(xi, adapted) == pytest.approx(theta, abs=1e-9)


def test_hl_metric_rejects_small_constant(rng):
    phi, xi, g = _nonflat(rng, 4, 2)
    minimal = minimal_hl_constant(phi, xi, g)
    with pytest.raises(AdmissibilityError) as info:
        hl_metric(phi, xi, g, 0.5 * minimal)
    assert info.value.minimal == pytest.approx(minimal, rel=1e-9)


def test_hl_metric_requires_positive_theta(rng):
    phi, xi, g = _nonflat(rng, 4, 2)
    with pytest.raises(InvalidInputError):
        hl_metric(phi, xi.reversed(), g, 100.0)


# ==================== 圆盘丛模型 ====================

def test_bundle_point_all_horizontal_is_calibrated():
    model = bundle_point_model([np.pi / 2] * 3, 3, 3)
    assert comass_exact(model.phi, model.g).lower == pytest.approx(1.0)
    assert evaluate(model.phi, model.tangent_frame) == pytest.approx(1.0)


@pytest.mark.parametrize("angles", [(0.3, 1.2, np.pi / 2), (0.05, 0.05, 0.05), (np.pi / 2, np.pi / 2, 1.5)])
def test_bundle_point_tilted_exceeds_one(angles):
    model = bundle_point_model(angles, 3, 3)
    value = comass_exact(model.phi, model.g).lower
    assert value == pytest.approx(1.0 / np.prod(np.sin(angles)))
    assert value > 1.0
    ratio = evaluate(model.phi, model.tangent_frame) / gram_norm(model.tangent_frame, model.g)
    assert ratio == pytest.approx(1.0)


def test_bundle_point_validation():
    with pytest.raises(InvalidInputError):
        bundle_point_model([0.0, 1.0], 2, 2)
    with pytest.raises(InvalidInputError):
        bundle_point_model([0.5, 0.5, 0.5], 3, 2)
    with pytest.raises(InvalidInputError):
        bundle_point_model([0.5], 2, 2)


# ==================== 分块权重 ====================

def test_split_blocks_roundtrip():
    g = MetricPoint.diagonal([1.0, 2.0, 3.0, 4.0])
    blocks = split_blocks(g, [1, 3])
    assert [b.n for b in blocks] == [1, 3]
    np.testing.assert_allclose(blocks[1].entries, np.diag([2.0, 3.0, 4.0]))


def test_split_blocks_rejects_coupling():
    entries = np.eye(3)
    entries[0, 2] = entries[2, 0] = 0.1
    with pytest.raises(InvalidInputError):
        split_blocks(MetricPoint(entries), [1, 2])


def test_star_weight_preserves_total_volume():
    blocks = [(MetricPoint.identity(1), e) for e in (1.0, 1.0, -2.0)]
    result = split_weight_transform(blocks, 2.0, preserve_volume=True)
    assert np.linalg.det(result.metric.entries) == pytest.approx(1.0)
    assert result.volume_factor([0, 1, 2]) == pytest.approx(1.0)
    assert result.comass_factor([2]) == pytest.approx(2.0)


def test_weight_transform_identity_at_one(rng):
    g = MetricPoint.random_spd(2, rng)
    result = split_weight_transform([(g, 1.0), (MetricPoint.identity(2), -1.0)], 1.0)
    np.testing.assert_allclose(result.metric.entries[:2, :2], g.entries)
    np.testing.assert_allclose(result.metric.entries[2:, 2:], np.eye(2))


def test_weight_transform_validation():
    with pytest.raises(InvalidInputError):
        split_weight_transform([(MetricPoint.identity(2), 1.0)], 0.5)
    with pytest.raises(InvalidInputError):
        split_weight_transform([(MetricPoint.identity(2), 1.0)], 2.0, preserve_volume=True)


def test_exponent_patterns():
    assert sum(STAR_EXPONENTS) == 1.0
    assert STAR_PRIME_EXPONENTS[-1] == -2.0
    assert asterisk_exponents(1.0) == STAR_EXPONENTS
    assert asterisk_exponents(0.25) == (1.0, 0.25, -0.25)
    assert asterisk_prime_exponents(1.0) == STAR_PRIME_EXPONENTS
    assert sum(asterisk_prime_exponents(0.5)) == pytest.approx(1.0)


def test_weighted_axis_sum_bounded():
    """各块指数相同时权重变换退化为共形缩放"""
    phi = AltForm.from_terms(
        6, 2, [([1, 2], 1.0), ([3, 4], 1.0), ([5, 6], 1.0)]
    )
    blocks = [(MetricPoint.identity(2), e) for e in (1.0, 1.0, 1.0)]
    result = split_weight_transform(blocks, 4.0)
    assert comass_exact(phi, result.metric).lower == pytest.approx(0.25)
