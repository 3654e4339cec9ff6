from itertools import combinations

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from app.errors import DegenerateError, InvalidInputError
from app.geometry.multilinear import (
    AltForm,
    Frame,
    MetricPoint,
    canonical_frame,
    evaluate,
    gram_norm,
    hodge_star,
    pullback,
    random_form,
    random_frame,
    wedge,
)

seeds = st.integers(min_value=0, max_value=2 ** 32 - 1)
dims = st.integers(min_value=2, max_value=6)


# ==================== 外积 ====================

def test_wedge_basis():
    e1 = AltForm.axis(3, [1])
    e2 = AltForm.axis(3, [2])
    e3 = AltForm.axis(3, [3])
    assert wedge(e1, e2) == AltForm.axis(3, [1, 2])
    assert wedge(e2, e1) == AltForm.axis(3, [1, 2], -1.0)
    assert wedge(e1 + e2, e3) == AltForm.from_terms(3, 2, [([1, 3], 1.0), ([2, 3], 1.0)])


def test_wedge_repeated_index_vanishes():
    e12 = AltForm.axis(4, [1, 2])
    assert wedge(e12, e12).is_zero()


def test_wedge_rejects_mismatch():
    with pytest.raises(InvalidInputError):
        wedge(AltForm.axis(3, [1]), AltForm.axis(4, [1]))
    with pytest.raises(InvalidInputError):
        wedge(AltForm.axis(3, [1, 2]), AltForm.axis(3, [2, 3]))


@settings(derandomize=True, deadline=None, max_examples=40)
@given(seed=seeds, n=st.integers(min_value=3, max_value=6))
def test_wedge_graded_anticommutative(seed, n):
    rng = np.random.default_rng(seed)
    p = int(rng.integers(1, n))
    q = int(rng.integers(1, n - p + 1))
    a = random_form(n, p, rng)
    b = random_form(n, q, rng)
    assert wedge(a, b) == wedge(b, a) * (-1) ** (p * q)


@settings(derandomize=True, deadline=None, max_examples=30)
@given(seed=seeds)
def test_wedge_associative(seed):
    rng = np.random.default_rng(seed)
    a, b, c = (random_form(6, 1, rng), random_form(6, 2, rng), random_form(6, 2, rng))
    left = wedge(wedge(a, b), c)
    right = wedge(a, wedge(b, c))
    np.testing.assert_allclose(left.coeffs, right.coeffs, atol=1e-12)


def _value_by_minors(phi, V):
    """φ(v₁, …, v_p) = Σ_I φ_I det(V[I, :])"""
    return sum(
        phi.coefficient([i + 1 for i in idx]) * np.linalg.det(V[list(idx), :])
        for idx in combinations(range(phi.n), phi.p)
    )


@settings(derandomize=True, deadline=None, max_examples=40)
@given(seed=seeds, n=dims)
def test_wedge_matches_laplace_expansion(seed, n):
    rng = np.random.default_rng(seed)
    p = int(rng.integers(1, n))
    q = int(rng.integers(1, n - p + 1))
    a = random_form(n, p, rng)
    b = random_form(n, q, rng)
    V = random_frame(n, p + q, rng).vectors
    xi = Frame(V[:, :p]).concat(Frame(V[:, p:]))
    expected = 0.0
    for S in combinations(range(p + q), p):
        rest = [j for j in range(p + q) if j not in S]
        sign = (-1) ** (sum(S) - p * (p - 1) // 2)
        expected += sign * _value_by_minors(a, V[:, list(S)]) * _value_by_minors(b, V[:, rest])
    assert evaluate(wedge(a, b), xi) == pytest.approx(expected, abs=1e-10)


# ==================== 构造与校验 ====================

def test_from_terms_validation():
    with pytest.raises(InvalidInputError):
        AltForm.from_terms(4, 2, [([2, 1], 1.0)])
    with pytest.raises(InvalidInputError):
        AltForm.from_terms(4, 2, [([1, 5], 1.0)])
    with pytest.raises(InvalidInputError):
        AltForm.from_terms(4, 2, [([1, 2, 3], 1.0)])
    with pytest.raises(InvalidInputError):
        AltForm(4, 2, [np.nan] * 6)


def test_from_terms_accumulates():
    phi = AltForm.from_terms(3, 1, [([1], 1.0), ([1], 2.0)])
    assert phi.coefficient([1]) == 3.0


def test_equality_tolerance():
    phi = AltForm.axis(3, [1, 2])
    assert phi == AltForm(3, 2, phi.coeffs + 5e-13)
    assert phi != AltForm(3, 2, phi.coeffs + 1e-9)


def test_degenerate_frame():
    with pytest.raises(DegenerateError):
        Frame(np.array([[1.0, 2.0], [1.0, 2.0], [0.0, 0.0]]))
    with pytest.raises(DegenerateError):
        Frame(np.zeros((3, 1)))


def test_metric_point_rejects_indefinite():
    with pytest.raises(InvalidInputError):
        MetricPoint(np.diag([1.0, -1.0]))
    with pytest.raises(InvalidInputError):
        MetricPoint(np.array([[1.0, 0.5], [0.0, 1.0]]))


# ==================== 求值 ====================

def test_evaluate_axis_form():
    phi = AltForm.axis(4, [1, 3])
    assert evaluate(phi, Frame.standard(4, [1, 3])) == pytest.approx(1.0)
    assert evaluate(phi, Frame.standard(4, [3, 1])) == pytest.approx(-1.0)
    assert evaluate(phi, Frame.standard(4, [1, 2])) == pytest.approx(0.0)


def test_concat_frames():
    phi = AltForm.axis(4, [1, 2, 3])
    xi = Frame.standard(4, [1]).concat(Frame.standard(4, [2, 3]))
    assert xi.count == 3
    assert evaluate(phi, xi) == pytest.approx(1.0)
    assert evaluate(phi, Frame.standard(4, [2]).concat(Frame.standard(4, [1, 3]))) == pytest.approx(-1.0)
    with pytest.raises(InvalidInputError):
        Frame.standard(4, [1]).concat(Frame.standard(3, [2]))


def test_evaluate_degree_mismatch():
    with pytest.raises(InvalidInputError):
        evaluate(AltForm.axis(4, [1, 3]), Frame.standard(4, [1]))


@settings(derandomize=True, deadline=None, max_examples=40)
@given(seed=seeds, n=dims)
def test_permuted_frame_keeps_value(seed, n):
    rng = np.random.default_rng(seed)
    p = int(rng.integers(1, n + 1))
    phi = random_form(n, p, rng)
    xi = random_frame(n, p, rng)
    order = list(rng.permutation(p))
    assert evaluate(phi, xi.permuted(order)) == pytest.approx(evaluate(phi, xi), abs=1e-10)
    assert evaluate(phi, xi.reversed()) == pytest.approx(-evaluate(phi, xi), abs=1e-12)


@settings(derandomize=True, deadline=None, max_examples=40)
@given(seed=seeds, n=dims)
def test_evaluate_multilinear(seed, n):
    rng = np.random.default_rng(seed)
    p = int(rng.integers(1, n + 1))
    phi = random_form(n, p, rng)
    V = rng.standard_normal((n, p))
    w = rng.standard_normal(n)
    t = float(rng.uniform(0.5, 2.0))
    base = evaluate(phi, Frame(V, strict=False))
    shifted = V.copy()
    shifted[:, 0] = t * V[:, 0] + w
    other = V.copy()
    other[:, 0] = w
    expected = t * base + evaluate(phi, Frame(other, strict=False))
    assert evaluate(phi, Frame(shifted, strict=False)) == pytest.approx(expected, abs=1e-9)


def test_gram_norm_orthonormal(rng):
    xi = random_frame(5, 3, rng)
    assert gram_norm(xi, MetricPoint.identity(5)) == pytest.approx(1.0)
    assert gram_norm(xi, MetricPoint.identity(5).scaled(4.0)) == pytest.approx(8.0)


def test_gram_norm_sheared_pair():
    xi = Frame.from_columns([1.0, 0.0], [1.0, 1.0])
    assert gram_norm(xi, MetricPoint.identity(2)) == pytest.approx(1.0)


def test_random_frame_single_vector():
    xi = random_frame(3, 1, seed=0)
    assert xi.count == 1
    assert np.linalg.norm(xi.vectors[:, 0]) == pytest.approx(1.0)
    np.testing.assert_array_equal(random_frame(3, 1, seed=0).vectors, xi.vectors)


@settings(derandomize=True, deadline=None, max_examples=40)
@given(seed=seeds, n=dims, f=st.floats(min_value=0.1, max_value=10.0))
def test_gram_norm_scales_with_metric(seed, n, f):
    rng = np.random.default_rng(seed)
    p = int(rng.integers(1, n + 1))
    xi = Frame(np.eye(n)[:, :p] + 0.3 * rng.standard_normal((n, p)))
    g = MetricPoint.random_spd(n, rng)
    assert gram_norm(xi, g.scaled(f)) == pytest.approx(f ** (p / 2) * gram_norm(xi, g), rel=1e-9)


# ==================== 拉回与 Hodge 星 ====================

@settings(derandomize=True, deadline=None, max_examples=40)
@given(seed=seeds, n=dims)
def test_pullback_matches_pushed_frame(seed, n):
    rng = np.random.default_rng(seed)
    p = int(rng.integers(1, n + 1))
    phi = random_form(n, p, rng)
    A = rng.standard_normal((n, n))
    V = rng.standard_normal((n, p))
    lhs = evaluate(pullback(phi, A), Frame(V, strict=False))
    rhs = evaluate(phi, Frame(A @ V, strict=False))
    assert lhs == pytest.approx(rhs, rel=1e-9, abs=1e-9)


@settings(derandomize=True, deadline=None, max_examples=40)
@given(seed=seeds, n=dims)
def test_hodge_star_involution(seed, n):
    rng = np.random.default_rng(seed)
    p = int(rng.integers(0, n + 1))
    phi = random_form(n, p, rng)
    g = MetricPoint.random_spd(n, rng)
    twice = hodge_star(hodge_star(phi, g), g)
    np.testing.assert_allclose(twice.coeffs, (-1) ** (p * (n - p)) * phi.coeffs, atol=1e-9)


def test_hodge_star_standard():
    star = hodge_star(AltForm.axis(3, [1]), MetricPoint.identity(3))
    assert star == AltForm.axis(3, [2, 3])
    star = hodge_star(AltForm.axis(3, [2]), MetricPoint.identity(3))
    assert star == AltForm.axis(3, [1, 3], -1.0)


def test_hodge_star_respects_orientation():
    phi = AltForm.axis(3, [1])
    flipped = Frame(np.eye(3), orientation=-1)
    assert hodge_star(phi, MetricPoint.identity(3), flipped) == AltForm.axis(3, [2, 3], -1.0)


# ==================== 典范分解 ====================

@settings(derandomize=True, deadline=None, max_examples=60)
@given(seed=seeds, n=dims)
def test_canonical_frame_reconstructs(seed, n):
    rng = np.random.default_rng(seed)
    p = int(rng.integers(1, n + 1))
    r = int(rng.integers(1, n + 1))
    xi = Frame(rng.standard_normal((n, p)))
    V = Frame(rng.standard_normal((n, r)))
    g = MetricPoint.random_spd(n, rng)
    frame = canonical_frame(xi, V, g)
    expected = xi.simple_coordinates() / gram_norm(xi, g)
    np.testing.assert_allclose(frame.reconstruct().simple_coordinates(), expected, atol=1e-9)
    assert frame.r + frame.s - frame.k == p
    assert np.all((frame.angles > 0) & (frame.angles < np.pi / 2))


def test_canonical_frame_inside_subspace():
    xi = Frame.standard(4, [1, 2])
    V = Frame.standard(4, [1, 2, 3])
    frame = canonical_frame(xi, V, MetricPoint.identity(4))
    assert frame.k == 0
    assert frame.r == 2
    assert frame.s == 0


def test_canonical_frame_single_angle():
    theta = 0.3
    xi = Frame.from_columns([np.cos(theta), 0.0, np.sin(theta)])
    V = Frame.standard(3, [1, 2])
    frame = canonical_frame(xi, V, MetricPoint.identity(3))
    assert frame.k == 1
    assert frame.angles[0] == pytest.approx(theta)
    assert frame.eigenvalues[0] == pytest.approx(np.cos(theta) ** 2)
