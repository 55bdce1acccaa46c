"""Cut records, the normalizing change of variables, and cut classification."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from epicut import (
    Ball,
    Cut,
    CutKind,
    InvalidCut,
    NotPositiveDefinite,
    Polyhedron,
    QuadraticForm,
    ball_cut,
    classify_cut,
    evaluate_cut,
    linearization_cut,
    normalize,
)


class TestNormalize:
    def test_diagonal_form(self, unit_square):
        quad = QuadraticForm(np.diag([4.0, 1.0]), np.zeros(2), 0.0)
        region, record = normalize(quad, unit_square)
        np.testing.assert_allclose(record.matrix, np.diag([2.0, 1.0]), atol=1e-12)
        np.testing.assert_allclose(record.shift, np.zeros(2), atol=1e-12)
        assert record.q_offset == 0.0
        # unit square maps to [0,2] x [0,1]
        corners = np.array([[0, 0], [2, 0], [2, 1], [0, 1]], dtype=float)
        for c in corners:
            assert np.min(region.normals @ c - region.offsets) >= -1e-12

    def test_quadratic_reproduced(self, unit_square):
        rng = np.random.default_rng(5)
        R = rng.normal(size=(2, 2))
        M = R @ R.T + 0.3 * np.eye(2)
        quad = QuadraticForm(M, rng.normal(size=2), float(rng.normal()))
        _, record = normalize(quad, unit_square)
        for _ in range(200):
            x = rng.normal(size=2) * 3.0
            xp = record.apply_point(x)
            direct = float(x @ M @ x + quad.linear @ x + quad.constant)
            via = float(xp @ xp) + record.q_offset
            assert abs(direct - via) <= 1e-9 * (1.0 + abs(direct))

    def test_roundtrip_membership(self, unit_square):
        rng = np.random.default_rng(6)
        quad = QuadraticForm(np.array([[2.0, 0.5], [0.5, 1.0]]), np.array([1.0, -0.5]), 0.2)
        region, record = normalize(quad, unit_square)
        for _ in range(100):
            x = rng.uniform(-0.5, 1.5, size=2)
            inside_orig = np.min(unit_square.normals @ x - unit_square.offsets) >= 0.0
            xp = record.apply_point(x)
            inside_new = np.min(region.normals @ xp - region.offsets) >= -1e-9
            assert inside_orig == inside_new or abs(
                np.min(unit_square.normals @ x - unit_square.offsets)
            ) < 1e-9
            np.testing.assert_allclose(record.invert_point(xp), x, atol=1e-9)

    def test_rejects_singular(self, unit_square):
        with pytest.raises(NotPositiveDefinite):
            normalize(QuadraticForm(np.diag([1.0, 0.0]), np.zeros(2), 0.0), unit_square)


class TestCutConstructors:
    def test_linearization_at_origin(self):
        cut = linearization_cut(np.zeros(2))
        assert cut.q_coeff == 1.0
        np.testing.assert_allclose(cut.x_coeff, np.zeros(2))
        assert cut.offset == 0.0  # q >= 0

    def test_linearization_tangency(self):
        y = np.array([1.0, 0.0])
        cut = linearization_cut(y)
        # q >= 2 x1 - 1, tight on the graph at y
        assert cut.residual(y, float(y @ y)) == pytest.approx(0.0, abs=1e-14)
        assert cut.offset == pytest.approx(-1.0)

    def test_ball_cut_unit_disk(self):
        cut = ball_cut(Ball(np.zeros(2), 1.0))
        # q >= 1 everywhere outside the open unit ball
        assert cut.q_coeff == 1.0
        np.testing.assert_allclose(cut.x_coeff, np.zeros(2))
        assert cut.offset == pytest.approx(1.0)

    def test_ball_cut_square_center(self):
        cut = ball_cut(Ball(np.array([0.5, 0.5]), 0.25))
        # q >= x1 + x2 - 0.25
        np.testing.assert_allclose(cut.x_coeff, [0.5, 0.5])
        assert cut.offset == pytest.approx(-0.25)

    def test_zero_radius_reduces_to_linearization(self):
        y = np.array([0.3, -0.7])
        a = ball_cut(Ball(y, 0.0))
        b = linearization_cut(y)
        np.testing.assert_allclose(a.x_coeff, b.x_coeff)
        assert a.offset == pytest.approx(b.offset)

    def test_evaluate_cut(self):
        cut = ball_cut(Ball(np.array([0.5, 0.5]), 0.25))
        assert evaluate_cut(cut, np.array([0.5, 0.5]), 0.5) == pytest.approx(-0.25)


@settings(max_examples=200, deadline=None)
@given(
    cx=st.floats(-2, 2),
    cy=st.floats(-2, 2),
    rho=st.floats(0, 4),
    px=st.floats(-4, 4),
    py=st.floats(-4, 4),
)
def test_ball_cut_violating_set_is_the_ball(cx, cy, rho, px, py):
    """A ball cut is violated on the graph q = ||x||^2 exactly inside the ball."""
    center = np.array([cx, cy])
    cut = ball_cut(Ball(center, rho))
    x = np.array([px, py])
    r = cut.residual(x, float(x @ x))
    sqdist = float(np.sum((x - center) ** 2))
    # identity r = sqdist - rho holds to rounding; leave a band at the rim
    scale = 1.0 + rho + float(center @ center) + float(x @ x)
    if sqdist < rho - 1e-12 * scale:
        assert r < 0.0
    elif sqdist > rho + 1e-12 * scale:
        assert r >= 0.0


class TestClassify:
    def test_dominated_by_larger_concentric_ball(self, unit_square):
        center = np.array([0.3, 0.5])
        cut = ball_cut(Ball(center, 0.04))
        got = classify_cut(cut, unit_square)
        assert got.kind == CutKind.DOMINATED
        grown = got.witness
        np.testing.assert_allclose(grown.x_coeff, center)
        # inscribed tangency at squared radius 0.3^2
        assert float(grown.x_coeff @ grown.x_coeff) + grown.offset == pytest.approx(
            0.09
        )
        assert grown.residual(center, float(center @ center)) < cut.residual(
            center, float(center @ center)
        )

    def test_dominated_negative_radius(self, unit_square):
        cut = Cut(1.0, np.array([0.5, 0.5]), -0.6, None)  # implied sq radius -0.1
        got = classify_cut(cut, unit_square)
        assert got.kind == CutKind.DOMINATED
        assert got.witness.offset == pytest.approx(-0.5)  # its own linearization

    def test_poking_ball_is_invalid(self, unit_square):
        with pytest.raises(InvalidCut):
            classify_cut(Cut(1.0, np.array([0.5, 0.5]), -0.19, None), unit_square)

    def test_lifted_first_order(self, unit_square):
        # inscribed tangent ball anchored on the x1 = 0 facet
        cut = Cut(1.0, np.array([0.5, 0.5]), -0.25, None)
        got = classify_cut(cut, unit_square)
        assert got.kind == CutKind.LIFTED_FIRST_ORDER
        assert got.facet == 0
        np.testing.assert_allclose(got.anchor, [0.0, 0.5], atol=1e-9)

    def test_linearization(self, unit_square):
        cut = linearization_cut(np.array([0.0, 0.5]))
        got = classify_cut(cut, unit_square)
        assert got.kind == CutKind.LINEARIZATION

    def test_trivial_complement_valid(self, unit_square):
        got = classify_cut(Cut(0.0, np.array([-0.5, 0.0]), 0.0, None), unit_square)
        assert got.kind == CutKind.TRIVIAL_COMPLEMENT_VALID

    def test_negative_q_coefficient_rejected(self):
        with pytest.raises(ValueError):
            Cut(-1.0, np.array([0.5, 0.5]), -0.25, None)

    def test_classification_stable_under_normalized(self, unit_square):
        cut = Cut(2.0, np.array([1.0, 1.0]), -0.5, None).normalized()
        got = classify_cut(cut, unit_square)
        again = classify_cut(cut, unit_square)
        assert got.kind == again.kind == CutKind.LIFTED_FIRST_ORDER


class TestTransformCuts:
    def test_apply_invert_roundtrip(self):
        rng = np.random.default_rng(9)
        quad = QuadraticForm(
            np.array([[3.0, 0.4], [0.4, 1.5]]), np.array([0.2, -1.0]), 0.7
        )
        square = Polyhedron(
            normals=np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]]),
            offsets=np.array([0.0, -1.0, 0.0, -1.0]),
        )
        _, record = normalize(quad, square)
        for _ in range(25):
            cut = Cut(1.0, rng.normal(size=2), float(rng.normal()), None)
            back = record.invert_cut(record.apply_cut(cut))
            np.testing.assert_allclose(back.x_coeff, cut.x_coeff, atol=1e-10)
            assert back.offset == pytest.approx(cut.offset, abs=1e-10)

    def test_residuals_preserved(self):
        quad = QuadraticForm(np.diag([4.0, 1.0]), np.array([2.0, 0.0]), -0.5)
        square = Polyhedron(
            normals=np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]]),
            offsets=np.array([0.0, -1.0, 0.0, -1.0]),
        )
        _, record = normalize(quad, square)
        rng = np.random.default_rng(10)
        for _ in range(25):
            cut = Cut(1.0, rng.normal(size=2), float(rng.normal()), None)
            x = rng.normal(size=2)
            q = float(rng.normal())
            xp, qp = record.apply_query(x, q)
            mapped = record.apply_cut(cut)
            assert mapped.residual(xp, qp) == pytest.approx(
                cut.residual(x, q), abs=1e-9
            )
