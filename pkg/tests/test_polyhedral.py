"""Lifted cuts over polyhedra: pairwise bounds, maximal lifting, separation."""

import numpy as np
import pytest

from epicut import (
    Ball,
    FacetGeometry,
    LiftingTooLarge,
    NotOnFacet,
    Polyhedron,
    ball_cut,
    brute_force_lifting,
    check_cut_validity,
    facet_point,
    lifted_cut,
    lifting_bound,
    max_lifting,
    random_polyhedron,
    separate_polyhedron,
)


def halfspace():
    return Polyhedron(
        normals=np.array([[0.0, -1.0]]),
        offsets=np.array([-1.0]),
        interior_point=np.array([0.0, 0.0]),
    )


class TestLiftingBound:
    def test_opposite_pair(self, unit_square):
        lin, const = lifting_bound(unit_square, 0, 1)
        np.testing.assert_allclose(lin, [-0.5, 0.0])
        assert const == pytest.approx(0.5)

    def test_orthogonal_pair(self, unit_square):
        lin, const = lifting_bound(unit_square, 0, 2)
        np.testing.assert_allclose(lin, [0.0, 1.0])
        assert const == pytest.approx(0.0)

    def test_parallel_same_direction_is_unbounded(self):
        # duplicate of facet 0 shifted outward never limits the lift
        poly = Polyhedron(
            normals=np.array([[1.0, 0.0], [1.0, 0.0], [0.0, 1.0]]),
            offsets=np.array([0.0, -1.0, 0.0]),
            validate=False,
        )
        assert lifting_bound(poly, 0, 1) is None

    def test_agrees_with_wedge_trigonometry(self):
        rng = np.random.default_rng(21)
        checked = 0
        while checked < 100:
            poly = random_polyhedron(rng, dim=2, n_facets=int(rng.integers(3, 7)))
            geom = FacetGeometry(poly)
            i = int(rng.integers(poly.n_facets))
            y0 = facet_point(poly, i)
            if y0 is None:
                continue
            a_i = poly.normals[i]
            t = rng.normal(size=2)
            t -= (t @ a_i) / (a_i @ a_i) * a_i  # stay inside the facet plane
            y = y0 + 0.1 * t
            for j in range(poly.n_facets):
                if j == i or (i, j) not in geom.tangent:
                    continue
                aff = geom.affine_bound(i, j, y)
                ang = geom.angular_bound(i, j, y)
                assert aff == pytest.approx(ang, abs=1e-9 * (1.0 + abs(aff)))
                checked += 1


class TestMaxLifting:
    def test_edge_midpoint(self, unit_square):
        assert max_lifting(unit_square, np.array([0.0, 0.5]), 0) == pytest.approx(0.5)

    def test_vertex_allows_nothing(self, unit_square):
        assert max_lifting(unit_square, np.array([0.0, 0.0]), 0) == pytest.approx(0.0)

    def test_halfspace_unbounded(self):
        assert max_lifting(halfspace(), np.array([0.3, 1.0]), 0) == np.inf

    def test_off_facet_anchor_rejected(self, unit_square):
        with pytest.raises(NotOnFacet):
            max_lifting(unit_square, np.array([0.2, 0.5]), 0)

    def test_matches_bisection_oracle(self, unit_square):
        anchor = np.array([0.0, 0.5])
        assert max_lifting(unit_square, anchor, 0) == pytest.approx(
            brute_force_lifting(unit_square, anchor, 0), abs=1e-8
        )

    def test_affine_on_a_single_piece(self, unit_square):
        # the limit is a min of affine bounds; below s = 0.5 the bottom facet
        # is the unique binder, so collinear anchors give zero second difference
        ys = [np.array([0.0, s]) for s in (0.1, 0.2, 0.3)]
        vals = [max_lifting(unit_square, y, 0) for y in ys]
        assert vals[0] - 2 * vals[1] + vals[2] == pytest.approx(0.0, abs=1e-10)

    def test_concave_across_pieces(self, unit_square):
        # min of affines: the kink at s = 0.5 bends downward
        ys = [np.array([0.0, s]) for s in (0.2, 0.45, 0.7)]
        vals = [max_lifting(unit_square, y, 0) for y in ys]
        assert vals[0] - 2 * vals[1] + vals[2] < 0.0


class TestLiftedCut:
    def test_midpoint_full_lift_is_inscribed_ball(self, unit_square):
        cut = lifted_cut(unit_square, np.array([0.0, 0.5]), 0, 0.5)
        np.testing.assert_allclose(cut.x_coeff, [0.5, 0.5])
        assert cut.offset == pytest.approx(-0.25)

    def test_zero_lift_is_linearization(self, unit_square):
        cut = lifted_cut(unit_square, np.array([0.0, 0.5]), 0, 0.0)
        np.testing.assert_allclose(cut.x_coeff, [0.0, 0.5])
        assert cut.offset == pytest.approx(-0.25)

    def test_tight_at_anchor(self, unit_square):
        y = np.array([0.0, 0.3])
        cut = lifted_cut(unit_square, y, 0, 0.25)
        assert cut.residual(y, float(y @ y)) == pytest.approx(0.0, abs=1e-12)

    def test_over_lift_rejected(self, unit_square):
        with pytest.raises(LiftingTooLarge):
            lifted_cut(unit_square, np.array([0.0, 0.5]), 0, 0.6)

    def test_provenance_records_the_lift(self, unit_square):
        cut = lifted_cut(unit_square, np.array([0.0, 0.5]), 0, 0.4)
        assert cut.provenance.facet == 0
        assert cut.provenance.lift == pytest.approx(0.4)
        np.testing.assert_allclose(cut.provenance.anchor, [0.0, 0.5])


class TestSeparate:
    def test_unit_square_benchmark(self, unit_square):
        rep = separate_polyhedron(unit_square, np.array([0.5, 0.5]), 0.5)
        assert rep.violation == pytest.approx(0.25, abs=1e-9)
        np.testing.assert_allclose(rep.cut.x_coeff, [0.5, 0.5], atol=1e-9)
        assert rep.cut.offset == pytest.approx(-0.25, abs=1e-9)
        assert isinstance(rep.certificate, Ball)
        np.testing.assert_allclose(rep.certificate.center, [0.5, 0.5], atol=1e-9)
        assert rep.certificate.sq_radius == pytest.approx(0.25, abs=1e-9)
        assert rep.diagnostics["facet"] == 0  # ties resolved to lowest index

    def test_violation_recomputable_from_cut(self, unit_square):
        x, q = np.array([0.5, 0.5]), 0.5
        rep = separate_polyhedron(unit_square, x, q)
        assert rep.violation == pytest.approx(-rep.cut.residual(x, q), abs=1e-10)

    def test_separated_point_inside_region_not_cuttable(self, unit_square):
        # q* above the graph: the point belongs to the set being approximated
        rep = separate_polyhedron(unit_square, np.array([2.0, 0.5]), 5.0)
        assert rep.violation <= 1e-9

    def test_exterior_query_gets_linearization(self, unit_square):
        rep = separate_polyhedron(unit_square, np.array([2.0, 0.5]), 1.0)
        assert rep.violation == pytest.approx(4.25 - 1.0, abs=1e-7)

    def test_emitted_cut_is_valid(self, unit_square):
        rep = separate_polyhedron(unit_square, np.array([0.5, 0.5]), 0.5)
        verdict = check_cut_validity(unit_square, rep.cut, budget=2000, seed=4)
        assert verdict.valid

    def test_inflated_lift_caught_by_oracle(self, unit_square):
        from epicut import Cut

        rep = separate_polyhedron(unit_square, np.array([0.5, 0.5]), 0.5)
        prov = rep.cut.provenance
        # hand-build the same cut with the lift pushed past the limit
        y = prov.anchor
        a_i = unit_square.normals[prov.facet]
        b_i = float(unit_square.offsets[prov.facet])
        t = prov.lift + 1e-3
        bad = Cut(1.0, y + t * a_i, float(-(y @ y) - 2.0 * t * b_i), None)
        verdict = check_cut_validity(unit_square, bad, budget=4000, seed=4)
        assert not verdict.valid
        x, q = verdict.counterexample
        assert bad.residual(x, q) < -1e-7

    def test_beats_random_feasible_anchors(self, unit_square):
        rng = np.random.default_rng(33)
        x_star, q_star = np.array([0.6, 0.4]), 0.3
        rep = separate_polyhedron(unit_square, x_star, q_star)
        for _ in range(300):
            i = int(rng.integers(4))
            y0 = facet_point(unit_square, i)
            a = unit_square.normals[i]
            t = rng.normal(size=2)
            t -= (t @ a) / (a @ a) * a
            y = np.clip(y0 + rng.uniform(-0.5, 0.5) * t, 0.0, 1.0)
            if abs(a @ y - unit_square.offsets[i]) > 1e-12:
                continue
            cap = max_lifting(unit_square, y, i)
            lift = float(rng.uniform(0.0, min(cap, 5.0)))
            cut = lifted_cut(unit_square, y, i, lift)
            assert -cut.residual(x_star, q_star) <= rep.violation + 1e-8

    def test_thread_pool_matches_serial(self, unit_square):
        a = separate_polyhedron(unit_square, np.array([0.5, 0.5]), 0.5, threads=1)
        b = separate_polyhedron(unit_square, np.array([0.5, 0.5]), 0.5, threads=4)
        assert a.violation == pytest.approx(b.violation, abs=1e-12)
        np.testing.assert_allclose(a.cut.x_coeff, b.cut.x_coeff, atol=1e-12)
