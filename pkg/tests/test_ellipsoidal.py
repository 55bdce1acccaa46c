"""Inscribed-ball cuts for ellipsoidal regions and the radius line search."""

import numpy as np
import pytest

from epicut import (
    Ball,
    Ellipsoid,
    UnboundedEllipsoid,
    ball_cut,
    check_ball_containment,
    containment_margin,
    fixed_rho_separate,
    max_inscribed_sq_radius,
    probe_concavity,
    separate_ellipsoid,
)


def disk_margin(mu, rho):
    return 1.0 - (np.linalg.norm(mu) + np.sqrt(rho)) ** 2


class TestContainmentMargin:
    @pytest.mark.parametrize(
        "mu,rho",
        [
            ((0.0, 0.0), 1.0),
            ((0.0, 0.0), 0.25),
            ((0.5, 0.0), 0.25),
            ((0.8, 0.0), 0.25),
            ((0.3, -0.4), 0.04),
            ((0.0, 0.0), 1e-12),
        ],
    )
    def test_disk_closed_form(self, unit_disk, mu, rho):
        margin, _ = containment_margin(unit_disk, Ball(np.array(mu), rho))
        assert margin == pytest.approx(disk_margin(np.array(mu), rho), abs=1e-7)

    def test_tangent_multiplier(self, unit_disk):
        # at tangency the optimal scalar is 1 + ||mu||/sqrt(rho) = 2
        margin, cert = containment_margin(unit_disk, Ball(np.array([0.5, 0.0]), 0.25))
        assert margin == pytest.approx(0.0, abs=1e-9)
        assert cert.multiplier == pytest.approx(2.0, abs=1e-6)

    def test_poking_ball_margin(self, unit_disk):
        margin, _ = containment_margin(unit_disk, Ball(np.array([0.8, 0.0]), 0.25))
        assert margin == pytest.approx(-0.69, abs=1e-7)

    def test_certificate_recomputes_margin(self, unit_disk):
        ball = Ball(np.array([0.2, 0.3]), 0.1)
        margin, cert = containment_margin(unit_disk, ball)
        lam = unit_disk.eigvals
        rebuilt = float(
            -np.sum(cert.defect**2 / (cert.multiplier - lam))
            - ball.center @ unit_disk.matrix @ ball.center
            + 2.0 * unit_disk.lin @ ball.center
            - unit_disk.offset
            - ball.sq_radius * cert.multiplier
        )
        assert rebuilt == pytest.approx(margin, abs=1e-9)
        assert cert.slack == pytest.approx(margin)

    def test_sign_matches_geometric_oracle(self):
        rng = np.random.default_rng(17)
        disagreements = 0
        for _ in range(120):
            w = rng.uniform(0.5, 4.0, size=2)
            R = np.linalg.qr(rng.normal(size=(2, 2)))[0]
            A = R @ np.diag(w) @ R.T
            center = rng.normal(size=2) * 0.5
            depth = float(rng.uniform(0.2, 2.0))
            ell = Ellipsoid(A, A @ center, float(center @ A @ center) - depth)
            mu = center + rng.normal(size=2) * 0.3
            rho = float(rng.uniform(0.0, depth / np.max(w))) * rng.uniform(0, 1.5)
            margin, _ = containment_margin(ell, Ball(mu, rho))
            verdict = check_ball_containment(ell, Ball(mu, rho))
            if abs(margin) <= 1e-6:
                continue  # boundary calls may go either way
            if (margin > 0) != verdict.contained:
                disagreements += 1
        assert disagreements == 0

    def test_unbounded_region_rejected(self):
        flat = Ellipsoid(np.diag([1.0, 0.0]), np.zeros(2), -1.0)
        with pytest.raises(UnboundedEllipsoid):
            containment_margin(flat, Ball(np.zeros(2), 0.1))


class TestInscribedRadius:
    def test_disk(self, unit_disk):
        assert max_inscribed_sq_radius(unit_disk) == pytest.approx(1.0, rel=1e-8)

    def test_ellipse_shortest_axis(self):
        ell = Ellipsoid(np.diag([4.0, 1.0]), np.zeros(2), -1.0)
        assert max_inscribed_sq_radius(ell) == pytest.approx(0.25, rel=1e-8)

    def test_matches_span_over_top_eigenvalue(self):
        rng = np.random.default_rng(8)
        for _ in range(10):
            w = rng.uniform(0.5, 5.0, size=3)
            R = np.linalg.qr(rng.normal(size=(3, 3)))[0]
            A = R @ np.diag(w) @ R.T
            center = rng.normal(size=3) * 0.4
            depth = float(rng.uniform(0.3, 1.5))
            ell = Ellipsoid(A, A @ center, float(center @ A @ center) - depth)
            got = max_inscribed_sq_radius(ell)
            assert got == pytest.approx(depth / np.max(w), rel=1e-6)


class TestFixedRadius:
    def test_center_query_values(self, unit_disk):
        r = fixed_rho_separate(unit_disk, np.zeros(2), 0.0, 0.25)
        assert r.feasible and r.value == pytest.approx(0.25, abs=1e-8)
        r = fixed_rho_separate(unit_disk, np.zeros(2), 0.0, 1.0)
        assert r.feasible and r.value == pytest.approx(1.0, abs=1e-7)
        np.testing.assert_allclose(r.center, [0.0, 0.0], atol=1e-6)

    def test_infeasible_radius(self, unit_disk):
        r = fixed_rho_separate(unit_disk, np.zeros(2), 0.0, 1.21)
        assert not r.feasible
        assert r.value == -np.inf

    def test_certificate_present_and_clean(self, unit_disk):
        r = fixed_rho_separate(unit_disk, np.array([0.3, 0.0]), 0.0, 0.36)
        assert r.feasible
        assert np.isfinite(r.certificate.slack)
        assert r.certificate.slack >= -1e-9  # reported center truly admits the ball


class TestSeparate:
    def test_disk_center_benchmark(self, unit_disk):
        rep = separate_ellipsoid(unit_disk, np.zeros(2), 0.0)
        assert rep.violation == pytest.approx(1.0, abs=1e-5)
        assert rep.cut.q_coeff == 1.0
        np.testing.assert_allclose(rep.cut.x_coeff, [0.0, 0.0], atol=1e-6)
        assert rep.cut.offset == pytest.approx(1.0, abs=1e-5)

    def test_point_of_the_set_not_separated(self, unit_disk):
        rep = separate_ellipsoid(unit_disk, np.array([2.0, 0.0]), 4.0)
        assert rep.violation <= 1e-8

    def test_exterior_below_graph_separated_by_tangent(self, unit_disk):
        rep = separate_ellipsoid(unit_disk, np.array([2.0, 0.0]), 3.0)
        assert rep.violation == pytest.approx(1.0, abs=1e-7)

    def test_interior_profile_concave_and_distance_convex(self, unit_disk):
        x_star, q_star = np.array([0.3, 0.0]), 0.0
        rho_hi = max_inscribed_sq_radius(unit_disk) * (1 - 1e-6)
        grid = np.linspace(1e-6, rho_hi, 60)
        theta, dist = [], []
        for rho in grid:
            r = fixed_rho_separate(unit_disk, x_star, q_star, float(rho))
            assert r.feasible
            theta.append(r.value)
            dist.append(float(np.sum((x_star - r.center) ** 2)))
        ct = probe_concavity(lambda i: theta[int(i)], np.arange(60.0))
        cn = probe_concavity(lambda i: -dist[int(i)], np.arange(60.0))
        assert ct.concave
        assert cn.concave

    def test_golden_matches_grid(self, unit_disk):
        x_star, q_star = np.array([0.3, 0.1]), -0.2
        rep = separate_ellipsoid(unit_disk, x_star, q_star)
        rho_hi = max_inscribed_sq_radius(unit_disk)
        best = -np.inf
        for rho in np.linspace(0.0, rho_hi, 200):
            r = fixed_rho_separate(unit_disk, x_star, q_star, float(rho))
            if r.feasible:
                best = max(best, r.value)
        assert rep.violation >= best - 1e-4

    def test_emitted_cut_matches_provenance_ball(self, unit_disk):
        rep = separate_ellipsoid(unit_disk, np.array([0.2, -0.1]), -0.4)
        ball = rep.cut.provenance.ball
        assert isinstance(ball, Ball)
        rebuilt = ball_cut(ball)
        np.testing.assert_allclose(rebuilt.x_coeff, rep.cut.x_coeff, atol=1e-9)
        assert rebuilt.offset == pytest.approx(rep.cut.offset, abs=1e-9)
        # the containment certificate must actually certify this ball
        cert = rep.certificate
        margin, again = containment_margin(unit_disk, ball)
        assert margin >= -1e-9
        assert cert.multiplier == pytest.approx(again.multiplier, rel=1e-6, abs=1e-9)
