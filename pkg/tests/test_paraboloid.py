"""Lifted cuts for the squared-norm epigraph outside a max-affine region."""
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from epicut.errors import (
    IdenticalNormals,
    LiftingTooLarge,
    NotInRelativeInterior,
    SameFacetPair,
)
from epicut.model import ParaboloidComplement, TransformRecord
from epicut.oracles import check_cut_validity
from epicut.paraboloid import (
    ParaboloidCut,
    lifting_limit,
    max_paraboloid_lifting,
    paraboloid_cut,
    restore_paraboloid_cut,
    separate_paraboloid,
    transform_paraboloid_cut,
)


def random_region(rng, d, m):
    """Facet normals kept pairwise distinct so every pair limit is finite."""
    while True:
        normals = rng.normal(size=(m, d))
        gram_ok = True
        for i in range(m):
            for j in range(i + 1, m):
                if np.linalg.norm(normals[i] - normals[j]) < 0.3:
                    gram_ok = False
        if gram_ok:
            break
    offsets = rng.normal(size=m)
    return ParaboloidComplement(normals, offsets)


def dominated_anchor(region, rng, margin=1e-6):
    """Random anchor together with the facet that strictly wins there."""
    for _ in range(200):
        x = rng.normal(size=region.dim) * 2.0
        vals = region.normals @ x - region.offsets
        order = np.argsort(vals)
        if vals[order[-1]] - vals[order[-2]] > margin:
            return x, int(order[-1])
    raise AssertionError("could not sample a strictly dominated anchor")


class TestLiftingLimit:
    def test_absval_limit_is_two(self, absval):
        assert lifting_limit(absval, np.array([1.0]), 0, 1) == pytest.approx(2.0)
        assert lifting_limit(absval, np.array([-1.0]), 1, 0) == pytest.approx(2.0)

    def test_scales_with_anchor(self, absval):
        # numerator is the floor gap, denominator the fixed normal spread
        assert lifting_limit(absval, np.array([0.5]), 0, 1) == pytest.approx(1.0)
        assert lifting_limit(absval, np.array([3.0]), 0, 1) == pytest.approx(6.0)

    def test_affine_in_anchor(self):
        rng = np.random.default_rng(5)
        region = random_region(rng, 3, 4)
        for _ in range(20):
            x, i = dominated_anchor(region, rng)
            h = rng.normal(size=3) * 1e-3
            for j in range(4):
                if j == i:
                    continue
                try:
                    f0 = lifting_limit(region, x - h, i, j)
                    f1 = lifting_limit(region, x, i, j)
                    f2 = lifting_limit(region, x + h, i, j)
                except NotInRelativeInterior:
                    continue
                assert f0 - 2.0 * f1 + f2 == pytest.approx(0.0, abs=1e-9)

    def test_positive_on_relative_interior(self):
        rng = np.random.default_rng(6)
        for _ in range(30):
            region = random_region(rng, 2, 3)
            x, i = dominated_anchor(region, rng)
            for j in range(3):
                if j != i:
                    assert lifting_limit(region, x, i, j) > 0.0

    def test_root_touch_point(self):
        # at the pair limit the cut grazes the other facet's graph exactly
        rng = np.random.default_rng(7)
        for _ in range(100):
            region = random_region(rng, 2, 3)
            x, i = dominated_anchor(region, rng)
            limit = max_paraboloid_lifting(region, x, i)
            j = min(
                (k for k in range(3) if k != i),
                key=lambda k: lifting_limit(region, x, i, k),
            )
            cut = paraboloid_cut(region, x, i, limit)
            a_i, a_j = region.normals[i], region.normals[j]
            x_touch = x + 0.5 * limit * (a_j - a_i)
            w_touch = float(a_j @ x_touch) - region.offsets[j]
            q_touch = float(x_touch @ x_touch)
            assert cut.residual(x_touch, w_touch, q_touch) == pytest.approx(
                0.0, abs=1e-9
            )

    def test_same_facet_rejected(self, absval):
        with pytest.raises(SameFacetPair):
            lifting_limit(absval, np.array([1.0]), 0, 0)

    def test_identical_normals_rejected(self):
        region = ParaboloidComplement(
            np.array([[1.0, 0.0], [1.0, 0.0], [0.0, 1.0]]),
            np.array([0.0, 1.0, 0.0]),
        )
        with pytest.raises(IdenticalNormals):
            lifting_limit(region, np.array([2.0, 0.0]), 0, 1)

    def test_tie_anchor_rejected(self, absval):
        with pytest.raises(NotInRelativeInterior):
            lifting_limit(absval, np.array([0.0]), 0, 1)


class TestMaxLifting:
    def test_absval_values(self, absval):
        assert max_paraboloid_lifting(absval, np.array([1.0]), 0) == pytest.approx(2.0)
        assert max_paraboloid_lifting(absval, np.array([-0.5]), 1) == pytest.approx(
            1.0
        )

    def test_is_min_over_pairs(self):
        rng = np.random.default_rng(8)
        for _ in range(20):
            region = random_region(rng, 2, 4)
            x, i = dominated_anchor(region, rng)
            limits = [
                lifting_limit(region, x, i, j) for j in range(4) if j != i
            ]
            assert max_paraboloid_lifting(region, x, i) == pytest.approx(min(limits))


class TestParaboloidCut:
    def test_full_lift_fixture(self, absval):
        cut = paraboloid_cut(absval, np.array([1.0]), 0, 2.0)
        np.testing.assert_allclose(cut.x_lin, [0.0], atol=1e-12)
        assert cut.w_coeff == pytest.approx(2.0)
        assert cut.constant == pytest.approx(-1.0)
        # tight at the anchor and at the second touch on the other branch
        assert cut.residual(np.array([1.0]), 1.0, 1.0) == pytest.approx(0.0)
        assert cut.residual(np.array([-1.0]), 1.0, 1.0) == pytest.approx(0.0)

    def test_zero_lift_is_plain_linearization(self, absval):
        cut = paraboloid_cut(absval, np.array([1.0]), 0, 0.0)
        np.testing.assert_allclose(cut.x_lin, [2.0])
        assert cut.w_coeff == 0.0
        assert cut.constant == pytest.approx(-1.0)

    def test_lift_above_limit_rejected(self, absval):
        with pytest.raises(LiftingTooLarge):
            paraboloid_cut(absval, np.array([1.0]), 0, 3.0)

    def test_negative_lift_rejected(self, absval):
        with pytest.raises(ValueError):
            paraboloid_cut(absval, np.array([1.0]), 0, -0.5)

    @pytest.mark.parametrize("lift", [0.0, 1.0, 2.0])
    def test_oracle_validity(self, absval, lift):
        cut = paraboloid_cut(absval, np.array([1.0]), 0, lift)
        verdict = check_cut_validity(absval, cut, budget=3000, seed=2)
        assert verdict.valid, verdict.counterexample
        assert verdict.worst_residual >= -1e-7

    def test_inflated_cut_caught(self, absval):
        cut = paraboloid_cut(absval, np.array([1.0]), 0, 2.0)
        bumped = ParaboloidCut(
            x_lin=cut.x_lin,
            w_coeff=cut.w_coeff,
            constant=cut.constant + 1e-3,
            anchor=cut.anchor,
            anchor_facet=cut.anchor_facet,
        )
        verdict = check_cut_validity(absval, bumped, budget=3000, seed=2)
        assert not verdict.valid
        x, w, q = verdict.counterexample
        assert w <= absval.floor(x) + 1e-12
        assert bumped.residual(x, w, q) < 0.0

    def test_validity_on_random_regions(self):
        rng = np.random.default_rng(9)
        for trial in range(10):
            region = random_region(rng, 2, 3)
            x, i = dominated_anchor(region, rng)
            limit = max_paraboloid_lifting(region, x, i)
            cut = paraboloid_cut(region, x, i, limit)
            verdict = check_cut_validity(region, cut, budget=2000, seed=trial)
            assert verdict.valid, (trial, verdict.counterexample)


class TestSeparate:
    def test_benchmark_half(self, absval):
        rep = separate_paraboloid(absval, np.array([0.0]), 0.5, 0.0)
        assert rep.violation == pytest.approx(0.25, abs=1e-9)
        np.testing.assert_allclose(rep.cut.x_lin, [0.0], atol=1e-9)
        assert rep.cut.w_coeff == pytest.approx(1.0, abs=1e-9)
        assert rep.cut.constant == pytest.approx(-0.25, abs=1e-9)

    def test_benchmark_three_quarters(self, absval):
        rep = separate_paraboloid(absval, np.array([0.0]), 0.75, 0.0)
        assert rep.violation == pytest.approx(0.5625, abs=1e-9)
        assert rep.cut.w_coeff == pytest.approx(1.5, abs=1e-9)
        assert rep.cut.constant == pytest.approx(-0.5625, abs=1e-9)

    def test_valid_point_not_separated(self, absval):
        # on the floor with the true epigraph value: no lifted cut reaches it
        rep = separate_paraboloid(absval, np.array([2.0]), 2.0, 4.0)
        assert rep.violation <= 1e-9

    def test_violation_matches_cut(self, absval):
        rep = separate_paraboloid(absval, np.array([0.3]), 0.9, 0.1)
        assert rep.violation == pytest.approx(
            rep.cut.violation(np.array([0.3]), 0.9, 0.1), abs=1e-12
        )

    def test_beats_anchor_grid(self):
        rng = np.random.default_rng(10)
        region = random_region(rng, 1, 3)
        x_star = rng.normal(size=1)
        w_star = region.floor(x_star) + abs(rng.normal()) + 0.1
        q_star = float(x_star @ x_star) - 1.0
        rep = separate_paraboloid(region, x_star, w_star, q_star)
        best = -np.inf
        for i in range(3):
            for y in np.linspace(-4.0, 4.0, 400):
                ya = np.array([y])
                vals = region.normals @ ya - region.offsets
                if vals[i] < np.max(np.delete(vals, i)) + 1e-6:
                    continue
                limit = max_paraboloid_lifting(region, ya, i)
                for t in np.linspace(0.0, min(limit, 50.0), 60):
                    cut = paraboloid_cut(region, ya, i, t)
                    best = max(best, cut.violation(x_star, w_star, q_star))
        assert rep.violation >= best - 1e-6

    def test_emitted_cut_valid(self, absval):
        rep = separate_paraboloid(absval, np.array([0.0]), 0.5, 0.0)
        verdict = check_cut_validity(absval, rep.cut, budget=3000, seed=4)
        assert verdict.valid

    def test_report_carries_query(self, absval):
        rep = separate_paraboloid(absval, np.array([0.0]), 0.5, 0.0)
        assert rep.query_w == 0.5
        assert rep.query_q == 0.0
        assert rep.diagnostics["facet"] == rep.cut.anchor_facet


class TestTransforms:
    def record(self):
        return TransformRecord(
            matrix=np.array([[2.0, 0.5], [0.0, 1.0]]),
            shift=np.array([0.3, -0.7]),
            q_offset=1.25,
        )

    def test_roundtrip(self):
        rng = np.random.default_rng(12)
        region = random_region(rng, 2, 3)
        x, i = dominated_anchor(region, rng)
        cut = paraboloid_cut(region, x, i, 0.5 * max_paraboloid_lifting(region, x, i))
        rec = self.record()
        back = restore_paraboloid_cut(rec, transform_paraboloid_cut(rec, cut))
        np.testing.assert_allclose(back.x_lin, cut.x_lin, atol=1e-12)
        assert back.w_coeff == pytest.approx(cut.w_coeff)
        assert back.constant == pytest.approx(cut.constant, abs=1e-12)
        np.testing.assert_allclose(back.anchor, cut.anchor, atol=1e-12)

    @settings(max_examples=60, deadline=None)
    @given(
        x0=st.floats(-3, 3),
        x1=st.floats(-3, 3),
        w=st.floats(-5, 5),
        q=st.floats(-5, 5),
    )
    def test_residual_preserved(self, x0, x1, w, q):
        region = ParaboloidComplement(
            np.array([[1.0, 0.0], [-1.0, 0.5]]), np.array([0.0, 0.2])
        )
        anchor = np.array([2.0, 1.0])
        i = int(np.argmax(region.normals @ anchor - region.offsets))
        cut = paraboloid_cut(region, anchor, i, 0.0)
        rec = self.record()
        mapped = transform_paraboloid_cut(rec, cut)
        x = np.array([x0, x1])
        assert mapped.residual(
            rec.apply_point(x), w, q - rec.q_offset
        ) == pytest.approx(cut.residual(x, w, q), abs=1e-9)
