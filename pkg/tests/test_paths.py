from itertools import combinations

import numpy as np
import pytest

from logode import lie, paths, tensor
from logode.errors import BisectionError, DomainError, MeshError, ParseError
from logode.paths import (
    FunctionControl,
    LiftedPath,
    SamplePath,
    control_from,
    dpn_distance,
    dyadic_partition,
    lift_piecewise_linear,
    omega_alpha,
    p_variation,
    pure_area_driver,
)

from conftest import random_group_like


def random_lift(rng, n_anchors, d=2, degree=2, scale=0.5):
    times = np.linspace(0.0, 1.0, n_anchors)
    points = np.cumsum(rng.normal(size=(n_anchors, d)) * scale, axis=0)
    return lift_piecewise_linear(SamplePath(times, points), degree)


def dilate_lift(x, lam):
    return LiftedPath(x.times, [tensor.dilation(lam, x.element(j)) for j in range(len(x))])


def pvar_brute(x, p, s, t):
    """Exhaustive partition enumeration; the independent check for the DP."""
    m = paths.roughness_degree(p)
    i0, i1 = x.anchor_index(s), x.anchor_index(t)
    interior = list(range(i0 + 1, i1))
    best = 0.0
    for size in range(len(interior) + 1):
        for combo in combinations(interior, size):
            pts = [i0, *combo, i1]
            total = sum(
                tensor.homogeneous_norm(x.increment_by_index(a, b), upto=m) ** p
                for a, b in zip(pts[:-1], pts[1:])
            )
            best = max(best, total)
    return best ** (1.0 / p)


def dpn_brute(x1, x2, level, p, s, t):
    i0, i1 = x1.anchor_index(s), x1.anchor_index(t)
    interior = list(range(i0 + 1, i1))
    best = 0.0
    for size in range(len(interior) + 1):
        for combo in combinations(interior, size):
            pts = [i0, *combo, i1]
            total = 0.0
            for a, b in zip(pts[:-1], pts[1:]):
                diff = x1.increment_by_index(a, b).levels[level] - x2.increment_by_index(a, b).levels[level]
                total += np.linalg.norm(diff) ** (p / level)
            best = max(best, total)
    return best ** (level / p)


class TestSamplePath:
    def test_validation(self):
        with pytest.raises(DomainError):
            SamplePath(np.array([0.0, 0.0]), np.zeros((2, 1)))
        with pytest.raises(DomainError):
            SamplePath(np.array([0.0]), np.zeros((1, 1)))
        with pytest.raises(DomainError):
            SamplePath(np.array([0.0, 1.0]), np.array([[0.0], [np.inf]]))

    def test_csv_round_trip(self, tmp_path, rng):
        p = SamplePath(np.linspace(0, 1, 5), rng.normal(size=(5, 2)))
        fname = str(tmp_path / "path.csv")
        p.to_csv(fname)
        back = SamplePath.from_csv(fname)
        assert np.array_equal(back.times, p.times)
        assert np.array_equal(back.points, p.points)

    def test_csv_errors_carry_line_numbers(self, tmp_path):
        bad_header = tmp_path / "a.csv"
        bad_header.write_text("time,x1\n0,0\n1,1\n")
        with pytest.raises(ParseError, match=":1"):
            SamplePath.from_csv(str(bad_header))
        bad_row = tmp_path / "b.csv"
        bad_row.write_text("t,x1\n0,0\n1,oops\n")
        with pytest.raises(ParseError, match=":3"):
            SamplePath.from_csv(str(bad_row))
        short = tmp_path / "c.csv"
        short.write_text("t,x1\n0,0\n")
        with pytest.raises(ParseError, match="at least 2"):
            SamplePath.from_csv(str(short))


class TestLift:
    def test_single_segment(self):
        p = SamplePath(np.array([0.0, 1.0]), np.array([[0.0, 0.0], [1.0, 2.0]]))
        x = lift_piecewise_linear(p, 2)
        inc = x.increment(0.0, 1.0)
        assert np.allclose(inc.levels[1], [1.0, 2.0])
        assert np.allclose(inc.levels[2], [0.5, 1.0, 1.0, 2.0])

    def test_two_unit_segments(self):
        p = SamplePath(
            np.array([0.0, 0.5, 1.0]), np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0]])
        )
        x = lift_piecewise_linear(p, 2)
        inc = x.increment(0.0, 1.0)
        oracle = tensor.mul(
            tensor.exp(tensor.from_level_one([1.0, 0.0], 2)),
            tensor.exp(tensor.from_level_one([0.0, 1.0], 2)),
        )
        assert inc.coeff((1, 2)) == pytest.approx(1.0)
        assert inc.coeff((2, 1)) == pytest.approx(0.0)
        assert inc.coeff((1, 1)) == pytest.approx(0.5)
        assert inc.coeff((2, 2)) == pytest.approx(0.5)
        assert tensor.additive_norm(inc - oracle) < 1e-14

    def test_degree_one_gives_displacement(self, rng):
        points = rng.normal(size=(6, 2))
        x = lift_piecewise_linear(SamplePath(np.linspace(0, 1, 6), points), 1)
        inc = x.increment(0.0, 1.0)
        assert np.allclose(inc.levels[1], points[-1] - points[0])

    def test_chen_identity_on_anchor_triples(self, rng):
        x = random_lift(rng, 8, degree=3)
        times = x.times
        for i, u, j in combinations(range(len(times)), 3):
            left = tensor.mul(
                x.increment_by_index(i, u), x.increment_by_index(u, j)
            )
            assert tensor.additive_norm(left - x.increment_by_index(i, j)) < 1e-12

    def test_increments_are_group_like(self, rng):
        x = random_lift(rng, 6, degree=3)
        for i in range(len(x) - 1):
            for j in range(i + 1, len(x)):
                assert lie.is_group_like(x.increment_by_index(i, j), tol=1e-8).is_lie

    def test_batch_increments_match_single(self, rng):
        x = random_lift(rng, 7, degree=2)
        levels = x.increment_levels_from(2, 6)
        for j in range(3, 7):
            single = x.increment_by_index(2, j)
            for k in range(x.degree + 1):
                assert np.allclose(levels[k][j - 3], single.levels[k], atol=1e-14)

    def test_json_round_trip(self, rng):
        x = random_lift(rng, 4, degree=2)
        back = LiftedPath.from_json_list(x.to_json_list())
        assert np.allclose(back.times, x.times)
        for j in range(len(x)):
            assert tensor.additive_norm(back.element(j) - x.element(j)) == 0.0

    def test_non_anchor_time_rejected(self, rng):
        x = random_lift(rng, 4)
        with pytest.raises(DomainError):
            x.increment(0.0, 0.123456)


class TestPureArea:
    def test_zero_rate_is_constant(self):
        x = pure_area_driver(0.0, np.linspace(0, 1, 5))
        for j in range(5):
            assert tensor.additive_norm(x.element(j) - tensor.unit(2, 2)) == 0.0

    def test_unit_increment(self):
        x = pure_area_driver(1.0, np.array([0.0, 1.0]))
        inc = x.increment(0.0, 1.0)
        assert np.allclose(inc.levels[1], 0.0)
        area = tensor.basis_word(2, 2, (1, 2)) - tensor.basis_word(2, 2, (2, 1))
        assert np.allclose(inc.levels[2], area.levels[2])

    def test_chen_and_group_like(self):
        x = pure_area_driver(0.7, np.array([0.0, 0.5, 1.0]))
        left = tensor.mul(x.increment(0.0, 0.5), x.increment(0.5, 1.0))
        assert tensor.additive_norm(left - x.increment(0.0, 1.0)) < 1e-15
        assert lie.is_group_like(x.increment(0.0, 1.0), tol=1e-8).is_lie

    def test_needs_two_dimensions(self):
        with pytest.raises(DomainError):
            pure_area_driver(1.0, np.array([0.0, 1.0]), d=1)


class TestPVariation:
    def test_two_anchors(self, rng):
        x = random_lift(rng, 2)
        expect = tensor.homogeneous_norm(x.increment_by_index(0, 1))
        assert p_variation(x, 2.0, 0.0, 1.0) == pytest.approx(expect, rel=1e-14)

    def test_total_variation_of_zigzag(self):
        p = SamplePath(np.array([0.0, 0.5, 1.0]), np.array([[0.0], [1.0], [0.0]]))
        x = lift_piecewise_linear(p, 1)
        assert p_variation(x, 1.0, 0.0, 1.0) == pytest.approx(2.0, rel=1e-14)

    def test_matches_brute_force(self, rng):
        for _ in range(4):
            x = random_lift(rng, 9, degree=2)
            got = p_variation(x, 2.5, 0.0, 1.0)
            want = pvar_brute(x, 2.5, 0.0, 1.0)
            assert got == pytest.approx(want, rel=1e-12)

    def test_degree_check(self, rng):
        x = random_lift(rng, 4, degree=1)
        with pytest.raises(DomainError):
            p_variation(x, 2.0, 0.0, 1.0)


class TestControl:
    def test_two_anchor_value(self, rng):
        x = random_lift(rng, 2)
        c = control_from(x, 1.0, 2.0)
        expect = tensor.homogeneous_norm(x.increment_by_index(0, 1)) ** 2.0
        assert c(0.0, 1.0) == pytest.approx(expect, rel=1e-14)

    def test_constant_path_vanishes(self):
        x = pure_area_driver(0.0, np.linspace(0, 1, 4))
        c = control_from(x, 2.0, 2.0)
        assert c(0.0, 1.0) == 0.0

    def test_dilation_scales_by_lambda_p(self, rng):
        x = random_lift(rng, 6)
        lam, p = 1.7, 2.0
        base = control_from(x, 1.0, p)
        scaled = control_from(dilate_lift(x, lam), 1.0, p)
        for s, t in [(0.0, 1.0), (0.2, 0.8)]:
            s, t = x.times[1], x.times[4]
            assert scaled(s, t) == pytest.approx(lam**p * base(s, t), rel=1e-11)

    def test_sub_additive_on_anchor_triples(self, rng):
        x = random_lift(rng, 8)
        c = control_from(x, 1.3, 2.0)
        times = x.times
        for i, u, j in combinations(range(len(times)), 3):
            lhs = c(times[i], times[u]) + c(times[u], times[j])
            assert lhs <= c(times[i], times[j]) * (1 + 1e-12)

    def test_omega_matrix_matches_calls(self, rng):
        x = random_lift(rng, 6)
        c = control_from(x, 1.0, 2.0)
        om = c.omega_matrix(1, 4)
        for u in range(1, 5):
            for v in range(u, 5):
                assert om[u - 1, v - 1] == pytest.approx(c(x.times[u], x.times[v]), abs=1e-15)

    def test_concurrent_memoization_is_consistent(self, rng):
        from concurrent.futures import ThreadPoolExecutor

        x = random_lift(rng, 40)
        c = control_from(x, 1.2, 2.0)
        pairs = [(i, j) for i in range(0, 39, 3) for j in range(i + 1, 40, 5)]
        expected = {pair: control_from(x, 1.2, 2.0).value_by_index(*pair) for pair in pairs}
        with ThreadPoolExecutor(max_workers=8) as pool:
            got = list(pool.map(lambda pair: c.value_by_index(*pair), pairs * 3))
        for pair, value in zip(pairs * 3, got):
            assert value == expected[pair]


class TestOmegaAlpha:
    def test_small_interval_equals_control(self, rng):
        x = random_lift(rng, 5)
        c = control_from(x, 1.0, 2.0)
        total = c(0.0, 1.0)
        assert omega_alpha(c, total * 1.01, 0.0, 1.0) == pytest.approx(total, rel=1e-12)

    def test_nondecreasing_in_alpha(self, rng):
        x = random_lift(rng, 9)
        c = control_from(x, 1.0, 2.0)
        steps = [c(s, t) for s, t in zip(x.times[:-1], x.times[1:])]
        lo = max(steps) * 1.05
        hi = lo * 3.0
        assert omega_alpha(c, lo, 0.0, 1.0) <= omega_alpha(c, hi, 0.0, 1.0) + 1e-15

    def test_at_least_finest_sum(self, rng):
        x = random_lift(rng, 9)
        c = control_from(x, 1.0, 2.0)
        steps = [c(s, t) for s, t in zip(x.times[:-1], x.times[1:])]
        alpha = max(steps) * 1.05
        assert c(0.0, 1.0) > alpha, "fixture must sit in the chopped regime"
        got = omega_alpha(c, alpha, 0.0, 1.0)
        assert got >= sum(steps) - 1e-12
        assert got <= c(0.0, 1.0) + 1e-12

    def test_inadmissible_step_raises(self, rng):
        x = random_lift(rng, 5)
        c = control_from(x, 1.0, 2.0)
        steps = [c(s, t) for s, t in zip(x.times[:-1], x.times[1:])]
        with pytest.raises(MeshError, match="inadmissible"):
            omega_alpha(c, min(steps) * 0.5, 0.0, 1.0)

    def test_needs_anchor_grid(self):
        c = FunctionControl(lambda s, t: t - s)
        with pytest.raises(DomainError):
            omega_alpha(c, 0.5, 0.0, 1.0)


class TestDpnDistance:
    def test_identical_paths(self, rng):
        x = random_lift(rng, 6)
        assert dpn_distance(x, x, 1, 2.0, 0.0, 1.0) == 0.0
        assert dpn_distance(x, x, 2, 2.0, 0.0, 1.0) == 0.0

    def test_two_anchor_value(self, rng):
        x1 = random_lift(rng, 2)
        x2 = LiftedPath(x1.times, [x1.element(0), random_group_like(rng, 2, 2)])
        for level in (1, 2):
            diff = x1.increment_by_index(0, 1).levels[level] - x2.increment_by_index(0, 1).levels[level]
            assert dpn_distance(x1, x2, level, 2.0, 0.0, 1.0) == pytest.approx(
                np.linalg.norm(diff), rel=1e-14
            )

    def test_matches_brute_force(self, rng):
        for _ in range(3):
            x1 = random_lift(rng, 8)
            x2 = random_lift(rng, 8)
            for level in (1, 2):
                got = dpn_distance(x1, x2, level, 2.0, 0.0, 1.0)
                want = dpn_brute(x1, x2, level, 2.0, 0.0, 1.0)
                assert got == pytest.approx(want, rel=1e-12)

    def test_pseudometric(self, rng):
        a, b, c = (random_lift(rng, 6) for _ in range(3))
        for level in (1, 2):
            dab = dpn_distance(a, b, level, 2.0, 0.0, 1.0)
            dba = dpn_distance(b, a, level, 2.0, 0.0, 1.0)
            dac = dpn_distance(a, c, level, 2.0, 0.0, 1.0)
            dcb = dpn_distance(c, b, level, 2.0, 0.0, 1.0)
            assert dab == pytest.approx(dba, rel=1e-12)
            assert dab <= dac + dcb + 1e-10

    def test_grid_mismatch(self, rng):
        x1 = random_lift(rng, 5)
        x2 = random_lift(rng, 6)
        with pytest.raises(DomainError):
            dpn_distance(x1, x2, 1, 2.0, 0.0, 1.0)

    def test_alpha_restriction_needs_control(self, rng):
        x1 = random_lift(rng, 5)
        x2 = random_lift(rng, 5)
        with pytest.raises(DomainError):
            dpn_distance(x1, x2, 1, 2.0, 0.0, 1.0, alpha=0.5)

    def test_alpha_restriction_bounded_by_unrestricted(self, rng):
        x1 = random_lift(rng, 8)
        x2 = random_lift(rng, 8)
        c = control_from(x1, 1.0, 2.0)
        steps = [c(s, t) for s, t in zip(x1.times[:-1], x1.times[1:])]
        alpha = max(steps) * 1.05
        restricted = dpn_distance(x1, x2, 1, 2.0, 0.0, 1.0, alpha=alpha, control=c)
        assert restricted <= dpn_distance(x1, x2, 1, 2.0, 0.0, 1.0) + 1e-12


class TestDyadicPartition:
    def test_linear_control_midpoints(self):
        c = FunctionControl(lambda s, t: t - s)
        parts = dyadic_partition(c, 0.0, 1.0, 2)
        assert np.allclose(parts[2], [0.0, 0.25, 0.5, 0.75, 1.0], atol=1e-7)

    def test_quadratic_control_midpoints(self):
        c = FunctionControl(lambda s, t: (t - s) ** 2)
        parts = dyadic_partition(c, 0.0, 1.0, 2)
        assert np.allclose(parts[2], [0.0, 0.25, 0.5, 0.75, 1.0], atol=1e-7)

    def test_balance_postcondition_closed_form(self):
        c = FunctionControl(lambda s, t: (t - s) ** 1.5)
        parts = dyadic_partition(c, 0.0, 2.0, 3)
        for level, nxt in zip(parts[:-1], parts[1:]):
            for (u, v), w in zip(zip(level[:-1], level[1:]), nxt[1::2]):
                parent = c(u, v)
                assert abs(c(u, w) - c(w, v)) <= 1e-8 * parent
                assert max(c(u, w), c(w, v)) <= (0.5 + 1e-8) * parent

    def test_tabulated_balanced_grid(self):
        # uniform-speed segments make the anchor midpoint an exact balance point
        n = 8
        p = SamplePath(np.linspace(0, 1, n + 1), np.linspace(0, 1, n + 1)[:, None] * [1.0, 2.0])
        c = control_from(lift_piecewise_linear(p, 2), 1.0, 2.0)
        parts = dyadic_partition(c, 0.0, 1.0, 3)
        assert np.allclose(parts[3], np.linspace(0, 1, 9), atol=1e-12)
        for level, nxt in zip(parts[:-1], parts[1:]):
            for (u, v), w in zip(zip(level[:-1], level[1:]), nxt[1::2]):
                parent = c(u, v)
                assert abs(c(u, w) - c(w, v)) <= 1e-8 * parent
                assert max(c(u, w), c(w, v)) <= (0.5 + 1e-8) * parent

    def test_tabulated_too_coarse_raises_with_imbalance(self, rng):
        x = random_lift(rng, 9)
        c = control_from(x, 1.0, 2.0)
        with pytest.raises(BisectionError) as exc_info:
            dyadic_partition(c, 0.0, 1.0, 3)
        assert exc_info.value.imbalance > 0.0

    def test_nesting(self):
        c = FunctionControl(lambda s, t: t - s)
        parts = dyadic_partition(c, 0.0, 1.0, 3)
        for coarse, fine in zip(parts[:-1], parts[1:]):
            assert set(np.round(coarse, 12)) <= set(np.round(fine, 12))
