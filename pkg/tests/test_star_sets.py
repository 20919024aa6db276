import math

import numpy as np
import pytest

from metacloud.star_sets import (Ball, CrossTarget, Cube, Diamond, DiagonalCross, Ellipse, GaugeSet, LimitSet,
                                 SetTarget, UnionTarget, coverage_counts, distance_to_cross, make_shape,
                                 mc_volume_fraction, polar_area, scaled, union_gauge, uniform_in,
                                 unit_directions)
from metacloud.utils import DomainError, SamplerError, UnsupportedError


class TestGauge:
    def test_builtins(self):
        assert Cube(2).gauge([0.5, -0.25]) == pytest.approx(0.5)
        assert Ball(2).gauge([3.0, 4.0]) == pytest.approx(5.0)
        assert Diamond(2).gauge([0.3, 0.2]) == pytest.approx(0.5)
        assert Ellipse([1.0, 2.0]).gauge([0.0, 1.0]) == pytest.approx(0.5)

    def test_vectorized_shape(self):
        pts = np.zeros((4, 3, 2))
        pts[..., 0] = 2.0
        assert Ball(2).gauge(pts).shape == (4, 3)

    def test_dimension_mismatch(self):
        with pytest.raises(DomainError):
            Ball(2).gauge([1.0, 2.0, 3.0])

    def test_homogeneous(self, rng):
        x = rng.standard_normal((50, 2))
        for S in (Cube(2), Ball(2), Diamond(2), LimitSet(1.0, 1.0)):
            np.testing.assert_allclose(S.gauge(3.5 * x), 3.5 * S.gauge(x), rtol=1e-12)


class TestLimitSet:
    """E(lam, theta) boundary from bisection and from the closed form."""

    def test_boundary_points(self):
        E = LimitSet(1.0, 1.0)
        np.testing.assert_allclose(E.boundary_point(np.array([1.0, 1.0]) / math.sqrt(2.0)), [1.0, 1.0], atol=1e-12)
        np.testing.assert_allclose(E.boundary_point([1.0, 0.0]), [0.5, 0.0], atol=1e-12)
        np.testing.assert_allclose(LimitSet(1.0, 2.0).boundary_point([1.0, 0.0]), [2 ** -0.5, 0.0], atol=1e-12)

    @pytest.mark.parametrize('lam, theta, d', [(1.0, 1.0, 2), (2.0, 2.0, 2), (0.5, 3.0, 2), (1.0, 1.0, 3)])
    def test_closed_form_agrees(self, lam, theta, d):
        E = LimitSet(lam, theta, d)
        u = unit_directions(d, 200, seed=3)
        np.testing.assert_allclose(E.gauge(u), E.closed_form_gauge(u), rtol=1e-12)
        b = E.boundary_point(u)
        assert np.all(E.member(b * (1.0 - 1e-9)))
        assert not np.any(E.member(b * (1.0 + 1e-6)))

    def test_axis_point(self):
        for lam, theta, d in ((1.0, 1.0, 2), (2.0, 2.0, 2), (1.0, 1.0, 3)):
            e = np.zeros(d)
            e[0] = 1.0
            expected = (lam / (lam + d - 1.0)) ** (1.0 / theta)
            assert float(LimitSet(lam, theta, d).boundary_point(e)[0]) == pytest.approx(expected, abs=1e-12)

    def test_membership_oracle(self):
        E = LimitSet(1.0, 1.0)
        pts = np.random.default_rng(5).uniform(-1.0, 1.0, size=(20000, 2))
        # bisection and direct inequality agree away from the boundary
        g = E.gauge(pts)
        clear = np.abs(g - 1.0) > 1e-9
        assert np.array_equal((g <= 1.0)[clear], E.member(pts)[clear])

    def test_bad_parameters(self):
        with pytest.raises(DomainError):
            LimitSet(0.0, 1.0)


class TestCross:
    def test_distances(self):
        X = DiagonalCross(2)
        assert distance_to_cross(X, [0.5, 0.5]) == pytest.approx(0.0, abs=1e-15)
        assert distance_to_cross(X, [1.0, 0.0]) == pytest.approx(1.0 / math.sqrt(2.0))
        assert distance_to_cross(X, [2.0, 2.0]) == pytest.approx(math.sqrt(2.0))
        assert distance_to_cross(X, [-0.3, 0.3]) == pytest.approx(0.0, abs=1e-15)

    def test_vertices(self):
        assert DiagonalCross(3).vertices.shape == (8, 3)

    def test_no_gauge_union(self):
        with pytest.raises(UnsupportedError):
            union_gauge(Cube(2), DiagonalCross(2))


class TestUnion:
    def test_min_gauge(self):
        U = union_gauge(Cube(2), scaled(Ball(2), 2.0))
        assert U.gauge([0.0, 1.5]) == pytest.approx(0.75)
        assert union_gauge(LimitSet(1.0, 1.0), Cube(2)).gauge([1.0, 0.0]) == pytest.approx(1.0)

    def test_dimension_mismatch(self):
        with pytest.raises(DomainError):
            union_gauge(Cube(2), Cube(3))


class TestVolume:
    def test_cube_fills_its_box(self):
        est = mc_volume_fraction(Cube(2), 1000, seed=1)
        assert est.fraction == 1.0
        assert est.stderr == 0.0

    def test_disk(self):
        est = mc_volume_fraction(Ball(2), 200000, seed=2)
        assert abs(est.fraction - math.pi / 4.0) <= 4.0 * est.stderr

    def test_polar_area(self):
        assert polar_area(Ball(2)) == pytest.approx(math.pi, rel=1e-9)
        assert polar_area(Diamond(2)) == pytest.approx(2.0, rel=1e-9)
        E = LimitSet(1.0, 1.0)
        est = mc_volume_fraction(E, 200000, seed=4)
        assert abs(E.volume / 4.0 - est.fraction) <= 4.0 * est.stderr

    def test_zero_points(self):
        with pytest.raises(DomainError):
            mc_volume_fraction(Ball(2), 0, seed=1)

    def test_scaled_volume(self):
        assert scaled(Cube(2), 0.5).volume == pytest.approx(1.0)


class TestUniformIn:
    def test_inside(self, rng):
        pts = uniform_in(Diamond(2), 5000, rng)
        assert pts.shape == (5000, 2)
        assert np.all(Diamond(2).contains(pts))

    def test_box_mismatch(self, rng):
        tiny = GaugeSet(lambda p: 1e4 * np.linalg.norm(p, axis=1), 2, radius=1.0, check=False)
        with pytest.raises(SamplerError):
            uniform_in(tiny, 10, rng)


class TestGaugeSet:
    def test_valid(self):
        S = GaugeSet(lambda p: np.abs(p).max(axis=1), 2, radius=1.0, volume=4.0)
        assert S.gauge([0.5, 0.1]) == pytest.approx(0.5)
        assert S.volume == 4.0

    def test_not_homogeneous(self):
        with pytest.raises(DomainError):
            GaugeSet(lambda p: np.sum(p * p, axis=1), 2, radius=1.0)

    def test_outside_cube(self):
        with pytest.raises(DomainError):
            GaugeSet(lambda p: 0.5 * np.abs(p).max(axis=1), 2, radius=1.0)


class TestTargets:
    def test_set_target(self):
        T = SetTarget(Ball(2))
        assert T.outside(np.array([[1.1, 0.0], [1.2, 0.0]]), 0.15).tolist() == [False, True]
        assert T.grid(64).shape == (128, 2)
        assert T.grid(64, interior=False).shape == (64, 2)

    def test_cross_target(self):
        T = CrossTarget(DiagonalCross(2))
        assert T.outside(np.array([[0.5, 0.55], [1.0, 0.0]]), 0.2).tolist() == [False, True]
        assert T.grid().shape == (8, 2)

    def test_union_target(self):
        T = UnionTarget(SetTarget(Cube(2)), CrossTarget(DiagonalCross(2)))
        pts = np.array([[1.05, 1.05], [0.5, 0.0], [2.0, 0.0]])
        assert T.outside(pts, 0.1).tolist() == [False, False, True]
        assert T.grid(16, interior=False).shape == (16 + 8, 2)

    def test_coverage(self):
        grid = np.array([[0.0, 0.0], [5.0, 5.0]])
        pts = np.array([[0.0, 0.05], [0.1, 0.0], [0.3, 0.0]])
        assert coverage_counts(pts, grid, 0.1).tolist() == [2, 0]

    def test_overlays(self):
        assert SetTarget(LimitSet(1.0, 1.0)).overlays()[0].shape == (513, 2)


class TestMakeShape:
    def test_kinds(self):
        assert isinstance(make_shape('disk'), Ball)
        assert isinstance(make_shape('limit_set', lam=2.0, theta=2.0), LimitSet)
        assert make_shape('ellipse', axes=[1.0, 0.5]).support(0) == pytest.approx(1.0)
        with pytest.raises(DomainError):
            make_shape('star')
