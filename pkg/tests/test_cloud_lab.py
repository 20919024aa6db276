from types import SimpleNamespace

import numpy as np
import pytest

from metacloud.cloud_lab import (HighRiskSample, SampleCloud, SpectralWeights, combined_spectral_check,
                                 coordinatewise_maxima, exponent_link_check, extract_high_risk, generate_cloud,
                                 gumbel_pwm, intensity_report, max_commutes, onto_set_report, poisson_dispersion,
                                 sample_exceedances, spectral_weights, three_density_mixture)
from metacloud.homothetic import heavy_density
from metacloud.marginals import scaling_constants
from metacloud.star_sets import Ball, SetTarget
from metacloud.utils import DomainError, InsufficientDataError, UnsupportedError


class Constant:
    def __init__(self, point):
        self.point = np.asarray(point, dtype=float)
        self.d = self.point.size
        self.name = 'constant'

    def sample(self, n, rng):
        return np.tile(self.point, (n, 1))


class Gaussian2:
    d = 2
    name = 'gaussian'

    def sample(self, n, rng):
        return rng.standard_normal((n, 2))


@pytest.fixture
def disk(pareto):
    return heavy_density(1.0, Ball(2)).calibrate(pareto)


class TestGenerate:
    def test_scale_from_schedule(self, pareto):
        cloud = generate_cloud(Constant([49.0, 98.0]), 100, scaling_constants(pareto, [100]), seed=1)
        assert isinstance(cloud, SampleCloud)
        assert cloud.scale == pytest.approx(49.0)
        np.testing.assert_allclose(cloud.points[0], [1.0, 2.0])
        assert cloud.n == 100 and cloud.d == 2
        assert cloud.model == 'constant'

    def test_thread_count_does_not_matter(self):
        a = generate_cloud(Gaussian2(), 150000, 1.0, seed=3, threads=1)
        b = generate_cloud(Gaussian2(), 150000, 1.0, seed=3, threads=4)
        np.testing.assert_array_equal(a.points, b.points)

    def test_bad_scale(self):
        with pytest.raises(DomainError):
            generate_cloud(Gaussian2(), 10, 0.0, seed=1)


class TestOntoSet:
    def test_dense_boundary(self):
        target = SetTarget(Ball(2))
        pts = target.grid(1024)
        rep = onto_set_report(pts, target, [0.05, 0.3])
        assert rep.eps == (0.05, 0.15, 0.3)
        assert rep.outside_frac == (0.0, 0.0, 0.0)
        assert rep.passed
        assert len(rep.rows()) == 3

    def test_stray_points(self):
        target = SetTarget(Ball(2))
        pts = np.vstack([target.grid(1024), [[3.0, 0.0]] * 100])
        rep = onto_set_report(pts, target, [0.1])
        assert rep.at(0.15)[0] > 1e-3
        assert not rep.passed

    def test_uncovered(self):
        rep = onto_set_report(np.array([[1.0, 0.0]]), SetTarget(Ball(2)), [0.1])
        assert rep.min_coverage[0] == 0
        assert not rep.passed


class TestIntensity:
    def test_poisson_limit(self, rng):
        H = heavy_density(1.0, Ball(2))
        n = 200000
        pts = H.sample(n, rng)
        scale = n / 5.0
        rep = intensity_report(pts / scale, H, n, scale)
        assert rep.dof >= 8
        assert rep.p_value > 1e-4
        observed = sum(b[3] for b in rep.bins)
        assert observed == int(np.count_nonzero(np.hypot(*(pts / scale).T) >= 0.02))
        obs, exp = rep.sector_totals()
        assert sorted(obs) == list(range(8))

    def test_d3(self):
        with pytest.raises(UnsupportedError):
            intensity_report(np.zeros((1, 3)), heavy_density(1.0, Ball(3)), 10, 1.0)

    def test_edges(self):
        with pytest.raises(DomainError):
            intensity_report(np.zeros((1, 2)), heavy_density(1.0, Ball(2)), 10, 1.0, radial_edges=(0.5, 0.1))


class TestDispersion:
    def test_constant_counts(self):
        counts, index = poisson_dispersion(Constant([0.5, 0.0]), 50, 1.0, (0.4, 0.6), 5, seed=1)
        assert counts.tolist() == [50] * 5
        assert index == 0.0

    def test_annulus_never_hit(self):
        with pytest.raises(InsufficientDataError):
            poisson_dispersion(Constant([5.0, 0.0]), 50, 1.0, (0.1, 0.2), 3, seed=1)


class TestMaxima:
    def test_gumbel_pwm(self, rng):
        mu, beta = gumbel_pwm(rng.gumbel(1.0, 2.0, size=50000))
        assert mu == pytest.approx(1.0, abs=0.05)
        assert beta == pytest.approx(2.0, rel=0.02)

    def test_commute(self, disk, pareto, standard_meta):
        n = 500
        rep = coordinatewise_maxima(disk, standard_meta, n, 40, seed=9,
                                    scale_z=scaling_constants(pareto, [n]).scale_at(n))
        assert rep.commutes
        assert rep.ranks_equal
        assert len(rep.frechet_index) == 2

    def test_reps(self, disk, standard_meta):
        with pytest.raises(DomainError):
            coordinatewise_maxima(disk, standard_meta, 10, 0, seed=1, scale_z=1.0)

    def test_max_commutes_exactly(self, rng, disk, standard_meta):
        x = standard_meta.push(disk.sample(5000, rng), 'inverse')
        assert max_commutes(standard_meta, x)

    def test_decreasing_map_does_not_commute(self, rng):
        flip = SimpleNamespace(forward=np.negative)
        assert not max_commutes(flip, rng.normal(size=(100, 2)))


class TestExceedances:
    def test_streaming(self, rng):
        pts = sample_exceedances(Gaussian2(), 1.0, 100, rng)
        assert pts.shape == (100, 2)
        assert np.all(pts[:, -1] >= 1.0)

    def test_exact(self, rng, disk):
        pts = sample_exceedances(disk, 10.0, 50, rng, axis=0)
        assert np.all(pts[:, 0] >= 10.0)

    def test_gives_up(self, rng):
        with pytest.raises(InsufficientDataError):
            sample_exceedances(Gaussian2(), 50.0, 10, rng, batch=1000, max_draws=5000)


class TestHighRisk:
    def test_extract(self, rng, gaussian):
        pts = rng.standard_normal((200000, 2))
        hr = extract_high_risk(pts, 2.5, gaussian)
        assert hr.a == pytest.approx(0.4)
        keep = pts[:, 1] >= 2.5
        assert hr.count == int(keep.sum())
        np.testing.assert_allclose(hr.u, pts[keep, 0] / 2.5)
        np.testing.assert_allclose(hr.ratio, pts[keep, 0] / pts[keep, 1])
        assert np.all(hr.v >= 0)

    def test_too_few(self, rng, gaussian):
        with pytest.raises(InsufficientDataError) as info:
            extract_high_risk(rng.standard_normal((1000, 2)), 5.0, gaussian)
        assert info.value.suggestion

    def test_d3(self, gaussian):
        with pytest.raises(UnsupportedError):
            extract_high_risk(np.zeros((5, 3)), 1.0, gaussian)

    def test_mass_near(self):
        hr = HighRiskSample(1.0, 1.0, np.array([-1.0, -0.95, 0.0, 1.02]), np.zeros(4),
                            np.array([-1.0, -1.0, 0.0, 1.0]))
        assert hr.mass_near(-1.0)[0] == pytest.approx(0.5)
        assert hr.mass_near(1.0, drift_corrected=True)[0] == pytest.approx(0.25)


class TestSpectral:
    def test_weights(self):
        pts = np.array([[0.0, 10.0], [-10.0, 10.0], [10.0, 10.0], [1.0, 1.0]])
        w = spectral_weights(pts, 5.0)
        assert w.count == 3
        assert (w.p_minus, w.p_zero, w.p_plus) == pytest.approx((1 / 3, 1 / 3, 1 / 3))
        assert [r[0] for r in w.rows()] == ['minus', 'zero', 'plus']

    def test_no_exceedances(self):
        with pytest.raises(InsufficientDataError):
            spectral_weights(np.zeros((3, 2)), 1.0)

    def test_combined(self):
        ratio = np.array([-1.0] * 50 + [1.0] * 50)
        hr = HighRiskSample(1.0, 1.0, ratio, np.zeros(100), ratio)
        heavy = SpectralWeights(0.0, 0.0, 0.0, (0.0, 0.0, 0.0), 10)
        check = combined_spectral_check(hr, heavy)
        assert check.total == pytest.approx(1.0)
        assert check.passed


class TestThreeDensity:
    @pytest.fixture(scope='class')
    def mixture(self):
        return three_density_mixture(3.0)

    def test_equal_shares(self, mixture):
        assert float(np.sum(mixture.weights)) == pytest.approx(1.0)
        shares = mixture.weights * np.exp(mixture.log_tail)
        np.testing.assert_allclose(shares, shares[0], rtol=1e-10)

    def test_halfplane(self, rng, mixture):
        pts = mixture.sample_halfplane(3.0, 300, rng)
        assert pts.shape == (300, 2)
        assert np.all(pts[:, 1] >= 3.0)

    def test_sample(self, rng, mixture):
        assert mixture.sample(500, rng).shape == (500, 2)


class TestLink:
    def test_laws_agree(self, disk, standard_meta):
        check = exponent_link_check(disk, standard_meta, 100000, 0.01, 1.0, seed=4)
        assert min(check.p_values) > 1e-3
        assert all(a > 500 and b > 500 for a, b in check.counts)

    def test_too_few(self, disk, standard_meta):
        with pytest.raises(InsufficientDataError):
            exponent_link_check(disk, standard_meta, 1000, 1e-4, 1.0, seed=4)

    @pytest.mark.parametrize("level", [0.0, 0.5, 0.99])
    def test_level_is_a_tail_probability(self, disk, standard_meta, level):
        with pytest.raises(DomainError):
            exponent_link_check(disk, standard_meta, 1000, level, 1.0, seed=4)


