import math

import numpy as np
import pytest
from scipy import special, stats

from metacloud.homothetic import (HeavyGenerator, HomotheticDensity, LightGenerator, cubic_density_for,
                                  heavy_density, limit_intensity_h, numeric_marginal, set_density)
from metacloud.marginals import ExpPowerMarginal, ParetoMarginal
from metacloud.star_sets import Ball, Cube, Diamond, LimitSet
from metacloud.utils import DomainError, UnsupportedError


@pytest.fixture
def disk_density():
    return heavy_density(1.0, Ball(2))


class TestLimitIntensity:
    def test_values(self):
        assert limit_intensity_h(1.0, 2, Ball(2), np.array([2.0, 0.0])) == pytest.approx(1.0 / 8.0)
        assert limit_intensity_h(2.0, 2, Cube(2), np.array([0.5, 0.25])) == pytest.approx(16.0)

    def test_pole(self):
        with pytest.raises(DomainError):
            limit_intensity_h(1.0, 2, Ball(2), np.zeros(2))

    def test_density_approaches_limit(self, disk_density):
        """density(r w) / f(r) -> 1 / n_D(w)^(lam + d) along rays."""
        H = disk_density
        w = np.array([0.5, 0.5])
        r = 1e4
        f_r = math.exp(float(H.generator.log_value(r)) - H.log_norm)
        ratio = float(H.density_at(r * w)) / f_r
        assert ratio == pytest.approx(limit_intensity_h(1.0, 2, Ball(2), w), rel=0.02)


class TestNormalization:
    """Disk, lam=1, f(r) = (1 + r)^-3: Z = 2 pi * 1/2."""

    def test_log_norm(self, disk_density):
        assert disk_density.log_norm == pytest.approx(math.log(math.pi), rel=1e-8)

    def test_radial_cdf(self, disk_density):
        # radial density 2 r (1 + r)^-3
        r = np.array([0.5, 1.0, 4.0, 100.0])
        exact = 1.0 - (1.0 + 2.0 * r) / (1.0 + r) ** 2
        np.testing.assert_allclose(disk_density.radial_cdf(r), exact, rtol=1e-4)

    def test_deep_radial_tail(self, disk_density):
        r = 1e12
        # P(R > r) ~ 2 / r
        assert float(disk_density.radial_logsf(r)) == pytest.approx(math.log(2.0 / r), rel=1e-3)

    def test_tail_constants(self, disk_density):
        assert disk_density.tail_constant == pytest.approx(1.0 / math.pi, rel=1e-8)
        assert disk_density.marginal_tail_constant() == pytest.approx(2.0 / math.pi, rel=1e-6)

    def test_calibrate(self, disk_density, pareto):
        H = disk_density.calibrate(pareto)
        assert H.marginal_tail_constant() == pytest.approx(pareto.tail_constant, rel=1e-6)
        assert H.shape.sigma == pytest.approx(math.pi / 4.0, rel=1e-6)

    def test_dimension_mismatch(self):
        with pytest.raises(DomainError):
            HomotheticDensity(HeavyGenerator(1.0, 3), Ball(2))

    def test_bad_generator(self):
        with pytest.raises(DomainError):
            HeavyGenerator(0.0, 2)
        with pytest.raises(DomainError):
            HeavyGenerator(1.0, 2, kind='log')


class TestSampler:
    @pytest.mark.parametrize('shape', [Ball(2), Cube(2), Diamond(2), LimitSet(1.0, 1.0)])
    def test_gauge_radius_law(self, rng, shape):
        H = heavy_density(1.0, shape)
        pts = H.sample(20000, rng)
        assert pts.shape == (20000, 2)
        assert stats.kstest(shape.gauge(pts), H.radial_cdf).pvalue > 0.001

    def test_directions_on_boundary(self, rng):
        H = heavy_density(1.0, Diamond(2))
        theta = H.directions(1000, rng)
        np.testing.assert_allclose(Diamond(2).gauge(theta), 1.0, rtol=1e-12)

    def test_light_sampler(self, rng, laplace):
        H = set_density(Cube(2), LightGenerator(laplace.psi, kappa=0.0))
        pts = H.sample(20000, rng)
        # gauge radius ~ Gamma(2)
        assert stats.kstest(Cube(2).gauge(pts), stats.gamma(2.0).cdf).pvalue > 0.001


class TestHalfplane:
    def test_exceedances(self, rng, disk_density):
        pts = disk_density.sample_halfplane(50.0, 2000, rng)
        assert pts.shape == (2000, 2)
        assert np.all(pts[:, -1] >= 50.0)

    def test_probability(self, rng, disk_density):
        n = 200000
        pts = disk_density.sample(n, rng)
        t = 2.0
        p_hat = np.mean(pts[:, 1] >= t)
        se = math.sqrt(p_hat * (1.0 - p_hat) / n)
        p = math.exp(disk_density.halfplane_log_probability(t))
        assert abs(p - p_hat) <= 4.0 * se

    def test_deep_probability(self, disk_density):
        # P(X2 > t) ~ C / t for lam = 1
        t = 1e8
        p = math.exp(disk_density.halfplane_log_probability(t))
        assert p * t == pytest.approx(disk_density.marginal_tail_constant(), rel=1e-3)

    def test_non_positive_level(self, rng, disk_density):
        with pytest.raises(DomainError):
            disk_density.sample_halfplane(0.0, 10, rng)

    def test_d3_unsupported(self):
        with pytest.raises(UnsupportedError):
            heavy_density(1.0, Ball(3)).halfplane_log_probability(1.0)


class TestMarginals:
    def test_cubic_level_sets(self, laplace):
        """Cube-shaped e^-r / r: marginal density is (2 t g(t) + 2 E1(t)) / Z."""
        H = set_density(Cube(2), cubic_density_for(laplace, 2))
        for t in (5.0, 8.0, 10.0):
            g = math.exp(-t) / t
            expected = (2.0 * t * g + 2.0 * special.exp1(t)) / H.normalization
            assert numeric_marginal(H, 0, t) == pytest.approx(expected, rel=1e-6)

    def test_heavy_marginal_tail(self, disk_density):
        H = disk_density
        t = 1e4
        # density of X1 ~ lam C t^-(lam+1)
        assert numeric_marginal(H, 0, t) * t ** 2 == pytest.approx(H.marginal_tail_constant(), rel=1e-3)
