import numpy as np
import pytest

from metacloud.config import ExperimentConfig
from metacloud.perturbations import DiagonalConcentratedModel, LightMixtureModel, MetaModel, ThinnedModel, ZView
from metacloud.scenarios import build_scenario
from metacloud.star_sets import Cube, CrossTarget, LimitSet, SetTarget, UnionTarget


def scenario(kind, **kw):
    return build_scenario(ExperimentConfig(name=kind, scenario=kind, **kw))


class TestPerturbedScenarios:
    def test_thc1(self, rng):
        scen = scenario('thc1', partition_rings=200, epsilon=0.5, diag_first=2)
        assert isinstance(scen.z_model, DiagonalConcentratedModel)
        assert isinstance(scen.x_model, MetaModel)
        assert isinstance(scen.target, SetTarget)
        z = scen.z_model.sample(2000, rng)
        x = scen.x_model.sample(2000, rng)
        assert z.shape == x.shape == (2000, 2)
        assert np.all(np.isfinite(x))

    def test_thc2(self, rng):
        scen = scenario('thc2', partition_rings=60)
        assert isinstance(scen.z_model, ThinnedModel)
        assert isinstance(scen.target, CrossTarget)
        assert set(scen.partitions) == {'z', 'x'}
        z = scen.z_model.sample(3000, rng)
        assert z.shape == (3000, 2)
        assert not np.any(scen.z_model.deleted(z))
        assert scen.x_model.sample(500, rng).shape == (500, 2)

    def test_thmix_cube(self, rng):
        scen = scenario('thmix', partition_rings=60, mix_shape='cube')
        assert isinstance(scen.x_model, LightMixtureModel)
        assert isinstance(scen.z_model, ZView)
        assert isinstance(scen.target, SetTarget)
        assert isinstance(scen.target.S, Cube)
        assert scen.x_model.sample(1000, rng).shape == (1000, 2)
        assert scen.z_model.sample(1000, rng).shape == (1000, 2)

    def test_thmix_limit_set(self, rng):
        scen = scenario('thmix', partition_rings=60, mix_shape='limit_set', mix_lam=2, mix_theta=2)
        assert isinstance(scen.target, UnionTarget)
        assert isinstance(scen.target.first.S, LimitSet)
        assert isinstance(scen.target.second, CrossTarget)
        x = scen.x_model.sample(1000, rng)
        assert x.shape == (1000, 2)
        assert np.all(np.isfinite(x))

    def test_mixture_weight_from_config(self):
        scen = scenario('thmix', partition_rings=60, mix_weight=1e-3)
        assert scen.x_model.weight == pytest.approx(1e-3)


class TestBaseScenarios:
    def test_standard(self):
        scen = scenario('standard')
        assert scen.has_z
        assert isinstance(scen.target.S, LimitSet)
        assert scen.partitions == {}

    def test_high_risk_targets_the_cross(self):
        scen = scenario('high_risk')
        assert isinstance(scen.target, CrossTarget)
        assert scen.density is None

    def test_three_density_has_no_z_side(self):
        scen = scenario('three_density')
        assert not scen.has_z
        assert scen.x_model.sample(300, np.random.default_rng(1)).shape == (300, 2)
