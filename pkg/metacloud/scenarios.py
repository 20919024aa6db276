"""
Model assembly from an ExperimentConfig.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Optional

from .cloud_lab import three_density_mixture
from .homothetic import LightGenerator, heavy_density, set_density
from .marginals import GaussianMarginal, make_heavy, make_light, scaling_constants
from .meta import ExponentialMap, MetaMap
from .partitions import (biregular_refine, build_quantile_partition, cube_partition, fig1_log_radii,
                         fig2_log_radii, image_under_k)
from .perturbations import (DiagonalLaw, MetaModel, ZView, concentrate_diagonal, delete_axis_blocks,
                            mix_with_light)
from .star_sets import CrossTarget, DiagonalCross, LimitSet, SetTarget, UnionTarget, make_shape
from .utils import DomainError

logger = logging.getLogger(__name__)
logger.addHandler(logging.NullHandler())


@dataclass
class Scenario:
    """
    Everything a trial needs: the samplers on both sides, the map between
    them, the limit target of the scaled x-cloud and any partitions.
    """
    name: str
    light: Any
    x_model: Any
    heavy: Any = None
    meta: Any = None
    z_model: Any = None
    density: Any = None
    target: Any = None
    partitions: dict = field(default_factory=dict)
    component: Optional[Any] = None

    @property
    def has_z(self):
        return self.z_model is not None


def heavy_scale(heavy, n):
    """c_n with 1 - F0(c_n) = 1/n."""
    return float(heavy.tail_quantile(-math.log(n)))


def light_scale(light, n, mode='exact'):
    return scaling_constants(light, [n], mode).scale_at(n)


def marginals_for(cfg):
    return make_heavy(cfg.heavy, cfg.lam, cfg.core), make_light(cfg.light, cfg.theta)


def base_density(cfg, heavy):
    """Heavy homothetic density on the configured shape with marginal tails calibrated to F0."""
    shape = make_shape(cfg.shape, cfg.d, cfg.axes, cfg.lam, cfg.theta)
    return heavy_density(cfg.lam, shape).calibrate(heavy)


def limit_target(cfg):
    return SetTarget(LimitSet(cfg.lam, cfg.theta, cfg.d), name=f"E({cfg.lam:g},{cfg.theta:g})")


def cross_target(cfg):
    return CrossTarget(DiagonalCross(cfg.d))


def mix_target(cfg, A):
    if cfg.mix_shape == 'cube':
        # the cube already holds the diagonal cross
        return SetTarget(A, name='cube')
    return UnionTarget(SetTarget(A), cross_target(cfg))


def build_partitions(cfg, heavy, light, meta):
    """
    :return: dict with 'z' and 'x' partitions
    """
    N = cfg.partition_rings
    if cfg.partition_kind == 'quantile':
        Pz = build_quantile_partition(heavy, N, cfg.d)
        return {'z': Pz, 'x': image_under_k(Pz, meta)}
    if cfg.partition_kind == 'biregular':
        Px = biregular_refine(build_quantile_partition(light, N, cfg.d))
        return {'x': Px, 'z': image_under_k(Px, meta)}
    radii = fig1_log_radii(N) if cfg.partition_kind == 'fig1' else fig2_log_radii(N)
    Px = cube_partition(radii, 'uniform', cfg.d, space='x')
    return {'x': Px, 'z': image_under_k(Px, ExponentialMap(cfg.d))}


def build_scenario(cfg):
    """
    :param cfg: ExperimentConfig
    :return: Scenario
    """
    if cfg.scenario == 'three_density':
        light = GaussianMarginal()
        t = float(light.tail_quantile(math.log(cfg.high_risk_level)))
        model = three_density_mixture(t)
        return Scenario(cfg.name, light, model)

    heavy, light = marginals_for(cfg)
    meta = MetaMap(heavy, light, d=cfg.d)

    if cfg.scenario == 'high_risk':
        z_model = DiagonalLaw(heavy, cfg.d, orthants='all')
        return Scenario(cfg.name, light, MetaModel(z_model, meta), heavy, meta, z_model,
                        target=cross_target(cfg))

    H = base_density(cfg, heavy)
    scen = Scenario(cfg.name, light, MetaModel(H, meta), heavy, meta, H, density=H, target=limit_target(cfg))

    if cfg.scenario == 'standard':
        pass
    elif cfg.scenario == 'partition':
        scen.partitions = build_partitions(cfg, heavy, light, meta)
    elif cfg.scenario == 'thc1':
        z_model = concentrate_diagonal(H, DiagonalLaw(heavy, cfg.d), cfg.epsilon, cfg.partition_rings,
                                       cfg.diag_first)
        scen.z_model = z_model
        scen.x_model = MetaModel(z_model, meta)
    elif cfg.scenario in ('thc2', 'thmix'):
        Pz = build_quantile_partition(heavy, cfg.partition_rings, cfg.d)
        scen.partitions = {'z': Pz, 'x': image_under_k(Pz, meta)}
        z_model = delete_axis_blocks(H, Pz)
        scen.z_model = z_model
        scen.x_model = MetaModel(z_model, meta)
        scen.target = cross_target(cfg)
        if cfg.scenario == 'thmix':
            A = make_shape(cfg.mix_shape, cfg.d, lam=cfg.mix_lam, theta=cfg.mix_theta)
            gen = LightGenerator(light.psi, kappa=cfg.mix_kappa, name=f"r^{cfg.mix_kappa:g}*{light.name}")
            scen.component = set_density(A, gen)
            mixture = mix_with_light(scen.x_model, scen.component, cfg.mix_weight)
            scen.x_model = mixture
            scen.z_model = ZView(mixture)
            scen.target = mix_target(cfg, A)
    else:
        raise DomainError(f"unknown scenario '{cfg.scenario}'")
    logger.debug(f"scenario {cfg.scenario}: x={scen.x_model!r}")
    return scen
