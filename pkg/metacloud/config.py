"""
Experiment configuration: a flat `key: value` text file validated by ExperimentConfig.

    name: standard_tE
    scenario: standard
    lam: 1.0
    theta: 1.0
    n: 1000000
    seeds: [1, 2, 3, 4, 5]
    diagnostics: [onto_set, svg]
"""
import logging
from typing import List, Literal, Optional

import pydantic
import yaml
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .utils import ConfigError

logger = logging.getLogger(__name__)
logger.addHandler(logging.NullHandler())

Scenario = Literal['standard', 'thc1', 'thc2', 'thmix', 'partition', 'high_risk', 'three_density']
Diagnostic = Literal['onto_set', 'intensity', 'maxima', 'tail_ratio', 'vertex', 'duality', 'regularity',
                     'high_risk', 'spectral', 'dispersion', 'link', 'svg', 'dump']


class ExperimentConfig(BaseModel):
    model_config = ConfigDict(extra='forbid')

    ##########
    # Model
    name: str = 'experiment'
    scenario: Scenario = 'standard'
    heavy: Literal['pareto', 'student_t'] = 'pareto'
    lam: float = Field(1.0, gt=0)
    core: Literal['shifted', 'quadratic'] = 'shifted'
    light: Literal['exppower', 'gaussian'] = 'exppower'
    theta: float = Field(1.0, gt=0)
    d: int = Field(2, ge=2, le=3)
    shape: Literal['disk', 'cube', 'diamond', 'ellipse', 'limit_set'] = 'disk'
    axes: Optional[List[float]] = None

    ##########
    # Sampling
    n: int = Field(100000, ge=2)
    seeds: List[int] = [1]
    scaling: Literal['exact', 'psi'] = 'psi'
    diagnostics: List[Diagnostic] = ['onto_set', 'svg']

    ##########
    # Onto-set report
    eps_grid: List[float] = [0.05, 0.1, 0.15, 0.2, 0.3]
    gate_eps: float = Field(0.15, gt=0)
    max_outside: float = Field(1e-3, ge=0, le=1)
    n_directions: int = Field(64, ge=4)
    onto_interior: bool = True

    ##########
    # Partitions and perturbations
    partition_kind: Literal['quantile', 'fig1', 'fig2', 'biregular'] = 'quantile'
    partition_rings: int = Field(400, ge=2)
    epsilon: float = Field(0.5, gt=0, lt=1)
    diag_first: int = Field(2, ge=1)
    mix_shape: Literal['cube', 'limit_set', 'disk', 'diamond'] = 'cube'
    mix_lam: float = Field(2.0, gt=0)
    mix_theta: float = Field(2.0, gt=0)
    mix_kappa: float = 10.0
    mix_weight: float = Field(5e-4, gt=0, lt=1)
    tail_levels: List[float] = [0.999]
    vertex_radius: float = Field(0.15, gt=0)

    ##########
    # High-risk scenarios and spectral weights
    high_risk_level: float = Field(1e-4, gt=0, lt=0.5)
    high_risk_window: float = Field(0.1, gt=0)
    min_exceedances: int = Field(500, ge=1)
    exceedances: int = Field(10000, ge=1)
    spectral_delta: float = Field(0.05, gt=0)

    ##########
    # Maxima, dispersion, exponent link
    maxima_reps: int = Field(200, ge=1)
    maxima_n: int = Field(10000, ge=2)
    dispersion_reps: int = Field(100, ge=2)
    annulus: List[float] = [0.2, 0.5]
    link_level: float = Field(1e-3, gt=0, lt=0.5)

    ##########
    # Output
    output_dir: str = 'output'

    @field_validator('seeds')
    @classmethod
    def _seeds(cls, v):
        if not v:
            raise ValueError("at least one seed is required")
        if any(s < 0 for s in v):
            raise ValueError("seeds must be non-negative")
        return v

    @field_validator('eps_grid')
    @classmethod
    def _eps_grid(cls, v):
        if not v or any(e <= 0 for e in v) or any(b <= a for a, b in zip(v, v[1:])):
            raise ValueError("eps_grid must be positive and strictly increasing")
        return v

    @field_validator('tail_levels')
    @classmethod
    def _levels(cls, v):
        if not v or any(not 0 < p < 1 for p in v):
            raise ValueError("tail levels must lie in (0, 1)")
        return v

    @field_validator('annulus')
    @classmethod
    def _annulus(cls, v):
        if len(v) != 2 or not 0 < v[0] < v[1]:
            raise ValueError("annulus must be [lo, hi] with 0 < lo < hi")
        return v

    @model_validator(mode='after')
    def _consistent(self):
        if self.shape == 'ellipse' and self.axes is not None and len(self.axes) != self.d:
            raise ValueError(f"ellipse needs {self.d} axes, got {len(self.axes)}")
        if self.d != 2 and any(k in self.diagnostics for k in ('intensity', 'high_risk', 'spectral', 'svg')):
            raise ValueError("intensity, high-risk, spectral and svg diagnostics need d=2")
        if self.scenario in ('high_risk', 'three_density') and self.d != 2:
            raise ValueError(f"scenario '{self.scenario}' needs d=2")
        return self


def _key_lines(text, source):
    """Line number of every top-level key; nested mappings and duplicates are rejected."""
    try:
        root = yaml.compose(text)
    except yaml.YAMLError as err:
        mark = getattr(err, 'problem_mark', None)
        raise ConfigError(f"{source}: {getattr(err, 'problem', err)}", line=mark.line + 1 if mark else None)
    if root is None:
        return {}
    if not isinstance(root, yaml.MappingNode):
        raise ConfigError(f"{source}: expected 'key: value' lines", line=root.start_mark.line + 1)
    lines = {}
    for key_node, value_node in root.value:
        key = key_node.value
        line = key_node.start_mark.line + 1
        if key in lines:
            raise ConfigError("duplicate key", line=line, key=key)
        if isinstance(value_node, yaml.MappingNode):
            raise ConfigError("nested mappings are not allowed", line=line, key=key)
        lines[key] = line
    return lines


def parse_config(text, source='<string>'):
    """
    :param text: config text
    :param source: name used in diagnostics
    :return: ExperimentConfig
    """
    lines = _key_lines(text, source)
    data = yaml.safe_load(text) or {}
    try:
        return ExperimentConfig.model_validate(data)
    except pydantic.ValidationError as err:
        first = err.errors()[0]
        key = str(first['loc'][0]) if first['loc'] else None
        raise ConfigError(first['msg'], line=lines.get(key), key=key) from err


def load_config(path=None):
    """
    :param path: config file, None for the defaults
    :return: ExperimentConfig
    """
    if path is None:
        return ExperimentConfig()
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as err:
        raise ConfigError(f"cannot read {path}: {err.strerror}")
    cfg = parse_config(text, source=path)
    logger.debug(f"loaded {path}: scenario={cfg.scenario}, n={cfg.n}, seeds={cfg.seeds}")
    return cfg


def dump_config(cfg):
    """Complete config text with every default filled in."""
    return yaml.safe_dump(cfg.model_dump(), sort_keys=False, default_flow_style=None)
