import glob
import os

import pytest

from metacloud.config import ExperimentConfig, dump_config, load_config, parse_config
from metacloud.utils import ConfigError

CONFIG_DIR = os.path.join(os.path.dirname(__file__), os.pardir, 'configs')


class TestParse:
    def test_defaults(self):
        cfg = load_config()
        assert cfg == ExperimentConfig()
        assert cfg.scenario == 'standard'
        assert cfg.gate_eps == 0.15
        assert cfg.max_outside == 1e-3

    def test_values(self):
        cfg = parse_config("name: t\nlam: 2\ntheta: 2\nseeds: [3, 4]\ndiagnostics: [onto_set]\n")
        assert (cfg.lam, cfg.theta, cfg.seeds, cfg.diagnostics) == (2.0, 2.0, [3, 4], ['onto_set'])

    def test_comments_and_blank_lines(self):
        cfg = parse_config("# a comment\n\nname: t  # trailing\n")
        assert cfg.name == 't'

    def test_empty(self):
        assert parse_config("") == ExperimentConfig()


class TestErrors:
    def test_unknown_key_line(self):
        with pytest.raises(ConfigError) as info:
            parse_config("name: t\nlamda: 2\n")
        assert info.value.line == 2
        assert info.value.key == 'lamda'
        assert str(info.value).startswith("line 2: key 'lamda': ")

    def test_out_of_range(self):
        with pytest.raises(ConfigError) as info:
            parse_config("name: t\n\nlam: -1\n")
        assert info.value.line == 3

    def test_duplicate(self):
        with pytest.raises(ConfigError, match="duplicate"):
            parse_config("lam: 1\nlam: 2\n")

    def test_nested(self):
        with pytest.raises(ConfigError, match="nested"):
            parse_config("model:\n  lam: 1\n")

    def test_not_a_mapping(self):
        with pytest.raises(ConfigError):
            parse_config("- 1\n- 2\n")

    def test_bad_yaml(self):
        with pytest.raises(ConfigError) as info:
            parse_config("name: [t\n")
        assert info.value.line is not None

    @pytest.mark.parametrize('text', [
        "seeds: []\n",
        "seeds: [-1]\n",
        "eps_grid: [0.2, 0.1]\n",
        "tail_levels: [1.5]\n",
        "annulus: [0.5, 0.2]\n",
        "scenario: nonsense\n",
        "d: 3\ndiagnostics: [svg]\n",
        "d: 3\nscenario: high_risk\ndiagnostics: [onto_set]\n",
        "shape: ellipse\naxes: [1.0]\n",
    ])
    def test_rejected(self, text):
        with pytest.raises(ConfigError):
            parse_config(text)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="cannot read"):
            load_config(str(tmp_path / "missing.cfg"))


class TestDump:
    def test_round_trip(self):
        cfg = parse_config("name: t\nlam: 2\nscenario: thc2\n")
        assert parse_config(dump_config(cfg)) == cfg

    def test_complete(self):
        text = dump_config(ExperimentConfig())
        for key in ExperimentConfig.model_fields:
            assert f"{key}:" in text


class TestShippedConfigs:
    @pytest.mark.parametrize('path', sorted(glob.glob(os.path.join(CONFIG_DIR, '*.cfg'))))
    def test_loads(self, path):
        cfg = load_config(path)
        assert cfg.name == os.path.splitext(os.path.basename(path))[0]
