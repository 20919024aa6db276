import os

import pytest
import yaml

from metacloud.config import ExperimentConfig
from metacloud.manager import Manager
from metacloud.trial import SLOTS, Trial
from metacloud.utils import GateFailure, UnsupportedError


def standard(tmp_path, **kw):
    values = dict(name='std', scenario='standard', n=3000, seeds=[1], diagnostics=['onto_set', 'vertex', 'svg'],
                  output_dir=str(tmp_path / 'out'))
    values.update(kw)
    return ExperimentConfig(**values)


class TestTrial:
    def test_standard_artifacts(self, tmp_path):
        trial = Trial(standard(tmp_path, diagnostics=['onto_set', 'vertex', 'svg', 'dump']), 1).run()
        names = [g.name for g in trial.gates]
        assert names == ['outside_frac', 'min_coverage', 'vertex_hits']
        assert not trial.gates[-1].strict
        assert trial.status in ('passed', 'failed')
        assert trial.wall_time > 0
        for f in trial.files:
            assert os.path.exists(f)
        basenames = sorted(os.path.basename(f) for f in trial.files)
        assert basenames == ['std_seed1.bin', 'std_seed1_cloud.svg', 'std_seed1_onto_set.csv']

    def test_same_seed_same_bytes(self, tmp_path):
        cfg = standard(tmp_path, diagnostics=['onto_set'])
        a = Trial(cfg, 4, output_dir=str(tmp_path / 'a'), threads=1).run()
        b = Trial(cfg, 4, output_dir=str(tmp_path / 'b'), threads=2).run()
        with open(a.files[0], 'rb') as fa, open(b.files[0], 'rb') as fb:
            assert fa.read() == fb.read()

    def test_subseeds(self, tmp_path):
        a = Trial(standard(tmp_path), 1)
        b = Trial(standard(tmp_path), 2)
        assert set(a.subseeds) == set(SLOTS)
        assert a.subseeds != b.subseeds
        assert a.subseeds == Trial(standard(tmp_path), 1).subseeds

    def test_partition_scenario(self, tmp_path):
        cfg = ExperimentConfig(name='part', scenario='partition', partition_rings=60,
                               diagnostics=['duality', 'regularity', 'svg'], output_dir=str(tmp_path))
        trial = Trial(cfg, 1).run()
        gates = {g.name: g for g in trial.gates}
        assert gates['duality_z_shrinks'].passed
        assert gates['duality_x_grows'].passed
        assert not gates['regular_z'].strict
        assert trial.status == 'passed'
        assert any(f.endswith('regions.svg') for f in trial.files)

    def test_tail_ratio(self, tmp_path):
        trial = Trial(standard(tmp_path, n=20000, diagnostics=['tail_ratio'], tail_levels=[0.99]), 1).run()
        assert [g.name for g in trial.gates] == ['tail_ratio']

    def test_high_risk_and_spectral(self, tmp_path):
        cfg = ExperimentConfig(name='hr', scenario='high_risk', high_risk_level=1e-3, exceedances=2000,
                               min_exceedances=200, diagnostics=['high_risk', 'spectral'],
                               output_dir=str(tmp_path))
        trial = Trial(cfg, 1).run()
        names = [g.name for g in trial.gates]
        assert names == ['v_exponential_ks_p', 'mass_minus', 'mass_plus', 'spectral_sum']
        assert trial.high_risk.count == 2000
        assert os.path.exists(trial.path('spectral.csv'))

    def test_heavy_side_diagnostics(self, tmp_path):
        # link_level keeps its default tail probability, as in configs/intensity.cfg
        cfg = ExperimentConfig(name='hv', scenario='standard', n=50000, diagnostics=['dispersion', 'maxima', 'link'],
                               dispersion_reps=20, annulus=[0.2, 0.5], maxima_reps=30, maxima_n=500,
                               output_dir=str(tmp_path))
        trial = Trial(cfg, 1).run()
        gates = {g.name: g for g in trial.gates}
        assert list(gates) == ['dispersion_index', 'maxima_commute', 'maxima_ranks_equal', 'frechet_ks_p',
                               'gumbel_ks_p', 'exponent_link_ks_p']
        assert gates['dispersion_index'].value > 0
        assert gates['maxima_commute'].passed
        assert gates['maxima_ranks_equal'].passed
        assert gates['exponent_link_ks_p'].value > 1e-4
        with open(trial.path('dispersion.csv')) as fh:
            assert len(fh.read().splitlines()) == 21
        with open(trial.path('link.csv')) as fh:
            rows = fh.read().splitlines()[1:]
        assert len(rows) == 2
        assert all(int(r.split(',')[2]) >= 20 for r in rows)
        assert os.path.exists(trial.path('maxima.csv'))

    def test_perturbed_scenario_onto_set(self, tmp_path):
        cfg = ExperimentConfig(name='cross', scenario='thc2', partition_rings=60, n=3000, diagnostics=['onto_set'],
                               eps_grid=[0.1, 0.2, 0.3], gate_eps=0.2, output_dir=str(tmp_path))
        trial = Trial(cfg, 1).run()
        assert [g.name for g in trial.gates] == ['outside_frac', 'min_coverage']
        assert trial.status in ('passed', 'failed')

    def test_missing_density(self, tmp_path):
        cfg = ExperimentConfig(name='td', scenario='three_density', diagnostics=['intensity'],
                               output_dir=str(tmp_path))
        trial = Trial(cfg, 1)
        with pytest.raises(UnsupportedError):
            trial.run()
        assert trial.status == 'error'


class TestManager:
    def test_run_records_and_manifest(self, tmp_path):
        cfg = standard(tmp_path, seeds=[1, 2])
        manager = Manager(progress_bar=False, strict=False)
        trials = manager.run(cfg)
        assert [t.seed for t in trials] == [1, 2]
        out = tmp_path / 'out'
        assert (out / 'runs.sqlite3').exists()
        with open(out / 'std_manifest.yaml') as fh:
            manifest = yaml.safe_load(fh)
        assert manifest['seeds'] == [1, 2]
        assert manifest['config']['n'] == 3000
        assert [r['seed'] for r in manifest['runs']] == [1, 2]
        assert manifest['runs'][0]['gates'][0]['name'] == 'outside_frac'
        records = manager.results()
        assert [r.seed for r in records] == [2, 1]
        assert [g.gate for g in manager.gates(records[0].run_id)][:2] == ['outside_frac', 'min_coverage']

    def test_seed_override(self, tmp_path):
        manager = Manager(str(tmp_path / 'ledger.sqlite3'), progress_bar=False, strict=False,
                          output_dir=str(tmp_path / 'elsewhere'))
        trials = manager.run(standard(tmp_path, diagnostics=['vertex']), seeds=[9])
        assert [t.seed for t in trials] == [9]
        assert (tmp_path / 'elsewhere' / 'std_manifest.yaml').exists()
        assert manager.results()[0].seed == 9

    def test_strict_gate_failure(self, tmp_path):
        # two points cannot cover the limit set
        cfg = standard(tmp_path, n=2, diagnostics=['onto_set'])
        manager = Manager(progress_bar=False)
        with pytest.raises(GateFailure) as info:
            manager.run(cfg)
        assert 'min_coverage' in [g.name for g in info.value.gates]
        assert manager.results()[0].status == 'failed'

    def test_unexpected_kwargs(self):
        with pytest.raises(ValueError):
            Manager(colour=True)
