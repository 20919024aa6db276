#!/usr/bin/env python3
#
#  Licensed under the Apache License, Version 2.0 (the "License");
#  you may not use this file except in compliance with the License.
#  You may obtain a copy of the License at
#
#      http://www.apache.org/licenses/LICENSE-2.0
#
#      Unless required by applicable law or agreed to in writing, software
#      distributed under the License is distributed on an "AS IS" BASIS,
#      WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
#      See the License for the specific language governing permissions and
#      limitations under the License.

import logging
import os
import time

import yaml
from tqdm import tqdm

from . import __version__
from .config import dump_config
from .database import Database
from .trial import Trial
from .utils import GateFailure


class Manager:
    """
    Experiment manager: runs a config over its seeds, records every run in the
    ledger and writes a manifest next to the artifacts.

    Manager('path/to/runs.sqlite3')
    """
    logger = logging.getLogger(__name__)
    logger.addHandler(logging.NullHandler())

    def __init__(self, db_filename=None, **kwargs):
        '''
        # kwargs accepts:
        threads: int, worker threads for cloud generation (None reads METACLOUD_THREADS)
        progress_bar: bool, show a progress bar over seeds
        output_dir: str, override the config's output directory
        strict: bool, raise GateFailure when a strict gate fails
        '''
        self.threads = kwargs.pop('threads', None)
        self.progress_bar = kwargs.pop('progress_bar', True)
        self.output_dir = kwargs.pop('output_dir', None)
        self.strict = kwargs.pop('strict', True)
        if kwargs:
            raise ValueError(f"Unexpected kwargs {kwargs}")
        self.db = None
        self.db_filename = None
        if db_filename:
            self.reload_db(db_filename)

    def reload_db(self, db_filename=None):
        """
        Close the current ledger and open another (or re-open the same).
        :param db_filename: str, path to the sqlite file
        """
        new_db = os.path.abspath(db_filename) if db_filename else self.db_filename
        self.db = None
        self.db = Database(new_db)
        self.db_filename = new_db

    def _output_dir(self, config):
        return self.output_dir or config.output_dir

    def run(self, config, seeds=None):
        """
        Run every seed of a config.

        :param config: ExperimentConfig
        :param seeds: list of int, overrides config.seeds
        :return: [Trial]
        """
        seeds = list(seeds if seeds is not None else config.seeds)
        out = self._output_dir(config)
        os.makedirs(out, exist_ok=True)
        if self.db is None:
            self.reload_db(os.path.join(out, 'runs.sqlite3'))

        start = time.perf_counter()
        trials = []
        pbar = tqdm(seeds, leave=False, desc=config.name, ncols=80, disable=not self.progress_bar or len(seeds) < 2)
        for seed in pbar:
            trial = Trial(config, seed, output_dir=out, threads=self.threads)
            try:
                trial.run()
            finally:
                self.trial_callback(trial)
            trials.append(trial)
        pbar.close()
        wall = time.perf_counter() - start

        self.write_manifest(config, trials, out, wall)
        failures = [g for t in trials for g in t.strict_failures]
        if failures and self.strict:
            raise GateFailure(failures)
        return trials

    def trial_callback(self, trial):
        """
        Post-trial callback: record the run and its gates in the ledger and log the gate table.
        """
        run_id = self.db.add_run(trial, __version__)
        table = "\n".join(str(g) for g in trial.gates)
        self.logger.info(f"run {run_id}: {trial}\n{table}" if table else f"run {run_id}: {trial}")
        return run_id

    def write_manifest(self, config, trials, out, wall_time):
        manifest = {
            'name': config.name,
            'version': __version__,
            'seeds': [t.seed for t in trials],
            'wall_time_s': round(wall_time, 3),
            'config': yaml.safe_load(dump_config(config)),
            'runs': [{'seed': t.seed,
                      'status': t.status,
                      'wall_time_s': round(t.wall_time, 3),
                      'files': [os.path.basename(f) for f in t.files],
                      'gates': [{'name': g.name, 'value': g.value, 'threshold': g.threshold,
                                 'passed': g.passed, 'strict': g.strict} for g in t.gates]}
                     for t in trials],
        }
        path = os.path.join(out, f"{config.name}_manifest.yaml")
        with open(path, 'w') as fh:
            fh.write(yaml.safe_dump(manifest, sort_keys=False))
        self.logger.debug(f"wrote {path}")
        return path

    def results(self, offset=0, limit=10):
        """
        :return: [RunRecord], newest first
        """
        return self.db.get_results(offset, limit)

    def gates(self, run_id):
        return self.db.get_gates(run_id)
