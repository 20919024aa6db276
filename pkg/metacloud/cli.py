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

import argparse
import logging
import os
import sys

from .config import dump_config, load_config
from .manager import Manager
from .record import GateRecord, RunRecord
from .selftest import selftest
from .utils import GateFailure, MetacloudError, MultilineFormatter

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_GATES = 2


class Commandline:
    def __init__(self):
        self.cmds = None
        self.parser = argparse.ArgumentParser(prog='metacloud',
                                              description="Scaled sample clouds of meta distributions")
        self.no_args = False

        self.parser.add_argument('-v', action='count',
                                 default=0, dest='verbosity',
                                 help="Make output more verbose")

        self.parser.add_argument('-db', dest='db_filename',
                                 action="store", default=None,
                                 help="Run ledger (default <output_dir>/runs.sqlite3)")

        self.parser.add_argument('--threads', dest='threads',
                                 action="store", default=None, type=int,
                                 help="Worker threads for cloud generation (default METACLOUD_THREADS or 1)")

        sub = self.parser.add_subparsers(dest='command')

        ##########
        # Experiments
        run = sub.add_parser('run', help="Run an experiment config over its seeds")
        run.add_argument('config', help="Config file")
        run.add_argument('-o', dest='output_dir', action="store", default=None,
                         help="Override the config's output directory")
        run.add_argument('-s', dest='seeds', nargs='*', type=int, default=None,
                         help="Override the config's seeds")

        show = sub.add_parser('print-config', help="Print a config with every default filled in")
        show.add_argument('config', nargs='?', default=None, help="Config file (defaults when omitted)")

        test = sub.add_parser('selftest', help="Run the acceptance suite")
        test.add_argument('--seed', dest='seed', type=int, default=1)
        test.add_argument('--out', dest='out', default='selftest')
        test.add_argument('--scale', dest='scale', type=float, default=1.0,
                          help="Factor on every Monte Carlo size (1 = stated sizes)")
        test.add_argument('-c', dest='criteria', nargs='*', type=int, default=None,
                          help="Only these criteria")

        ##########
        # Feedback
        results = sub.add_parser('results', help="Show the latest runs from the ledger")
        results.add_argument('-R', dest='offset', action="store", default=0, type=int,
                             help="View latest results starting from offset")
        results.add_argument('-L', dest='limit', action="store", default=10, type=int,
                             help="Specify number of displayed results")
        results.add_argument('-g', dest='gates', action="store", default=None, type=int,
                             help="Show the gates of one run id")
        results.add_argument('--dir', dest='output_dir', action="store", default='output',
                             help="Output directory holding runs.sqlite3")

    def parse(self, args):
        self.no_args = not args
        self.cmds = self.parser.parse_args(args)

    def setup_logging(self):
        verbosity = max(logging.ERROR - self.cmds.verbosity * 10, 1)
        h = logging.StreamHandler(sys.stdout)
        if verbosity <= 10:
            h.setFormatter(MultilineFormatter("%(levelno)d:%(filename)s:line #%(lineno)d:%(message)s"))
        else:
            h.setFormatter(MultilineFormatter("%(message)s"))
        logger = logging.getLogger('metacloud')
        logger.handlers = [hd for hd in logger.handlers if isinstance(hd, logging.NullHandler)]
        logger.addHandler(h)
        logger.setLevel(verbosity)

    def act(self):
        """
        :return: process exit code
        """
        if self.no_args or self.cmds.command is None:
            self.parser.print_help()
            return EXIT_OK
        self.setup_logging()
        try:
            return getattr(self, 'do_' + self.cmds.command.replace('-', '_'))()
        except GateFailure as err:
            print(f"gate failure: {err}")
            return EXIT_GATES
        except (MetacloudError, OSError) as err:
            print(f"error: {err}")
            return EXIT_ERROR

    ##########
    # Commands
    def do_run(self):
        config = load_config(self.cmds.config)
        self.manager = Manager(self.cmds.db_filename, threads=self.cmds.threads,
                               output_dir=self.cmds.output_dir)
        seeds = self.cmds.seeds if self.cmds.seeds else None
        print(f"Running '{config.name}' ({config.scenario}), n={config.n}, seeds={seeds or config.seeds}")
        trials = self.manager.run(config, seeds)
        for t in trials:
            print(t)
        return EXIT_OK

    def do_print_config(self):
        print(dump_config(load_config(self.cmds.config)), end='')
        return EXIT_OK

    def do_selftest(self):
        print(f"Running acceptance suite, seed={self.cmds.seed}, scale={self.cmds.scale:g} -> {self.cmds.out}")
        results = selftest(self.cmds.seed, self.cmds.out, self.cmds.scale, self.cmds.threads, self.cmds.criteria)
        for k, gates in results.items():
            failed = sum(g.strict and not g.passed for g in gates)
            print(f"criterion {k:>2}: {'FAIL' if failed else 'pass'} ({len(gates) - failed}/{len(gates)})")
        return EXIT_OK

    def do_results(self):
        db_filename = self.cmds.db_filename or os.path.join(self.cmds.output_dir, 'runs.sqlite3')
        if not os.path.exists(db_filename):
            raise MetacloudError(f"no ledger at {db_filename}")
        self.manager = Manager(db_filename)
        if self.cmds.gates is not None:
            print(f"\nGates of run {self.cmds.gates}")
            print(GateRecord.get_columns())
            for g in self.manager.gates(self.cmds.gates):
                print(g)
            return EXIT_OK
        print(f"\nDisplaying latest {self.cmds.limit} results from offset {self.cmds.offset}")
        print(RunRecord.get_columns())
        for r in self.manager.results(self.cmds.offset, self.cmds.limit):
            print(r)
        return EXIT_OK


def main(argv=None):
    cmd = Commandline()
    cmd.parse(sys.argv[1:] if argv is None else argv)
    return cmd.act()


if __name__ == '__main__':
    sys.exit(main())
