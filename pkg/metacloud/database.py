import sqlite3
import datetime
import logging
import os

from .record import GateRecord, RunRecord

logger = logging.getLogger(__name__)
logger.addHandler(logging.NullHandler())


class Database:
    """
    sqlite run ledger: one row per run, one row per gate outcome.
    """
    def __init__(self, filename):
        folder = os.path.dirname(os.path.abspath(filename))
        os.makedirs(folder, exist_ok=True)
        self.filename = filename
        self.db = sqlite3.connect(filename)
        self.recreate()

    def __del__(self):
        try:
            self.db.close()
        except Exception:
            pass

    def close(self):
        self.db.close()

    def now(self):
        return datetime.datetime.now().strftime("%d.%m.%Y %H:%M:%S")

    def recreate(self):
        cursor = self.db.cursor()
        try:
            cursor.execute("create table runs(id integer primary key autoincrement, name text, scenario text, seed integer, status text, wall_time real, timestamp date, output_dir text, version text)")
            cursor.execute("create table gates(id integer primary key autoincrement, run_id integer, gate text, value real, threshold text, passed integer, strict integer)")
            self.db.commit()
        except sqlite3.OperationalError:
            # tables exist
            pass

    def update_deferred(self, sql, tup=()):
        cursor = self.db.cursor()
        cursor.execute(sql, tup)
        return cursor

    def update(self, sql, tup=()):
        cursor = self.update_deferred(sql, tup)
        self.db.commit()
        return cursor

    def update_many(self, sql, iterable):
        cursor = self.db.cursor()
        cursor.executemany(sql, iterable)
        self.db.commit()

    def retrieve(self, sql, tup=()):
        cursor = self.db.cursor()
        cursor.execute(sql, tup)
        return cursor.fetchall()

    def add_run(self, trial, version=""):
        """
        :param trial: finished Trial
        :return: int, run id
        """
        cursor = self.update("INSERT INTO runs (name, scenario, seed, status, wall_time, timestamp, output_dir, version) VALUES (?,?,?,?,?,?,?,?)",
                             (trial.config.name, trial.config.scenario, trial.seed, trial.status, trial.wall_time,
                              self.now(), str(trial.output_dir), version))
        run_id = cursor.lastrowid
        self.update_many("INSERT INTO gates (run_id, gate, value, threshold, passed, strict) VALUES (?,?,?,?,?,?)",
                         [(run_id, g.name, float(g.value), str(g.threshold), int(g.passed), int(g.strict))
                          for g in trial.gates])
        logger.debug(f"ledger: run {run_id} with {len(trial.gates)} gates")
        return run_id

    def get_run(self, run_id):
        sql = 'SELECT runs.id, name, scenario, seed, status, wall_time, timestamp, output_dir, SUM(gates.passed), COUNT(gates.id) FROM runs LEFT JOIN gates ON gates.run_id = runs.id WHERE runs.id = ? GROUP BY runs.id'
        rows = self.retrieve(sql, (run_id,))
        return RunRecord.parse_run_record(rows[0]) if rows else None

    def get_results(self, offset, limit):
        sql = 'SELECT runs.id, name, scenario, seed, status, wall_time, timestamp, output_dir, SUM(gates.passed), COUNT(gates.id) FROM runs LEFT JOIN gates ON gates.run_id = runs.id GROUP BY runs.id ORDER BY runs.id DESC LIMIT ? OFFSET ?'
        return [RunRecord.parse_run_record(r) for r in self.retrieve(sql, (int(limit), int(offset)))]

    def get_gates(self, run_id):
        records = self.retrieve("select * from gates where run_id=? order by id", (run_id,))
        return [GateRecord.parse_gate_record(r) for r in records]

    def delete_run(self, run_id):
        self.update_deferred("delete from gates where run_id=?", (run_id,))
        self.update("delete from runs where id=?", (run_id,))
