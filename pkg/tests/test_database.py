from types import SimpleNamespace

import pytest

from metacloud.database import Database
from metacloud.record import GateRecord, RunRecord
from metacloud.trial import Gate


def finished(name='standard_tE', seed=1, gates=None):
    gates = gates if gates is not None else [Gate('outside_frac', 0.0, "<= 0.001", True),
                                             Gate('vertex_hits', 0, ">= 1", False, strict=False)]
    return SimpleNamespace(config=SimpleNamespace(name=name, scenario='standard'), seed=seed, status='passed',
                           wall_time=1.25, output_dir='out', gates=gates)


@pytest.fixture
def db(tmp_path):
    d = Database(str(tmp_path / "ledger" / "runs.sqlite3"))
    yield d
    d.close()


class TestLedger:
    def test_add_and_get(self, db):
        run_id = db.add_run(finished(), "0.1.0")
        rec = db.get_run(run_id)
        assert isinstance(rec, RunRecord)
        assert (rec.name, rec.seed, rec.status) == ('standard_tE', 1, 'passed')
        assert (rec.gates_passed, rec.gates_total) == (1, 2)
        assert rec.wall_time == pytest.approx(1.25)

    def test_gates(self, db):
        run_id = db.add_run(finished())
        gates = db.get_gates(run_id)
        assert [g.gate for g in gates] == ['outside_frac', 'vertex_hits']
        assert gates[0].passed and gates[0].strict
        assert not gates[1].passed and not gates[1].strict

    def test_run_without_gates(self, db):
        rec = db.get_run(db.add_run(finished(gates=[])))
        assert (rec.gates_passed, rec.gates_total) == (0, 0)

    def test_results_newest_first(self, db):
        ids = [db.add_run(finished(seed=s)) for s in (1, 2, 3)]
        recs = db.get_results(0, 2)
        assert [r.run_id for r in recs] == [ids[2], ids[1]]
        assert [r.run_id for r in db.get_results(2, 10)] == [ids[0]]

    def test_delete(self, db):
        run_id = db.add_run(finished())
        db.delete_run(run_id)
        assert db.get_run(run_id) is None
        assert db.get_gates(run_id) == []

    def test_reopen_keeps_rows(self, tmp_path):
        path = str(tmp_path / "runs.sqlite3")
        first = Database(path)
        run_id = first.add_run(finished())
        first.close()
        again = Database(path)
        assert again.get_run(run_id).name == 'standard_tE'
        again.close()


class TestRecords:
    def test_run_record_columns(self):
        rec = RunRecord(3, 'thc2_cross', 'thc2', 7, 'failed', 4, 6, 12.5, "01.01.2026 10:00:00")
        line = repr(rec)
        assert "thc2_cross" in line and "4/6" in line and "12.50" in line
        assert RunRecord.get_columns().split()[:4] == ["run", "name", "scenario", "seed"]

    def test_gate_record_verdicts(self):
        assert "FAIL" in repr(GateRecord(1, 'tail_ratio', 0.5, "in [0.8, 1.25]", False, True))
        assert "miss" in repr(GateRecord(1, 'vertex_hits', 0, ">= 1", False, False))
        assert "pass" in repr(GateRecord(1, 'outside_frac', 0.0, "<= 0.001", True, True))

    def test_equality_by_id(self):
        a = RunRecord(1, 'a', 'standard', 1, 'passed')
        b = RunRecord(1, 'b', 'thc1', 2, 'failed')
        assert a == b
