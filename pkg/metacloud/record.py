class RunRecord:
    """
    One ledger row: a (config, seed) run and its gate tally.
    """
    def __init__(self, run_id, name, scenario, seed, status, gates_passed=0, gates_total=0, wall_time=0.0,
                 timestamp="", output_dir=""):
        self.run_id = run_id
        self.name = name
        self.scenario = scenario
        self.seed = seed
        self.status = status
        self.gates_passed = gates_passed
        self.gates_total = gates_total
        self.wall_time = wall_time
        self.timestamp = timestamp
        self.output_dir = output_dir

    def __repr__(self):
        return self._column_format().format(self.run_id, self.name, self.scenario, self.seed, self.status,
                                            f"{self.gates_passed}/{self.gates_total}", self.wall_time,
                                            str(self.timestamp))

    def __eq__(self, other):
        return self.run_id == other.run_id

    @classmethod
    def get_columns(cls):
        return cls._header_format().format("run", "name", "scenario", "seed", "status", "gates", "time_s",
                                           "timestamp")

    @staticmethod
    def _column_format():
        return "{:>5} {:<18}{:<14}{:>6} {:<8}{:^7}{:9.2f}  {:<20}"

    @staticmethod
    def _header_format():
        return "{:>5} {:<18}{:<14}{:>6} {:<8}{:^7}{:>9}  {:<20}"

    @staticmethod
    def parse_run_record(record):
        (run_id, name, scenario, seed, status, wall_time, timestamp, output_dir, gates_passed, gates_total) = record
        return RunRecord(run_id, name, scenario, seed, status, gates_passed or 0, gates_total or 0, wall_time,
                         timestamp, output_dir)


class GateRecord:
    """
    One gate outcome of a run.
    """
    def __init__(self, run_id, gate, value, threshold, passed, strict):
        self.run_id = run_id
        self.gate = gate
        self.value = value
        self.threshold = threshold
        self.passed = bool(passed)
        self.strict = bool(strict)

    def __repr__(self):
        verdict = "pass" if self.passed else ("FAIL" if self.strict else "miss")
        return self._column_format().format(self.run_id, self.gate, self.value, str(self.threshold), verdict,
                                            "strict" if self.strict else "advisory")

    @classmethod
    def get_columns(cls):
        return cls._header_format().format("run", "gate", "value", "threshold", "result", "kind")

    @staticmethod
    def _column_format():
        return "{:>5} {:<26}{:12.5g}  {:<22}{:<6}{:<9}"

    @staticmethod
    def _header_format():
        return "{:>5} {:<26}{:^12}  {:<22}{:<6}{:<9}"

    @staticmethod
    def parse_gate_record(record):
        (gate_id, run_id, gate, value, threshold, passed, strict) = record
        return GateRecord(run_id, gate, value, threshold, passed, strict)
