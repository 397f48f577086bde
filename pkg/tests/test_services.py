"""
Tests for the service layer: sweeps, CSV emission and the run ledger.
"""

import csv
import json
from fractions import Fraction

import pytest

from thetapress.measure import geometric, uniform
from thetapress.models import CheckDetail, CheckReport, RunStatus, SolverKind
from thetapress.services import (
    CLASSICAL_HEADER,
    LADDER_HEADER,
    MEASURE_HEADER,
    PROFILE_HEADER,
    ClassicalService,
    MeasureService,
    PressureService,
    RunLedgerService,
    SweepRequest,
    config_digest,
    format_theta,
    format_value,
    report_table,
    write_classical_csv,
    write_ladder_csv,
    write_measure_csv,
    write_profiles_csv,
    write_reports_json,
)


def request_for(system, epsilons=(0.2,), thetas=(Fraction(1, 2), Fraction(1))) -> SweepRequest:
    return SweepRequest(
        system=system,
        subset=frozenset(system.points),
        thetas=tuple(thetas),
        epsilons=tuple(epsilons),
        n_lo=2,
        n_hi=3,
    )


def read_rows(path):
    with path.open(encoding="utf-8", newline="") as handle:
        return list(csv.reader(handle))


class TestFormatting:
    def test_theta(self):
        assert format_theta(Fraction(1, 3)) == "0.333333333333"
        assert format_theta(1) == "1"

    def test_value(self):
        assert format_value(None) == ""
        assert format_value(0.1) == "0.1"


class TestPressureService:
    """Profiles come back ordered by epsilon, then theta"""

    def test_sweep_order(self, weighted_doubling8):
        profiles = PressureService.sweep(request_for(weighted_doubling8, epsilons=(0.3, 0.2)))
        assert [(p.epsilon, p.theta) for p in profiles] == [(0.3, 0.5), (0.3, 1.0), (0.2, 0.5), (0.2, 1.0)]

    def test_parallel_matches_serial(self, weighted_doubling8):
        request = request_for(weighted_doubling8)
        serial = PressureService.sweep(request, jobs=1)
        parallel = PressureService.sweep(request, jobs=2)
        assert [p.model_dump() for p in serial] == [p.model_dump() for p in parallel]

    def test_csv_files(self, weighted_doubling8, tmp_path):
        profiles = PressureService.sweep(request_for(weighted_doubling8))
        rows = read_rows(write_profiles_csv(tmp_path / "profiles.csv", profiles))
        assert rows[0] == PROFILE_HEADER
        assert len(rows) == 1 + len(profiles)
        assert rows[1][0] == "0.5"
        assert float(rows[1][2]) == profiles[0].lower
        ladder = read_rows(write_ladder_csv(tmp_path / "alpha_ladder.csv", profiles))
        assert ladder[0] == LADDER_HEADER
        assert len(ladder) == 1 + 2 * len(profiles)
        assert ladder[1][4] == "exact"

    def test_csv_is_deterministic(self, weighted_doubling8, tmp_path):
        profiles = PressureService.sweep(request_for(weighted_doubling8))
        first = write_profiles_csv(tmp_path / "a.csv", profiles).read_bytes()
        second = write_profiles_csv(tmp_path / "b.csv", profiles).read_bytes()
        assert first == second
        assert b"\r\n" not in first


class TestMeasureService:
    def test_sweep_per_measure(self, weighted_doubling8, tmp_path):
        request = request_for(weighted_doubling8, thetas=(Fraction(1),))
        measures = [uniform(8, range(8)), geometric(8, {0, 3})]
        rows = MeasureService.sweep(request, measures)
        assert [name for name, _ in rows] == ["uniform", "geometric"]
        table = read_rows(write_measure_csv(tmp_path / "measure.csv", rows, {"uniform": 8, "geometric": 2}))
        assert table[0] == MEASURE_HEADER
        assert table[2][:2] == ["geometric", "2"]

    def test_checks(self, weighted_doubling8):
        request = request_for(weighted_doubling8)
        report = MeasureService.checks(request, [uniform(8, range(8))], Fraction(1, 2), 0.2, seed=0)
        assert report.name == "variational"
        assert report.instances == 2
        assert report.passed


class TestClassicalService:
    def test_ladders(self, doubling8, tmp_path):
        report = ClassicalService.ladders(doubling8, frozenset(range(8)), [0.125], [1, 2], weighted=False)
        rows = read_rows(write_classical_csv(tmp_path / "classical.csv", report))
        assert rows[0] == CLASSICAL_HEADER
        assert rows[1][:4] == ["Q", "1", "0.125", "3.0"]
        assert rows[2][:4] == ["P", "1", "0.125", "4.0"]


class TestReports:
    def sample(self) -> list[CheckReport]:
        return [
            CheckReport(
                name="closure",
                details=[CheckDetail(instance="a", passed=True), CheckDetail(instance="b", passed=False, gap=0.5)],
            )
        ]

    def test_json(self, tmp_path):
        payload = json.loads(write_reports_json(tmp_path / "report.json", self.sample()).read_text())
        assert payload[0]["name"] == "closure"
        assert payload[0]["failures"] == 1
        assert payload[0]["worst_slack"] == 0.5

    def test_table(self):
        table = report_table(self.sample())
        assert table.splitlines()[0].startswith("check")
        assert "FAIL" in table

    def test_digest_ignores_key_order(self):
        assert config_digest({"a": 1, "b": [1, 2]}) == config_digest({"b": [1, 2], "a": 1})
        assert config_digest({"a": 1}) != config_digest({"a": 2})


class TestRunLedgerService:
    """Runs and profiles persisted in SQL tables"""

    def test_lifecycle(self, new_db, weighted_doubling8):
        service = RunLedgerService(new_db)
        run_id = service.start("pressure", config_digest({"x": 1}), seed=3, jobs=1, output_dir="out")
        run = service.get(run_id)
        assert run is not None
        assert run.status == RunStatus.RUNNING

        profiles = PressureService.sweep(request_for(weighted_doubling8))
        assert service.record_profiles(run_id, profiles) == len(profiles)

        finished = service.finish(run_id, 0)
        assert finished is not None
        assert finished.status == RunStatus.SUCCESS
        assert finished.exit_code == 0
        assert finished.duration_ms is not None and finished.duration_ms >= 0

    def test_failed_run(self, new_db):
        service = RunLedgerService(new_db)
        run_id = service.start("verify", "digest", seed=0, jobs=2, output_dir="out")
        finished = service.finish(run_id, 2, "ConfigError: bad")
        assert finished is not None
        assert finished.status == RunStatus.FAILED
        assert finished.error_message == "ConfigError: bad"

    def test_finish_unknown_run(self, new_db):
        assert RunLedgerService(new_db).finish(999, 0) is None

    def test_recent(self, new_db, fixed_point):
        service = RunLedgerService(new_db)
        first = service.start("pressure", "a", 0, 1, "out")
        second = service.start("classical", "b", 0, 1, "out")
        request = request_for(fixed_point, epsilons=(0.5,))
        service.record_profiles(second, PressureService.sweep(request), label="uniform")
        summaries = service.recent()
        assert [s.id for s in summaries] == [second, first]
        assert summaries[0].profiles == 2
        assert summaries[1].profiles == 0
        assert len(service.recent(limit=1)) == 1

    def test_solver_kind_passes_through(self, weighted_doubling8):
        request = SweepRequest(
            system=weighted_doubling8,
            subset=frozenset(range(8)),
            thetas=(Fraction(1),),
            epsilons=(0.2,),
            n_lo=1,
            n_hi=1,
            solver=SolverKind.GREEDY,
        )
        profile = PressureService.sweep(request)[0]
        assert not profile.all_exact
