"""
Service layer behind the CLI commands.

Cells run in a process pool and come back in task order, so the CSV files are
identical for any worker count. The ledger records each run in SQL tables.
"""

import csv
import hashlib
import json
import logging
from dataclasses import dataclass, replace
from datetime import datetime
from fractions import Fraction
from multiprocessing import Pool
from pathlib import Path
from typing import Iterable, List, Optional, Sequence

from sqlalchemy.engine import Engine
from sqlmodel import desc, func, select

from thetapress.classical import ClassicalReport, classical_pressure
from thetapress.cover_solver import DEFAULT_TOL
from thetapress.database import get_session
from thetapress.measure import DiscreteMeasure, variational_inf_check, variational_sup_check
from thetapress.models import (
    CheckDetail,
    CheckReport,
    EvaluationMode,
    PressureProfile,
    ProfileRecord,
    RunRecord,
    RunStatus,
    RunSummary,
    ScaleResult,
    SolverKind,
    SolverStatus,
)
from thetapress.nds import NdsSystem, OpenCover
from thetapress.pressure import (
    DEFAULT_CANDIDATE_LIMIT,
    ScaleTask,
    assemble_profile,
    scale_tasks,
    solve_scale,
    sweep_grid,
    theta_sweep_cap,
)

logger = logging.getLogger(__name__)

PROFILE_HEADER = ["theta", "epsilon", "lower", "upper"]
LADDER_HEADER = ["theta", "epsilon", "N", "alpha_N", "solver_status", "candidates", "cover_cardinality"]
CLASSICAL_HEADER = ["kind", "n", "epsilon", "value", "log_value_over_n", "witness_size"]
MEASURE_HEADER = ["measure", "support_size", "theta", "epsilon", "lower", "upper"]


def format_theta(theta: float) -> str:
    return f"{float(theta):.12g}"


def format_value(value: Optional[float]) -> str:
    """Shortest round-tripping decimal; empty for a missing radius"""
    return "" if value is None else repr(float(value))


def run_cells(tasks: Sequence[ScaleTask], jobs: int = 1) -> list[ScaleResult]:
    """Solve every cell; results keep the task order"""
    if jobs > 1 and len(tasks) > 1:
        with Pool(processes=min(jobs, len(tasks))) as pool:
            return pool.map(solve_scale, tasks, chunksize=1)
    return [solve_scale(task) for task in tasks]


@dataclass(frozen=True)
class SweepRequest:
    """A theta sweep over an epsilon ladder (or one open cover)"""

    system: NdsSystem
    subset: frozenset[int]
    thetas: tuple[Fraction, ...]
    epsilons: tuple[Optional[float], ...]
    n_lo: int
    n_hi: int
    solver: SolverKind = SolverKind.AUTO
    tol: float = DEFAULT_TOL
    mode: EvaluationMode = EvaluationMode.SUP_VALUE
    cover: Optional[OpenCover] = None
    theta0_cap: Optional[int] = None
    limit: int = DEFAULT_CANDIDATE_LIMIT


class PressureService:
    """Theta sweeps over (theta, epsilon, N) cells"""

    @staticmethod
    def sweep(request: SweepRequest, jobs: int = 1) -> list[PressureProfile]:
        """Profiles ordered by epsilon, then theta"""
        thetas = sweep_grid(request.thetas)
        cap = theta_sweep_cap(thetas, request.n_hi, request.theta0_cap)
        groups: list[list[ScaleTask]] = []
        for epsilon in request.epsilons:
            for theta in thetas:
                groups.append(
                    scale_tasks(
                        request.system, request.subset, theta, request.n_lo, request.n_hi,
                        epsilon, request.cover, request.solver, request.tol, request.mode, cap, request.limit,
                    )
                )
        flat = [task for group in groups for task in group]
        logger.info(f"solving {len(flat)} cells with {jobs} worker(s)")
        results = iter(run_cells(flat, jobs))
        profiles = []
        for group in groups:
            scales = [next(results) for _ in group]
            first = group[0]
            profiles.append(assemble_profile(first.theta, first.epsilon, scales, first.mode, first.cap))
        greedy = sum(1 for profile in profiles if not profile.all_exact)
        if greedy:
            logger.warning(f"{greedy} profile(s) contain GREEDY scales; their values are upper bounds")
        return profiles


class MeasureService:
    """Measure pressures are subset pressures of the supports; checks run per measure"""

    @staticmethod
    def sweep(
        request: SweepRequest, measures: Sequence[DiscreteMeasure], jobs: int = 1
    ) -> list[tuple[str, PressureProfile]]:
        rows: list[tuple[str, PressureProfile]] = []
        for measure in measures:
            support = replace(request, subset=measure.support, cover=None)
            rows.extend((measure.name, profile) for profile in PressureService.sweep(support, jobs))
        return rows

    @staticmethod
    def checks(
        request: SweepRequest, measures: Sequence[DiscreteMeasure], theta: Fraction, epsilon: float, seed: int
    ) -> CheckReport:
        details: list[CheckDetail] = []
        for measure in measures:
            details.append(
                variational_inf_check(
                    request.system, measure, epsilon, theta, request.n_lo, request.n_hi, request.tol,
                    request.solver, seed=seed, instance=f"inf {measure.name}",
                )
            )
        details.append(
            variational_sup_check(
                request.system, request.subset, epsilon, theta, request.n_lo, request.n_hi, request.tol,
                request.solver, seed=seed, instance="sup",
            )
        )
        return CheckReport(name="variational", details=details)


class ClassicalService:
    @staticmethod
    def ladders(
        system: NdsSystem,
        subset: frozenset[int],
        epsilons: Sequence[float],
        n_window: Sequence[int],
        weighted: bool = True,
        solver: SolverKind = SolverKind.AUTO,
    ) -> ClassicalReport:
        window = list(range(n_window[0], n_window[1] + 1))
        return classical_pressure(system, subset, epsilons, window, weighted, solver)


# CSV emission


def _write_rows(path: Path, header: List[str], rows: Iterable[List[str]]) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
    logger.info(f"wrote {path}")
    return path


def write_profiles_csv(path: Path, profiles: Sequence[PressureProfile]) -> Path:
    return _write_rows(
        path,
        PROFILE_HEADER,
        (
            [format_theta(p.theta), format_value(p.epsilon), format_value(p.lower), format_value(p.upper)]
            for p in profiles
        ),
    )


def write_ladder_csv(path: Path, profiles: Sequence[PressureProfile]) -> Path:
    rows = (
        [
            format_theta(profile.theta),
            format_value(profile.epsilon),
            str(scale.n),
            format_value(scale.alpha),
            scale.solver_status.value,
            str(scale.candidates),
            str(scale.cover_cardinality),
        ]
        for profile in profiles
        for scale in profile.scales
    )
    return _write_rows(path, LADDER_HEADER, rows)


def write_classical_csv(path: Path, report: ClassicalReport) -> Path:
    rows = (
        [
            cell.kind,
            str(cell.n),
            format_value(cell.epsilon),
            format_value(cell.value),
            format_value(cell.log_value_over_n),
            str(len(cell.witness)),
        ]
        for cell in report.cells
    )
    return _write_rows(path, CLASSICAL_HEADER, rows)


def write_measure_csv(path: Path, rows: Sequence[tuple[str, PressureProfile]], supports: dict[str, int]) -> Path:
    return _write_rows(
        path,
        MEASURE_HEADER,
        (
            [
                name,
                str(supports[name]),
                format_theta(profile.theta),
                format_value(profile.epsilon),
                format_value(profile.lower),
                format_value(profile.upper),
            ]
            for name, profile in rows
        ),
    )


def write_reports_json(path: Path, reports: Sequence[CheckReport]) -> Path:
    payload = [
        {
            "name": report.name,
            "instances": report.instances,
            "passes": report.passes,
            "failures": report.failures,
            "worst_slack": report.worst_slack,
            "details": [detail.model_dump(mode="json") for detail in report.details],
        }
        for report in reports
    ]
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True, default=str) + "\n", encoding="utf-8")
    logger.info(f"wrote {path}")
    return path


def report_table(reports: Sequence[CheckReport]) -> str:
    """Fixed-width summary table of a suite run"""
    width = max([len("check")] + [len(report.name) for report in reports])
    lines = [f"{'check':<{width}}  {'instances':>9}  {'passes':>6}  {'worst gap-slack':>15}  result"]
    for report in reports:
        verdict = "PASS" if report.passed else "FAIL"
        lines.append(
            f"{report.name:<{width}}  {report.instances:>9}  {report.passes:>6}  {report.worst_slack:>15.6g}  {verdict}"
        )
    return "\n".join(lines) + "\n"


def config_digest(data: dict) -> str:
    """sha256 of the canonical JSON form of a configuration"""
    canonical = json.dumps(data, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


class RunLedgerService:
    """Records CLI runs and the profiles they produced"""

    def __init__(self, engine: Engine):
        self.engine = engine

    def start(self, command: str, digest: str, seed: int, jobs: int, output_dir: str) -> int:
        with get_session(self.engine) as session:
            run = RunRecord(
                command=command,
                config_digest=digest,
                seed=seed,
                jobs=jobs,
                output_dir=output_dir,
                status=RunStatus.RUNNING,
                started_at=datetime.utcnow(),
            )
            session.add(run)
            session.commit()
            session.refresh(run)
            if run.id is None:
                raise ValueError("run record was not assigned an id")
            return run.id

    def record_profiles(self, run_id: int, profiles: Sequence[PressureProfile], label: str = "") -> int:
        with get_session(self.engine) as session:
            for profile in profiles:
                status = SolverStatus.EXACT if profile.all_exact else SolverStatus.GREEDY
                session.add(
                    ProfileRecord(
                        run_id=run_id,
                        label=label,
                        theta=profile.theta,
                        epsilon=profile.epsilon,
                        lower=profile.lower,
                        upper=profile.upper,
                        solver_status=status,
                    )
                )
            session.commit()
        return len(profiles)

    def finish(self, run_id: int, exit_code: int, error_message: str = "") -> Optional[RunRecord]:
        with get_session(self.engine) as session:
            run = session.get(RunRecord, run_id)
            if run is None:
                return None
            run.completed_at = datetime.utcnow()
            run.duration_ms = int((run.completed_at - run.started_at).total_seconds() * 1000)
            run.exit_code = exit_code
            run.status = RunStatus.SUCCESS if exit_code == 0 else RunStatus.FAILED
            run.error_message = error_message[:1000]
            session.add(run)
            session.commit()
            session.refresh(run)
            return run

    def get(self, run_id: int) -> Optional[RunRecord]:
        with get_session(self.engine) as session:
            return session.get(RunRecord, run_id)

    def recent(self, limit: int = 10) -> List[RunSummary]:
        """Most recent runs first"""
        with get_session(self.engine) as session:
            runs = session.exec(select(RunRecord).order_by(desc(RunRecord.id)).limit(limit)).all()
            summaries = []
            for run in runs:
                if run.id is None:
                    continue
                count = session.exec(
                    select(func.count()).select_from(ProfileRecord).where(ProfileRecord.run_id == run.id)
                ).one()
                summaries.append(
                    RunSummary(
                        id=run.id,
                        command=run.command,
                        status=run.status,
                        exit_code=run.exit_code,
                        started_at=run.started_at,
                        duration_ms=run.duration_ms,
                        profiles=count,
                    )
                )
            return summaries
