"""
Command-line entry point: pressure, classical, measure, verify and schema.

Exit codes: 0 success, 1 failed hard assertion, 2 configuration or validation error,
3 infeasible cover problem, candidate explosion or bracketing failure.
"""

import argparse
import json
import logging
import os
import sys
from pathlib import Path
from typing import Any, Callable, Optional, Sequence, TypeVar

from pydantic import ValidationError
from sqlalchemy.exc import SQLAlchemyError

from thetapress.config import RunConfig, SuiteConfig, config_schemas, load_run_config, load_suite_config
from thetapress.database import create_tables, database_url, get_engine
from thetapress.errors import (
    BracketFailure,
    CandidateExplosion,
    ConfigError,
    Infeasible,
    NotMonotone,
    ThetaPressError,
)
from thetapress.harness import run_suite
from thetapress.models import ExitCode, PressureProfile, SolverKind
from thetapress.plotting import write_pressure_svg
from thetapress.services import (
    ClassicalService,
    MeasureService,
    PressureService,
    RunLedgerService,
    SweepRequest,
    config_digest,
    report_table,
    write_classical_csv,
    write_ladder_csv,
    write_measure_csv,
    write_profiles_csv,
    write_reports_json,
)

logger = logging.getLogger(__name__)

SettingsModel = TypeVar("SettingsModel", RunConfig, SuiteConfig)

LOG_ENV = "THETAPRESS_LOG"
LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
LOG_LEVELS = {"DEBUG": logging.DEBUG, "INFO": logging.INFO, "WARNING": logging.WARNING, "ERROR": logging.ERROR}


def configure_logging() -> None:
    requested = os.environ.get(LOG_ENV, "WARNING").upper()
    level = LOG_LEVELS.get(requested)
    logging.basicConfig(level=level or logging.WARNING, format=LOG_FORMAT)
    if level is None:
        logger.warning(f"unknown {LOG_ENV} value '{requested}', using WARNING")
    # suppress sqlalchemy engine logs below warning level
    logging.getLogger("sqlalchemy.engine.Engine").setLevel(logging.WARNING)


class _Ledger:
    """Run ledger whose failures are logged and never change a command's outcome"""

    def __init__(self, output_dir: Path):
        self.service: Optional[RunLedgerService] = None
        self.run_id: Optional[int] = None
        try:
            output_dir.mkdir(parents=True, exist_ok=True)
            engine = get_engine(database_url(output_dir))
            create_tables(engine)
            self.service = RunLedgerService(engine)
        except (SQLAlchemyError, OSError) as e:
            logger.warning(f"run ledger unavailable: {type(e).__name__}: {e}")

    def _guard(self, action: Callable[[RunLedgerService], Any]) -> Any:
        if self.service is None:
            return None
        try:
            return action(self.service)
        except SQLAlchemyError as e:
            logger.warning(f"run ledger write failed: {type(e).__name__}: {e}")
            return None

    def start(self, command: str, data: dict, seed: int, jobs: int, output_dir: Path) -> None:
        self.run_id = self._guard(lambda s: s.start(command, config_digest(data), seed, jobs, str(output_dir)))

    def profiles(self, profiles: Sequence[PressureProfile], label: str = "") -> None:
        run_id = self.run_id
        if run_id is not None:
            self._guard(lambda s: s.record_profiles(run_id, profiles, label))

    def finish(self, exit_code: int, error: str = "") -> None:
        run_id = self.run_id
        if run_id is not None:
            self._guard(lambda s: s.finish(run_id, exit_code, error))


def exit_code_for(error: Exception) -> ExitCode:
    match error:
        case Infeasible() | CandidateExplosion() | BracketFailure():
            return ExitCode.SOLVER_ERROR
        case NotMonotone():
            return ExitCode.ASSERTION_FAILED
        case _:
            return ExitCode.CONFIG_ERROR


def _with_overrides(config: SettingsModel, args: argparse.Namespace) -> SettingsModel:
    """Command-line flags win over configuration values"""
    overrides = {
        key: value
        for key, value in (
            ("output_dir", args.out),
            ("solver", args.solver),
            ("tol", args.tol),
            ("jobs", args.jobs),
            ("seed", args.seed),
        )
        if value is not None
    }
    if not overrides:
        return config
    try:
        return type(config).model_validate({**config.model_dump(), **overrides})
    except ValidationError as e:
        raise ConfigError(f"invalid command-line override: {e}") from e


def _run_config(args: argparse.Namespace) -> tuple[RunConfig, Path]:
    if args.config is None:
        raise ConfigError(f"'{args.command}' needs --config")
    path = Path(args.config)
    return _with_overrides(load_run_config(path), args), path.parent


def _tracked(ledger: _Ledger, body: Callable[[], ExitCode]) -> ExitCode:
    """Run a command body and close its ledger entry with the resulting exit code"""
    try:
        code = body()
    except (ThetaPressError, ValidationError, ValueError) as e:
        ledger.finish(exit_code_for(e), f"{type(e).__name__}: {e}")
        raise
    ledger.finish(code)
    return code


def _sweep_request(config: RunConfig, base_dir: Path) -> SweepRequest:
    system = config.resolve_system(base_dir)
    subset = config.resolve_subset(system)
    cover = config.cover.build(system) if config.cover is not None else None
    return SweepRequest(
        system=system,
        subset=subset,
        thetas=tuple(config.thetas()),
        epsilons=(None,) if cover is not None else tuple(config.epsilon_ladder),
        n_lo=config.n_lo,
        n_hi=config.n_hi,
        solver=config.solver,
        tol=config.tol,
        mode=config.mode,
        cover=cover,
        theta0_cap=config.theta0_cap,
        limit=config.candidate_limit,
    )


def cmd_pressure(args: argparse.Namespace) -> int:
    config, base_dir = _run_config(args)
    out = Path(config.output_dir)
    ledger = _Ledger(out)
    ledger.start("pressure", config.model_dump(mode="json"), config.seed, config.jobs, out)

    def body() -> ExitCode:
        request = _sweep_request(config, base_dir)
        profiles = PressureService.sweep(request, config.jobs)
        write_profiles_csv(out / "profiles.csv", profiles)
        write_ladder_csv(out / "alpha_ladder.csv", profiles)
        title = f"{request.system.name or 'system'}: P(theta)"
        write_pressure_svg(out / "pressure_vs_theta.svg", profiles, title=title)
        ledger.profiles(profiles)
        return ExitCode.SUCCESS

    return _tracked(ledger, body)


def cmd_classical(args: argparse.Namespace) -> int:
    config, base_dir = _run_config(args)
    out = Path(config.output_dir)
    ledger = _Ledger(out)
    ledger.start("classical", config.model_dump(mode="json"), config.seed, config.jobs, out)

    def body() -> ExitCode:
        system = config.resolve_system(base_dir)
        subset = config.resolve_subset(system)
        # phi = 0 gives the entropy counts r_n and s_n
        weighted = config.classical.weighted and bool(system.potential.any())
        report = ClassicalService.ladders(
            system, subset, config.epsilon_ladder, config.classical.n_window, weighted, config.solver
        )
        write_classical_csv(out / "classical.csv", report)
        return ExitCode.SUCCESS

    return _tracked(ledger, body)


def cmd_measure(args: argparse.Namespace) -> int:
    config, base_dir = _run_config(args)
    if config.cover is not None:
        raise ConfigError("measure runs use Bowen balls; remove 'cover' and give an epsilon ladder")
    out = Path(config.output_dir)
    ledger = _Ledger(out)
    ledger.start("measure", config.model_dump(mode="json"), config.seed, config.jobs, out)

    def body() -> ExitCode:
        request = _sweep_request(config, base_dir)
        measures = config.resolve_measures(request.system, request.subset)
        rows = MeasureService.sweep(request, measures, config.jobs)
        write_measure_csv(out / "measure.csv", rows, {measure.name: len(measure.support) for measure in measures})
        reports = [
            MeasureService.checks(request, measures, theta, config.epsilon_ladder[0], config.seed)
            for theta in request.thetas
        ]
        write_reports_json(out / "variational.json", reports)
        for name, profile in rows:
            ledger.profiles([profile], label=name)
        sys.stdout.write(report_table(reports))
        return ExitCode.SUCCESS if all(report.passed for report in reports) else ExitCode.ASSERTION_FAILED

    return _tracked(ledger, body)


def cmd_verify(args: argparse.Namespace) -> int:
    path = Path(args.config) if args.config is not None else None
    suite = _with_overrides(load_suite_config(path), args)
    out = Path(suite.output_dir)
    ledger = _Ledger(out)
    ledger.start("verify", suite.model_dump(mode="json"), suite.seed, suite.jobs, out)

    def body() -> ExitCode:
        battery = suite.build_battery(path.parent if path is not None else Path.cwd())
        reports = run_suite(battery, suite.settings(), suite.checks, suite.jobs)
        write_reports_json(out / "verify_report.json", reports)
        sys.stdout.write(report_table(reports))
        return ExitCode.SUCCESS if all(report.passed for report in reports) else ExitCode.ASSERTION_FAILED

    return _tracked(ledger, body)


def cmd_schema(args: argparse.Namespace) -> int:
    sys.stdout.write(json.dumps(config_schemas(), indent=2, sort_keys=True) + "\n")
    return ExitCode.SUCCESS


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="thetapress", description="Finite-scale theta-intermediate pressures.")
    commands = parser.add_subparsers(dest="command", required=True)
    for name, handler, text in (
        ("pressure", cmd_pressure, "theta sweep of cover pressures"),
        ("classical", cmd_classical, "spanning/separated pressure ladders"),
        ("measure", cmd_measure, "measure pressures and variational checks"),
        ("verify", cmd_verify, "run the property suite"),
    ):
        sub = commands.add_parser(name, help=text)
        sub.add_argument("--config", help="JSON configuration file")
        sub.add_argument("--out", help="output directory")
        sub.add_argument("--solver", choices=[kind.value for kind in SolverKind])
        sub.add_argument("--tol", type=float)
        sub.add_argument("--jobs", type=int)
        sub.add_argument("--seed", type=int)
        sub.set_defaults(handler=handler)
    schema = commands.add_parser("schema", help="print the JSON schema of the configuration files")
    schema.set_defaults(handler=cmd_schema)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    configure_logging()
    args = build_parser().parse_args(argv)
    try:
        return int(args.handler(args))
    except (ThetaPressError, ValidationError, ValueError) as e:
        code = exit_code_for(e)
        logger.error(f"{type(e).__name__}: {e}")
        sys.stderr.write(f"error: {e}\n")
        return int(code)


if __name__ == "__main__":
    sys.exit(main())
