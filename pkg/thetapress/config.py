"""
Configuration schemas and loaders.

Every file is validated by SQLModel schemas (table=False); JSON syntax errors are
reported as ConfigError with the line and column of the failure.
"""

import json
import logging
from fractions import Fraction
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Union

import numpy as np
from pydantic import ValidationError, field_validator, model_validator
from sqlmodel import Field, SQLModel

from thetapress.battery import default_battery, random_battery
from thetapress.cover_solver import DEFAULT_TOL
from thetapress.errors import ConfigError, InvalidMeasure, InvalidSystem
from thetapress.harness import SUITE, CheckSettings, FactorMap, Instance, relabeled
from thetapress.measure import DiscreteMeasure, dirac, explicit, geometric, random_measures, uniform
from thetapress.models import EvaluationMode, SolverKind
from thetapress.nds import (
    NdsSystem,
    OpenCover,
    circle_metric,
    euclidean_metric,
    hamming_metric,
    ultrametric_tree_metric,
)
from thetapress.pressure import DEFAULT_CANDIDATE_LIMIT, as_fraction

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1


class MetricSpec(SQLModel, table=False):
    """Explicit distance matrix or one of the metric generators"""

    kind: Literal["matrix", "circle", "hamming", "ultrametric_tree", "tree", "euclidean"] = Field(default="matrix")
    matrix: Optional[List[List[float]]] = Field(default=None)
    points: Optional[int] = Field(default=None, ge=1, description="Grid size for the circle metric")
    circumference: float = Field(default=1.0, gt=0)
    bits: Optional[int] = Field(default=None, ge=1, description="Word length for the Hamming metric")
    branching: Optional[int] = Field(default=None, ge=2)
    depth: Optional[int] = Field(default=None, ge=1)
    decay: float = Field(default=0.5, gt=0, lt=1)
    coordinates: Optional[List[List[float]]] = Field(default=None)

    def build(self) -> np.ndarray:
        match self.kind:
            case "matrix":
                if self.matrix is None:
                    raise InvalidSystem("matrix metric needs 'matrix'")
                return np.asarray(self.matrix, dtype=np.float64)
            case "circle":
                if self.points is None:
                    raise InvalidSystem("circle metric needs 'points'")
                return circle_metric(self.points, self.circumference)
            case "hamming":
                if self.bits is None:
                    raise InvalidSystem("hamming metric needs 'bits'")
                return hamming_metric(self.bits)
            case "ultrametric_tree" | "tree":
                if self.branching is None or self.depth is None:
                    raise InvalidSystem("tree metric needs 'branching' and 'depth'")
                return ultrametric_tree_metric(self.branching, self.depth, self.decay)
            case "euclidean":
                if not self.coordinates:
                    raise InvalidSystem("euclidean metric needs 'coordinates'")
                return euclidean_metric(self.coordinates)
            case _:
                raise InvalidSystem(f"unknown metric kind {self.kind}")


class MapsSpec(SQLModel, table=False):
    """Prefix and periodic map tables; multipliers build x -> c * x mod P instead of tables"""

    prefix: List[List[int]] = Field(default=[])
    period: List[List[int]] = Field(default=[])
    multipliers: List[int] = Field(default=[])

    @model_validator(mode="after")
    def one_source(self) -> "MapsSpec":
        if bool(self.period) == bool(self.multipliers):
            raise ValueError("give exactly one of 'period' tables or 'multipliers'")
        return self

    def build(self, size: int) -> tuple[tuple[np.ndarray, ...], tuple[np.ndarray, ...]]:
        prefix = tuple(np.asarray(table, dtype=np.int64) for table in self.prefix)
        if self.multipliers:
            return prefix, tuple((c * np.arange(size)) % size for c in self.multipliers)
        return prefix, tuple(np.asarray(table, dtype=np.int64) for table in self.period)


class PotentialSpec(SQLModel, table=False):
    """Explicit values or a generator: 'zero', 'constant:c' or 'indicator:i,j,...'"""

    values: Optional[List[float]] = Field(default=None)
    generator: Optional[str] = Field(default=None)

    @model_validator(mode="after")
    def one_source(self) -> "PotentialSpec":
        if (self.values is None) == (self.generator is None):
            raise ValueError("give exactly one of 'values' or 'generator'")
        return self

    def build(self, size: int) -> np.ndarray:
        if self.values is not None:
            return np.asarray(self.values, dtype=np.float64)
        name, _, argument = (self.generator or "").partition(":")
        match name.strip():
            case "zero":
                return np.zeros(size)
            case "constant":
                return np.full(size, float(argument))
            case "indicator":
                values = np.zeros(size)
                points = [int(x) for x in argument.split(",") if x.strip()]
                if any(not 0 <= x < size for x in points):
                    raise InvalidSystem(f"indicator points must lie in 0..{size - 1}")
                values[points] = 1.0
                return values
            case _:
                raise InvalidSystem(f"unknown potential generator '{self.generator}'")


class MeasureSpec(SQLModel, table=False):
    kind: Literal["dirac", "uniform", "geometric", "explicit", "random"]
    point: Optional[int] = Field(default=None, ge=0)
    weights: Optional[List[float]] = Field(default=None)
    count: int = Field(default=1, ge=1, description="Number of random measures")

    def build(self, size: int, subset: frozenset[int], seed: int) -> list[DiscreteMeasure]:
        match self.kind:
            case "dirac":
                if self.point is None:
                    raise InvalidMeasure("dirac measure needs 'point'")
                return [dirac(size, self.point)]
            case "uniform":
                return [uniform(size, subset)]
            case "geometric":
                return [geometric(size, subset)]
            case "explicit":
                if self.weights is None:
                    raise InvalidMeasure("explicit measure needs 'weights'")
                return [explicit(self.weights)]
            case "random":
                return random_measures(size, subset, self.count, seed)
            case _:
                raise InvalidMeasure(f"unknown measure kind {self.kind}")


class CoverSpec(SQLModel, table=False):
    sets: List[List[int]] = Field(min_length=1)

    def build(self, system: NdsSystem) -> OpenCover:
        return OpenCover.build(system, self.sets)


class SystemSpec(SQLModel, table=False):
    """A finite nonautonomous system"""

    schema_version: int = Field(default=SCHEMA_VERSION)
    name: str = Field(default="", max_length=100)
    metric: MetricSpec
    maps: MapsSpec
    potential: PotentialSpec = Field(default_factory=lambda: PotentialSpec(generator="zero"))

    @field_validator("schema_version")
    @classmethod
    def known_version(cls, value: int) -> int:
        if value != SCHEMA_VERSION:
            raise ValueError(f"unsupported schema_version {value}, expected {SCHEMA_VERSION}")
        return value

    def build(self, potential: Optional[PotentialSpec] = None) -> NdsSystem:
        metric = self.metric.build()
        size = metric.shape[0]
        prefix, maps = self.maps.build(size)
        values = (potential or self.potential).build(size)
        return NdsSystem(metric=metric, maps=maps, prefix=prefix, potential=values, name=self.name)


class ClassicalSpec(SQLModel, table=False):
    n_window: List[int] = Field(default=[1, 4])
    weighted: bool = Field(default=True)

    @field_validator("n_window")
    @classmethod
    def ordered_window(cls, value: List[int]) -> List[int]:
        return _window(value)


def _window(value: List[int]) -> List[int]:
    if len(value) != 2 or not 1 <= value[0] <= value[1]:
        raise ValueError(f"window must be [N_lo, N_hi] with 1 <= N_lo <= N_hi, got {value}")
    return value


def _thetas(value: List[Union[float, str]]) -> List[Union[float, str]]:
    if not value:
        raise ValueError("theta grid must not be empty")
    for theta in value:
        as_fraction(theta)
    return value


def _subset(value: Union[str, List[int]], size: int) -> frozenset[int]:
    if isinstance(value, str):
        if value != "all":
            raise ConfigError(f"subset must be 'all' or a list of indices, got '{value}'")
        return frozenset(range(size))
    points = frozenset(value)
    if not points:
        raise ConfigError("subset must not be empty")
    if any(not 0 <= x < size for x in points):
        raise ConfigError(f"subset indices must lie in 0..{size - 1}")
    return points


class RunConfig(SQLModel, table=False):
    """Inputs of the pressure, classical and measure commands"""

    system: Union[SystemSpec, str]
    subset: Union[str, List[int]] = Field(default="all")
    potential: Optional[PotentialSpec] = Field(default=None, description="Overrides the system potential")
    theta_grid: List[Union[float, str]] = Field(default=[0.0, 0.25, 0.5, 0.75, 1.0])
    epsilon_ladder: List[float] = Field(default=[0.25])
    n_window: List[int] = Field(default=[2, 4])
    solver: SolverKind = Field(default=SolverKind.AUTO)
    mode: EvaluationMode = Field(default=EvaluationMode.SUP_VALUE)
    tol: float = Field(default=DEFAULT_TOL, ge=0)
    theta0_cap: Optional[int] = Field(default=None, ge=1)
    cover: Optional[CoverSpec] = Field(default=None)
    measures: List[MeasureSpec] = Field(default=[])
    classical: ClassicalSpec = Field(default_factory=ClassicalSpec)
    output_dir: str = Field(default="out")
    seed: int = Field(default=0, ge=0, lt=2**64)
    jobs: int = Field(default=1, ge=1)
    candidate_limit: int = Field(default=DEFAULT_CANDIDATE_LIMIT, ge=1)

    @field_validator("theta_grid")
    @classmethod
    def exact_thetas(cls, value: List[Union[float, str]]) -> List[Union[float, str]]:
        return _thetas(value)

    @field_validator("epsilon_ladder")
    @classmethod
    def decreasing_ladder(cls, value: List[float]) -> List[float]:
        if not value or any(eps <= 0 for eps in value):
            raise ValueError("epsilon ladder must be non-empty and positive")
        if any(a <= b for a, b in zip(value, value[1:])):
            raise ValueError("epsilon ladder must be strictly decreasing")
        return value

    @field_validator("n_window")
    @classmethod
    def ordered_window(cls, value: List[int]) -> List[int]:
        return _window(value)

    def thetas(self) -> list[Fraction]:
        return [as_fraction(theta) for theta in self.theta_grid]

    @property
    def n_lo(self) -> int:
        return self.n_window[0]

    @property
    def n_hi(self) -> int:
        return self.n_window[1]

    def resolve_system(self, base_dir: Path) -> NdsSystem:
        spec = self.system if isinstance(self.system, SystemSpec) else load_system_spec(base_dir / self.system)
        return spec.build(self.potential)

    def resolve_subset(self, system: NdsSystem) -> frozenset[int]:
        return _subset(self.subset, system.size)

    def resolve_measures(self, system: NdsSystem, subset: frozenset[int]) -> list[DiscreteMeasure]:
        specs = self.measures or [MeasureSpec(kind="uniform"), MeasureSpec(kind="geometric")]
        return [measure for spec in specs for measure in spec.build(system.size, subset, self.seed)]


class InstanceSpec(SQLModel, table=False):
    """One suite instance; relabel_seed adds an isometric relabeling as a factor map"""

    name: str = Field(max_length=100)
    system: Union[SystemSpec, str]
    subset: Union[str, List[int]] = Field(default="all")
    epsilon: float = Field(gt=0)
    cover: Optional[CoverSpec] = Field(default=None)
    relabel_seed: Optional[int] = Field(default=None, ge=0)
    commuting: Optional[List[List[int]]] = Field(default=None, description="Two map tables f1, f2")

    def build(self, base_dir: Path) -> Instance:
        spec = self.system if isinstance(self.system, SystemSpec) else load_system_spec(base_dir / self.system)
        system = spec.build()
        factors: tuple[FactorMap, ...] = ()
        if self.relabel_seed is not None:
            factors = (relabeled(system, np.random.default_rng(self.relabel_seed).permutation(system.size)),)
        commuting = None
        if self.commuting is not None:
            if len(self.commuting) != 2:
                raise ConfigError(f"instance {self.name}: 'commuting' needs exactly two tables")
            first, second = (np.asarray(table, dtype=np.int64) for table in self.commuting)
            if any(t.shape != (system.size,) or t.min() < 0 or t.max() >= system.size for t in (first, second)):
                raise InvalidSystem(f"instance {self.name}: commuting tables must map 0..{system.size - 1} into itself")
            commuting = (first, second)
        return Instance(
            name=self.name,
            system=system,
            subset=_subset(self.subset, system.size),
            epsilon=self.epsilon,
            cover=self.cover.build(system) if self.cover is not None else None,
            factors=factors,
            commuting=commuting,
        )


class SuiteConfig(SQLModel, table=False):
    """Inputs of the verify command"""

    builtin: bool = Field(default=True, description="Include the five built-in systems")
    random_count: int = Field(default=0, ge=0)
    instances: List[InstanceSpec] = Field(default=[])
    checks: Optional[List[str]] = Field(default=None, description="Check names; all when omitted")
    theta: Union[float, str] = Field(default="1/2")
    theta_grid: List[Union[float, str]] = Field(default=[0.0, 0.25, 0.5, 0.75, 1.0])
    n_window: List[int] = Field(default=[2, 4])
    tol: float = Field(default=DEFAULT_TOL, ge=0)
    solver: SolverKind = Field(default=SolverKind.AUTO)
    output_dir: str = Field(default="out")
    seed: int = Field(default=0, ge=0, lt=2**64)
    jobs: int = Field(default=1, ge=1)

    @field_validator("theta_grid")
    @classmethod
    def exact_thetas(cls, value: List[Union[float, str]]) -> List[Union[float, str]]:
        return _thetas(value)

    @field_validator("checks")
    @classmethod
    def known_checks(cls, value: Optional[List[str]]) -> Optional[List[str]]:
        unknown = [name for name in value or [] if name not in SUITE]
        if unknown:
            raise ValueError(f"unknown checks {unknown}; known: {sorted(SUITE)}")
        return value

    @field_validator("n_window")
    @classmethod
    def ordered_window(cls, value: List[int]) -> List[int]:
        return _window(value)

    def settings(self) -> CheckSettings:
        return CheckSettings(
            theta=as_fraction(self.theta),
            n_lo=self.n_window[0],
            n_hi=self.n_window[1],
            tol=self.tol,
            solver=self.solver,
            theta_grid=tuple(sorted(as_fraction(theta) for theta in self.theta_grid)),
            seed=self.seed,
        )

    def build_battery(self, base_dir: Path) -> list[Instance]:
        battery = default_battery() if self.builtin else []
        battery.extend(spec.build(base_dir) for spec in self.instances)
        if self.random_count:
            battery.extend(random_battery(self.random_count, self.seed))
        if not battery:
            raise ConfigError("the suite has no instances: enable 'builtin', add instances or set 'random_count'")
        return battery


def load_json(path: Path) -> Dict[str, Any]:
    """Parse a JSON object, reporting syntax errors with line and column"""
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        logger.error(f"cannot read config {path}: {e}")
        raise ConfigError(f"cannot read {path}: {e}") from e
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        logger.error(f"malformed JSON in {path}: {e.msg}")
        raise ConfigError(f"malformed JSON in {path}: {e.msg}", e.lineno, e.colno) from e
    if not isinstance(data, dict):
        raise ConfigError(f"{path} must contain a JSON object")
    return data


def _validated(model: type[SQLModel], data: Dict[str, Any], path: Path) -> Any:
    try:
        return model.model_validate(data)
    except ValidationError as e:
        logger.error(f"invalid {model.__name__} in {path}: {e.error_count()} errors")
        raise ConfigError(f"invalid {model.__name__} in {path}: {e}") from e


def load_system_spec(path: Path) -> SystemSpec:
    return _validated(SystemSpec, load_json(path), path)


def load_run_config(path: Path) -> RunConfig:
    return _validated(RunConfig, load_json(path), path)


def load_suite_config(path: Optional[Path]) -> SuiteConfig:
    """The default suite when no path is given"""
    if path is None:
        return SuiteConfig()
    return _validated(SuiteConfig, load_json(path), path)


def config_schemas() -> Dict[str, Any]:
    return {"RunConfig": RunConfig.model_json_schema(), "SuiteConfig": SuiteConfig.model_json_schema()}
