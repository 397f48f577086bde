import math
from sqlmodel import SQLModel, Field, Relationship
from datetime import datetime
from typing import Optional, List, Dict, Any
from enum import Enum


class SolverKind(str, Enum):
    """Requested cover solver"""

    AUTO = "auto"
    EXACT = "exact"
    GREEDY = "greedy"


class SolverStatus(str, Enum):
    """Solver that actually produced a value"""

    EXACT = "exact"
    GREEDY = "greedy"


class CandidateKind(str, Enum):
    BOWEN_BALL = "bowen_ball"
    STRING = "string"


class EvaluationMode(str, Enum):
    """How a candidate's Birkhoff weight is evaluated"""

    SUP_VALUE = "sup_value"
    CENTER_VALUE = "center_value"


class RunStatus(str, Enum):
    """Status of a CLI run recorded in the ledger"""

    PENDING = "pending"
    RUNNING = "running"
    SUCCESS = "success"
    FAILED = "failed"


class ExitCode(int, Enum):
    SUCCESS = 0
    ASSERTION_FAILED = 1
    CONFIG_ERROR = 2
    SOLVER_ERROR = 3


# Non-persistent result schemas


class ScaleResult(SQLModel, table=False):
    """Critical exponent at one scale N"""

    n: int = Field(ge=1, description="Scale N")
    alpha: float = Field(description="Root of M(alpha) = 1 at this scale")
    solver_status: SolverStatus = Field(default=SolverStatus.EXACT)
    candidates: int = Field(default=0, ge=0, description="Candidates after deduplication")
    cover_cardinality: int = Field(default=0, ge=0, description="Size of the optimal cover at the root")


class PressureProfile(SQLModel, table=False):
    """Per-(theta, epsilon) record of critical exponents and liminf/limsup surrogates"""

    theta: float = Field(ge=0, le=1)
    theta_exact: str = Field(default="", description="Theta as an exact fraction p/q")
    epsilon: Optional[float] = Field(default=None, description="Ball radius, None for string covers")
    mode: EvaluationMode = Field(default=EvaluationMode.SUP_VALUE)
    n_lo: int = Field(ge=1)
    n_hi: int = Field(ge=1)
    theta0_cap: Optional[int] = Field(default=None, description="Largest length used when theta = 0")
    scales: List[ScaleResult] = Field(default=[])
    lower: float
    upper: float

    @property
    def alpha_by_scale(self) -> Dict[int, float]:
        return {scale.n: scale.alpha for scale in self.scales}

    @property
    def all_exact(self) -> bool:
        return all(scale.solver_status == SolverStatus.EXACT for scale in self.scales)


class SpanningResult(SQLModel, table=False):
    """Spanning (Q), separated (P) or sup-entropy (sup) value at one (n, epsilon) cell"""

    kind: str = Field(description="Q, P or sup")
    n: int = Field(ge=1)
    epsilon: float = Field(gt=0)
    value: float = Field(description="Weighted count (cardinality when unweighted)")
    witness: List[int] = Field(default=[])
    solver_status: SolverStatus = Field(default=SolverStatus.EXACT)

    @property
    def log_value_over_n(self) -> float:
        return math.log(self.value) / self.n


class CheckDetail(SQLModel, table=False):
    """Outcome of one check on one instance"""

    instance: str
    passed: bool
    gap: float = Field(default=0.0, description="Observed left side minus right side")
    slack: float = Field(default=0.0, description="Allowed slack for the assertion")
    message: str = Field(default="")
    diagnostics: Dict[str, Any] = Field(default={})


class CheckReport(SQLModel, table=False):
    """Aggregated outcome of a named check over a battery"""

    name: str
    details: List[CheckDetail] = Field(default=[])

    @property
    def instances(self) -> int:
        return len(self.details)

    @property
    def passes(self) -> int:
        return sum(1 for detail in self.details if detail.passed)

    @property
    def failures(self) -> int:
        return self.instances - self.passes

    @property
    def worst_slack(self) -> float:
        """Largest observed gap minus allowed slack (negative when every instance passes with room)"""
        if not self.details:
            return 0.0
        return max(detail.gap - detail.slack for detail in self.details)

    @property
    def passed(self) -> bool:
        return self.failures == 0


# Persistent run ledger


class RunRecord(SQLModel, table=True):
    """One CLI invocation"""

    __tablename__ = "runs"  # type: ignore[assignment]

    id: Optional[int] = Field(default=None, primary_key=True)
    command: str = Field(max_length=20, description="pressure, classical, measure or verify")
    config_digest: str = Field(max_length=64, description="sha256 of the canonical config JSON")
    seed: int = Field(default=0)
    jobs: int = Field(default=1)
    output_dir: str = Field(default="", max_length=500)
    status: RunStatus = Field(default=RunStatus.PENDING)
    exit_code: Optional[int] = Field(default=None)
    started_at: datetime = Field(default_factory=datetime.utcnow)
    completed_at: Optional[datetime] = Field(default=None)
    duration_ms: Optional[int] = Field(default=None)
    error_message: str = Field(default="", max_length=1000)

    profiles: List["ProfileRecord"] = Relationship(back_populates="run")


class ProfileRecord(SQLModel, table=True):
    """Surrogate pressures written by a run"""

    __tablename__ = "profiles"  # type: ignore[assignment]

    id: Optional[int] = Field(default=None, primary_key=True)
    run_id: int = Field(foreign_key="runs.id")
    label: str = Field(default="", max_length=100, description="Measure name or empty for subset profiles")
    theta: float
    epsilon: Optional[float] = Field(default=None)
    lower: float
    upper: float
    solver_status: SolverStatus = Field(default=SolverStatus.EXACT)

    run: RunRecord = Relationship(back_populates="profiles")


class RunSummary(SQLModel, table=False):
    """Summary of a ledger entry for listings"""

    id: int
    command: str
    status: RunStatus
    exit_code: Optional[int]
    started_at: datetime
    duration_ms: Optional[int]
    profiles: int
