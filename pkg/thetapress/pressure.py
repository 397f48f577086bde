"""
Finite-scale theta-intermediate pressures.

For a scale N and theta in [0, 1] the admissible cover lengths are N <= n < N/theta + 1
(N <= n <= cap when theta = 0). Candidates are Bowen balls B_n(x, eps) centered anywhere
in X, or cylinders X(U) of strings over an open cover. The critical exponent alpha_N is
the root of M(alpha) = 1, and the liminf/limsup surrogates are the min/max of alpha_N
over the scale window [N_lo, N_hi].
"""

import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Optional, Sequence

import numpy as np

from thetapress.cover_solver import (
    DEFAULT_TOL,
    CoverProblem,
    critical_alpha,
    min_weight_cover,
    resolve_solver,
    solve_min_cover,
)
from thetapress.errors import CandidateExplosion, InvalidCover, NotMonotone
from thetapress.models import (
    CandidateKind,
    EvaluationMode,
    PressureProfile,
    ScaleResult,
    SolverKind,
    SolverStatus,
)
from thetapress.nds import CoverCandidate, NdsSystem, OpenCover

logger = logging.getLogger(__name__)

DEFAULT_CANDIDATE_LIMIT = 1_000_000
THETA0_CAP_FACTOR = 4

__all__ = [
    "ThetaWindow",
    "as_fraction",
    "candidates_bowen",
    "candidates_string",
    "build_problem",
    "min_weight_cover",
    "ScaleTask",
    "solve_scale",
    "assemble_profile",
    "pressure_profile",
    "pesin_pitskel",
    "capacity_pressures",
    "theta_sweep",
    "theta_sweep_cap",
    "theta_jumps",
    "measured_oscillation",
    "CoverComparison",
    "compare_string_and_ball",
]


def as_fraction(theta: Fraction | float | int | str) -> Fraction:
    """Exact rational value of theta; floats go through their shortest decimal repr"""
    match theta:
        case Fraction():
            value = theta
        case str():
            value = Fraction(theta.strip())
        case int():
            value = Fraction(theta)
        case float():
            value = Fraction(str(float(theta)))
        case _:
            raise TypeError(f"unsupported theta type {type(theta).__name__}")
    if not 0 <= value <= 1:
        raise ValueError(f"theta must lie in [0, 1], got {value}")
    return value


def max_length(n: int, theta: Fraction) -> int:
    """Largest n' with theta * (n' - 1) < N, for theta > 0"""
    return math.ceil(Fraction(n) / theta)


@dataclass(frozen=True)
class ThetaWindow:
    """Admissible lengths at scale N"""

    n: int
    theta: Fraction
    cap: Optional[int] = None

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError(f"scale N must be >= 1, got {self.n}")
        object.__setattr__(self, "theta", as_fraction(self.theta))
        if self.theta == 0:
            cap = self.cap if self.cap is not None else THETA0_CAP_FACTOR * self.n
            if cap < self.n:
                raise ValueError(f"theta = 0 cap {cap} is below the scale {self.n}")
            object.__setattr__(self, "cap", cap)

    @property
    def n_max(self) -> int:
        if self.theta == 0:
            assert self.cap is not None
            return self.cap
        return max_length(self.n, self.theta)

    def admits(self, length: int) -> bool:
        if length < self.n:
            return False
        if self.theta == 0:
            return length <= self.n_max
        return self.theta * (length - 1) < self.n

    @property
    def lengths(self) -> range:
        return range(self.n, self.n_max + 1)


def _keep_cheapest(
    table: dict[tuple[frozenset[int], int], CoverCandidate],
    key: tuple[frozenset[int], int],
    candidate: CoverCandidate,
    mode: EvaluationMode,
) -> None:
    current = table.get(key)
    if current is None or candidate.value(mode) < current.value(mode):
        table[key] = candidate


def candidates_bowen(
    system: NdsSystem,
    subset: Iterable[int],
    epsilon: float,
    window: ThetaWindow,
    limit: int = DEFAULT_CANDIDATE_LIMIT,
    mode: EvaluationMode = EvaluationMode.SUP_VALUE,
) -> list[CoverCandidate]:
    """All balls B_n(x, eps), x in X and n admissible, deduplicated on (ball meets Z, n)"""
    if epsilon <= 0:
        raise ValueError(f"radius must be positive, got {epsilon}")
    universe = frozenset(subset)
    count = system.size * len(window.lengths)
    if count > limit:
        logger.error(f"Bowen candidate explosion: {count} balls at N={window.n}, theta={window.theta}")
        raise CandidateExplosion(count, limit, "Bowen-ball candidates")

    table: dict[tuple[frozenset[int], int], CoverCandidate] = {}
    for length in window.lengths:
        distances = system.bowen_matrix(length)
        sums = system.birkhoff_sums(length)
        for x in system.points:
            row = distances[x]
            members = frozenset(int(y) for y in np.flatnonzero(row < epsilon))
            hit = members & universe
            if not hit:
                continue
            candidate = CoverCandidate(
                kind=CandidateKind.BOWEN_BALL,
                length=length,
                members=members,
                sup_birkhoff=float(max(sums[y] for y in members)),
                center=x,
                radius=epsilon,
                center_birkhoff=float(sums[x]),
            )
            _keep_cheapest(table, (hit, length), candidate, mode)
    return list(table.values())


def candidates_string(
    system: NdsSystem,
    subset: Iterable[int],
    cover: OpenCover,
    window: ThetaWindow,
    limit: int = DEFAULT_CANDIDATE_LIMIT,
) -> list[CoverCandidate]:
    """All strings of admissible length whose cylinder meets Z"""
    universe = frozenset(subset)
    count = sum(len(cover) ** length for length in window.lengths)
    if count > limit:
        logger.error(f"string candidate explosion: {count} strings at N={window.n}, theta={window.theta}")
        raise CandidateExplosion(count, limit, "string candidates")

    deepest = window.n_max
    orbit = system.orbit(deepest)
    sums = {length: system.birkhoff_sums(length) for length in window.lengths}
    zone = [frozenset(members) for members in cover.sets]
    table: dict[tuple[frozenset[int], int], CoverCandidate] = {}

    # cylinders only shrink as strings grow, so a prefix missing Z prunes its subtree
    def extend(string: tuple[int, ...], alive: frozenset[int]) -> None:
        depth = len(string)
        if depth >= window.n and depth in sums:
            values = sums[depth]
            candidate = CoverCandidate(
                kind=CandidateKind.STRING,
                length=depth,
                members=alive,
                sup_birkhoff=float(max(values[x] for x in alive)),
                string=string,
            )
            _keep_cheapest(table, (alive & universe, depth), candidate, EvaluationMode.SUP_VALUE)
        if depth == deepest:
            return
        step = orbit[depth]
        for index, members in enumerate(zone):
            nxt = frozenset(x for x in alive if int(step[x]) in members)
            if nxt & universe:
                extend(string + (index,), nxt)

    extend((), frozenset(system.points))
    return list(table.values())


def build_problem(
    system: NdsSystem,
    subset: Iterable[int],
    candidates: Sequence[CoverCandidate],
    mode: EvaluationMode = EvaluationMode.SUP_VALUE,
) -> CoverProblem:
    return CoverProblem.build(
        frozenset(subset), candidates, mode=mode, norm=system.norm, space_size=system.size
    )


@dataclass(frozen=True)
class ScaleTask:
    """One (theta, epsilon, N) cell; picklable so it can be shipped to worker processes"""

    system: NdsSystem
    subset: frozenset[int]
    theta: Fraction
    n: int
    epsilon: Optional[float] = None
    cover: Optional[OpenCover] = None
    cap: Optional[int] = None
    mode: EvaluationMode = EvaluationMode.SUP_VALUE
    solver: SolverKind = SolverKind.AUTO
    tol: float = DEFAULT_TOL
    limit: int = DEFAULT_CANDIDATE_LIMIT

    def window(self) -> ThetaWindow:
        return ThetaWindow(n=self.n, theta=self.theta, cap=self.cap)

    def problem(self) -> CoverProblem:
        window = self.window()
        if self.cover is not None:
            if self.mode == EvaluationMode.CENTER_VALUE:
                raise InvalidCover("center-value mode needs Bowen-ball candidates, not string covers")
            candidates = candidates_string(self.system, self.subset, self.cover, window, self.limit)
        elif self.epsilon is not None:
            candidates = candidates_bowen(self.system, self.subset, self.epsilon, window, self.limit, self.mode)
        else:
            raise ValueError("a scale task needs either a radius or an open cover")
        return build_problem(self.system, self.subset, candidates, self.mode)


def solve_scale(task: ScaleTask) -> ScaleResult:
    """Critical exponent alpha_N for one cell"""
    root = critical_alpha(task.problem(), tol=task.tol, solver=task.solver)
    logger.debug(f"theta={task.theta} N={task.n}: alpha={root.alpha:.9f} ({root.status.value})")
    return ScaleResult(
        n=task.n,
        alpha=root.alpha,
        solver_status=root.status,
        candidates=root.candidates,
        cover_cardinality=root.cover_cardinality,
    )


def assemble_profile(
    theta: Fraction,
    epsilon: Optional[float],
    scales: Sequence[ScaleResult],
    mode: EvaluationMode = EvaluationMode.SUP_VALUE,
    cap: Optional[int] = None,
) -> PressureProfile:
    ordered = sorted(scales, key=lambda scale: scale.n)
    alphas = [scale.alpha for scale in ordered]
    return PressureProfile(
        theta=float(theta),
        theta_exact=str(theta),
        epsilon=epsilon,
        mode=mode,
        n_lo=ordered[0].n,
        n_hi=ordered[-1].n,
        theta0_cap=cap if theta == 0 else None,
        scales=list(ordered),
        lower=min(alphas),
        upper=max(alphas),
    )


def scale_tasks(
    system: NdsSystem,
    subset: Iterable[int],
    theta: Fraction | float | str,
    n_lo: int,
    n_hi: int,
    epsilon: Optional[float] = None,
    cover: Optional[OpenCover] = None,
    solver: SolverKind = SolverKind.AUTO,
    tol: float = DEFAULT_TOL,
    mode: EvaluationMode = EvaluationMode.SUP_VALUE,
    theta0_cap: Optional[int] = None,
    limit: int = DEFAULT_CANDIDATE_LIMIT,
) -> list[ScaleTask]:
    if not 1 <= n_lo <= n_hi:
        raise ValueError(f"scale window must satisfy 1 <= N_lo <= N_hi, got [{n_lo}, {n_hi}]")
    exact_theta = as_fraction(theta)
    cap = theta0_cap if theta0_cap is not None else THETA0_CAP_FACTOR * n_hi
    universe = frozenset(subset)
    return [
        ScaleTask(
            system=system,
            subset=universe,
            theta=exact_theta,
            n=n,
            epsilon=epsilon,
            cover=cover,
            cap=cap if exact_theta == 0 else None,
            mode=mode,
            solver=solver,
            tol=tol,
            limit=limit,
        )
        for n in range(n_lo, n_hi + 1)
    ]


def pressure_profile(
    system: NdsSystem,
    subset: Iterable[int],
    epsilon: Optional[float],
    theta: Fraction | float | str,
    n_lo: int,
    n_hi: int,
    solver: SolverKind = SolverKind.AUTO,
    tol: float = DEFAULT_TOL,
    mode: EvaluationMode = EvaluationMode.SUP_VALUE,
    cover: Optional[OpenCover] = None,
    theta0_cap: Optional[int] = None,
    limit: int = DEFAULT_CANDIDATE_LIMIT,
) -> PressureProfile:
    """Per-scale critical exponents with liminf/limsup surrogates over [N_lo, N_hi].

    With `cover` given, string candidates over that cover replace Bowen balls and
    `epsilon` is ignored.
    """
    tasks = scale_tasks(
        system, subset, theta, n_lo, n_hi, None if cover is not None else epsilon, cover,
        solver, tol, mode, theta0_cap, limit,
    )
    scales = [solve_scale(task) for task in tasks]
    return assemble_profile(tasks[0].theta, tasks[0].epsilon, scales, mode, tasks[0].cap)


def pesin_pitskel(
    system: NdsSystem,
    subset: Iterable[int],
    epsilon: float,
    n_lo: int,
    n_hi: int,
    cap: Optional[int] = None,
    solver: SolverKind = SolverKind.AUTO,
    tol: float = DEFAULT_TOL,
    mode: EvaluationMode = EvaluationMode.SUP_VALUE,
    strict: bool = True,
) -> PressureProfile:
    """theta = 0 profile; alpha_N is non-decreasing in N because the windows are nested.

    A decrease between two exactly solved scales raises NotMonotone unless strict is False;
    greedy scales only log a warning.
    """
    profile = pressure_profile(system, subset, epsilon, 0, n_lo, n_hi, solver, tol, mode, theta0_cap=cap)
    assert_non_decreasing(profile, tol, strict)
    return profile


def assert_non_decreasing(profile: PressureProfile, tol: float = DEFAULT_TOL, strict: bool = True) -> None:
    for previous, current in zip(profile.scales, profile.scales[1:]):
        if current.alpha >= previous.alpha - tol:
            continue
        message = f"theta=0 exponents decrease at N={current.n}: {previous.alpha:.9f} -> {current.alpha:.9f}"
        exact = previous.solver_status == current.solver_status == SolverStatus.EXACT
        if exact and strict:
            logger.error(message)
            raise NotMonotone(message)
        logger.warning(f"{message} ({current.solver_status.value} solver)")


def capacity_pressures(
    system: NdsSystem,
    subset: Iterable[int],
    n_lo: int,
    n_hi: int,
    epsilon: Optional[float] = None,
    cover: Optional[OpenCover] = None,
    solver: SolverKind = SolverKind.AUTO,
    mode: EvaluationMode = EvaluationMode.SUP_VALUE,
    limit: int = DEFAULT_CANDIDATE_LIMIT,
) -> PressureProfile:
    """Lower/upper capacity pressures as min/max of (1/N) log Lambda, without root finding"""
    tasks = scale_tasks(system, subset, 1, n_lo, n_hi, epsilon, cover, solver, DEFAULT_TOL, mode, None, limit)
    scales = []
    for task in tasks:
        problem = task.problem()
        status = resolve_solver(problem, solver)
        solution = solve_min_cover(problem, 0.0, status)
        scales.append(
            ScaleResult(
                n=task.n,
                alpha=solution.log_value / task.n,
                solver_status=status,
                candidates=len(problem.candidates),
                cover_cardinality=len(solution.chosen),
            )
        )
    return assemble_profile(Fraction(1), epsilon if cover is None else None, scales, mode)


def theta_sweep_cap(thetas: Sequence[Fraction], n_hi: int, requested: Optional[int] = None) -> int:
    """theta = 0 cap large enough to contain every positive-theta window of the grid"""
    cap = requested if requested is not None else THETA0_CAP_FACTOR * n_hi
    for theta in thetas:
        if theta > 0:
            cap = max(cap, max_length(n_hi, theta))
    return cap


def sweep_grid(theta_grid: Sequence[Fraction | float | str]) -> list[Fraction]:
    thetas = [as_fraction(theta) for theta in theta_grid]
    if not thetas:
        raise ValueError("theta grid is empty")
    if any(b <= a for a, b in zip(thetas, thetas[1:])):
        raise ValueError(f"theta grid must be strictly increasing, got {[str(t) for t in thetas]}")
    return thetas


def theta_sweep(
    system: NdsSystem,
    subset: Iterable[int],
    epsilon: Optional[float],
    theta_grid: Sequence[Fraction | float | str],
    n_lo: int,
    n_hi: int,
    solver: SolverKind = SolverKind.AUTO,
    tol: float = DEFAULT_TOL,
    mode: EvaluationMode = EvaluationMode.SUP_VALUE,
    cover: Optional[OpenCover] = None,
    theta0_cap: Optional[int] = None,
    limit: int = DEFAULT_CANDIDATE_LIMIT,
) -> list[PressureProfile]:
    """Profiles in theta order; lower and upper are non-decreasing along an exact sweep"""
    thetas = sweep_grid(theta_grid)
    cap = theta_sweep_cap(thetas, n_hi, theta0_cap)
    universe = frozenset(subset)
    profiles = [
        pressure_profile(system, universe, epsilon, theta, n_lo, n_hi, solver, tol, mode, cover, cap, limit)
        for theta in thetas
    ]
    jump = theta_jumps(profiles)
    if jump is not None:
        logger.info(f"largest upper-surrogate jump between consecutive positive thetas: {jump:.6f}")
    return profiles


def theta_jumps(profiles: Sequence[PressureProfile]) -> Optional[float]:
    """Largest |upper(theta') - upper(theta)| over consecutive positive grid values"""
    positive = [profile for profile in profiles if profile.theta > 0]
    if len(positive) < 2:
        return None
    return max(abs(b.upper - a.upper) for a, b in zip(positive, positive[1:]))


def measured_oscillation(system: NdsSystem, radius: float) -> float:
    """max |phi(x) - phi(y)| over d(x, y) < radius"""
    return system.oscillation(radius)


def profile_statuses(profile: PressureProfile) -> set[SolverStatus]:
    return {scale.solver_status for scale in profile.scales}


@dataclass(frozen=True)
class CoverComparison:
    """String-cover profile against center-value ball profiles at the cover's mesh and twice it"""

    strings: PressureProfile
    balls_at_mesh: PressureProfile
    balls_at_double_mesh: PressureProfile

    @property
    def gap(self) -> float:
        """Upper-surrogate difference between string and ball candidates at the same mesh"""
        return self.strings.upper - self.balls_at_mesh.upper


def compare_string_and_ball(
    system: NdsSystem,
    subset: Iterable[int],
    cover: OpenCover,
    theta: Fraction | float | str,
    n_lo: int,
    n_hi: int,
    solver: SolverKind = SolverKind.AUTO,
    tol: float = DEFAULT_TOL,
) -> CoverComparison:
    if cover.mesh <= 0:
        raise InvalidCover("cover mesh must be positive to pair it with a ball radius")
    universe = frozenset(subset)
    strings = pressure_profile(system, universe, None, theta, n_lo, n_hi, solver, tol, cover=cover)
    at_mesh = pressure_profile(
        system, universe, cover.mesh, theta, n_lo, n_hi, solver, tol, EvaluationMode.CENTER_VALUE
    )
    at_double = pressure_profile(
        system, universe, 2 * cover.mesh, theta, n_lo, n_hi, solver, tol, EvaluationMode.CENTER_VALUE
    )
    return CoverComparison(strings=strings, balls_at_mesh=at_mesh, balls_at_double_mesh=at_double)
