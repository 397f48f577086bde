"""
Measure-theoretic theta-intermediate pressures over finite mu-covers.

On a finite space a family of balls has full mu-measure exactly when it covers the
support of mu, so the measure pressure is the subset pressure of the support.
"""

import itertools
import logging
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Optional, Sequence

import numpy as np

from thetapress.cover_solver import DEFAULT_TOL
from thetapress.errors import InvalidMeasure
from thetapress.models import CheckDetail, EvaluationMode, PressureProfile, SolverKind
from thetapress.nds import NdsSystem
from thetapress.pressure import pressure_profile

logger = logging.getLogger(__name__)

WEIGHT_TOLERANCE = 1e-12
EXHAUSTIVE_FREE_POINTS = 6
DEFAULT_SUPERSET_SAMPLES = 8


@dataclass(frozen=True, eq=False)
class DiscreteMeasure:
    """Probability weights on the points 0..P-1"""

    weights: np.ndarray
    name: str = ""

    def __post_init__(self) -> None:
        weights = np.array(self.weights, dtype=np.float64).reshape(-1)
        if weights.size == 0:
            raise InvalidMeasure("a measure needs at least one point")
        if not np.all(np.isfinite(weights)) or np.any(weights < 0):
            raise InvalidMeasure("measure weights must be finite and non-negative")
        total = float(weights.sum())
        if abs(total - 1.0) > WEIGHT_TOLERANCE:
            raise InvalidMeasure(f"measure weights must sum to 1, got {total!r}")
        weights.setflags(write=False)
        object.__setattr__(self, "weights", weights)

    @property
    def size(self) -> int:
        return self.weights.shape[0]

    @property
    def support(self) -> frozenset[int]:
        return frozenset(int(x) for x in np.flatnonzero(self.weights > 0))

    def mass(self, subset: Iterable[int]) -> float:
        return float(sum(self.weights[x] for x in set(subset)))


def dirac(size: int, point: int) -> DiscreteMeasure:
    if not 0 <= point < size:
        raise InvalidMeasure(f"Dirac point {point} outside 0..{size - 1}")
    weights = np.zeros(size)
    weights[point] = 1.0
    return DiscreteMeasure(weights, name=f"dirac:{point}")


def uniform(size: int, subset: Iterable[int]) -> DiscreteMeasure:
    points = sorted(set(subset))
    if not points:
        raise InvalidMeasure("uniform measure needs a nonempty set")
    weights = np.zeros(size)
    weights[points] = 1.0 / len(points)
    # absorb rounding so the weights sum to one
    weights[points[-1]] += 1.0 - weights.sum()
    return DiscreteMeasure(weights, name="uniform")


def geometric(size: int, subset: Iterable[int]) -> DiscreteMeasure:
    """mu(y_i) = 2^-i over the index enumeration y_1 < y_2 < ... of Z; the last point takes the residual"""
    points = sorted(set(subset))
    if not points:
        raise InvalidMeasure("geometric measure needs a nonempty set")
    weights = np.zeros(size)
    for i, point in enumerate(points, start=1):
        weights[point] = 2.0**-i
    weights[points[-1]] += 2.0 ** -len(points)
    return DiscreteMeasure(weights, name="geometric")


def explicit(weights: Sequence[float], name: str = "explicit") -> DiscreteMeasure:
    return DiscreteMeasure(np.asarray(weights, dtype=np.float64), name=name)


def random_measures(size: int, subset: Iterable[int], count: int, seed: int = 0) -> list[DiscreteMeasure]:
    """Dirichlet(1, ..., 1) weights on random nonempty subsets of Z"""
    points = sorted(set(subset))
    if not points:
        raise InvalidMeasure("random measures need a nonempty set")
    rng = np.random.default_rng(seed)
    measures = []
    for index in range(count):
        support_size = int(rng.integers(1, len(points) + 1))
        support = sorted(int(x) for x in rng.choice(points, size=support_size, replace=False))
        masses = rng.dirichlet(np.ones(support_size))
        weights = np.zeros(size)
        weights[support] = masses
        weights[support[-1]] += 1.0 - weights.sum()
        measures.append(DiscreteMeasure(weights, name=f"random:{index}"))
    return measures


def measure_pressure_profile(
    system: NdsSystem,
    measure: DiscreteMeasure,
    epsilon: float,
    theta: Fraction | float | str,
    n_lo: int,
    n_hi: int,
    solver: SolverKind = SolverKind.AUTO,
    tol: float = DEFAULT_TOL,
    mode: EvaluationMode = EvaluationMode.SUP_VALUE,
    theta0_cap: Optional[int] = None,
) -> PressureProfile:
    """Profile of the lower/upper measure pressures; the universe is the support of mu"""
    if measure.size != system.size:
        raise InvalidMeasure(f"measure has {measure.size} points, system has {system.size}")
    return pressure_profile(
        system, measure.support, epsilon, theta, n_lo, n_hi, solver, tol, mode, theta0_cap=theta0_cap
    )


@dataclass
class _ProfileCache:
    """Subset profiles shared between measures with the same support"""

    system: NdsSystem
    epsilon: float
    theta: Fraction | float | str
    n_lo: int
    n_hi: int
    solver: SolverKind
    tol: float

    def __post_init__(self) -> None:
        self.profiles: dict[frozenset[int], PressureProfile] = {}

    def get(self, subset: frozenset[int]) -> PressureProfile:
        if subset not in self.profiles:
            self.profiles[subset] = pressure_profile(
                self.system, subset, self.epsilon, self.theta, self.n_lo, self.n_hi, self.solver, self.tol
            )
        return self.profiles[subset]


def _scalewise_le(left: PressureProfile, right: PressureProfile) -> bool:
    return all(a.alpha <= b.alpha for a, b in zip(left.scales, right.scales))


def full_measure_sets(
    system: NdsSystem, measure: DiscreteMeasure, samples: int = DEFAULT_SUPERSET_SAMPLES, seed: int = 0
) -> list[frozenset[int]]:
    """Supersets of the support: all of them when few points are free, a seeded sample otherwise"""
    support = measure.support
    free = [x for x in system.points if x not in support]
    if len(free) <= EXHAUSTIVE_FREE_POINTS:
        return [
            support | frozenset(extra)
            for size in range(len(free) + 1)
            for extra in itertools.combinations(free, size)
        ]
    rng = np.random.default_rng(seed)
    chosen = {support, frozenset(system.points)}
    while len(chosen) < samples + 2:
        picks = rng.random(len(free)) < 0.5
        chosen.add(support | frozenset(x for x, keep in zip(free, picks) if keep))
    return sorted(chosen, key=lambda s: (len(s), sorted(s)))


def variational_inf_check(
    system: NdsSystem,
    measure: DiscreteMeasure,
    epsilon: float,
    theta: Fraction | float | str,
    n_lo: int,
    n_hi: int,
    tol: float = DEFAULT_TOL,
    solver: SolverKind = SolverKind.AUTO,
    samples: int = DEFAULT_SUPERSET_SAMPLES,
    seed: int = 0,
    instance: str = "",
) -> CheckDetail:
    """P_mu against the infimum of P(Z) over full-measure sets Z"""
    cache = _ProfileCache(system, epsilon, theta, n_lo, n_hi, solver, tol)
    own = cache.get(measure.support)
    candidates = full_measure_sets(system, measure, samples, seed)
    profiles = [cache.get(subset) for subset in candidates]
    best_upper = min(profile.upper for profile in profiles)
    best_lower = min(profile.lower for profile in profiles)
    gap = max(abs(own.upper - best_upper), abs(own.lower - best_lower))
    ordered = all(_scalewise_le(own, profile) for profile in profiles)
    passed = gap <= 2 * tol and ordered
    if not passed:
        logger.warning(f"inf variational check failed for {measure.name} on {instance}: gap={gap:.3g}")
    return CheckDetail(
        instance=instance or measure.name,
        passed=passed,
        gap=gap,
        slack=2 * tol,
        message="" if ordered else "a full-measure set has a smaller exponent than the support",
        diagnostics={"full_measure_sets": len(candidates), "support_size": len(measure.support)},
    )


def measure_family(size: int, subset: Iterable[int], random_count: int = 3, seed: int = 0) -> list[DiscreteMeasure]:
    """Diracs on Z, uniform on Z, the geometric measure and seeded random measures"""
    points = sorted(set(subset))
    family = [dirac(size, x) for x in points]
    family.append(uniform(size, points))
    family.append(geometric(size, points))
    family.extend(random_measures(size, points, random_count, seed))
    return family


def variational_sup_check(
    system: NdsSystem,
    subset: Iterable[int],
    epsilon: float,
    theta: Fraction | float | str,
    n_lo: int,
    n_hi: int,
    tol: float = DEFAULT_TOL,
    solver: SolverKind = SolverKind.AUTO,
    random_count: int = 3,
    seed: int = 0,
    instance: str = "",
) -> CheckDetail:
    """P(Z) against the supremum of P_mu over measures with mu(Z) = 1"""
    universe = frozenset(subset)
    if not universe:
        raise ValueError("variational check needs a nonempty Z")
    cache = _ProfileCache(system, epsilon, theta, n_lo, n_hi, solver, tol)
    target = cache.get(universe)
    family = measure_family(system.size, universe, random_count, seed)
    values = {measure.name: cache.get(measure.support).upper for measure in family}
    excess = max(values.values()) - target.upper
    attained = abs(values["uniform"] - target.upper)
    below = all(_scalewise_le(cache.get(measure.support), target) for measure in family)
    passed = excess <= 2 * tol and attained <= 2 * tol and below
    if not passed:
        logger.warning(f"sup variational check failed on {instance}: excess={excess:.3g}, attained gap={attained:.3g}")
    return CheckDetail(
        instance=instance,
        passed=passed,
        gap=max(excess, attained),
        slack=2 * tol,
        diagnostics={
            "measures": len(family),
            "pressure": target.upper,
            "best_measure": max(values, key=values.__getitem__),
        },
    )
