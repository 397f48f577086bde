"""
Minimum-weight set cover over point bitmasks.

Weights are handled in log space: a candidate of length n with Birkhoff value s has
log-weight -alpha * n + s at exponent alpha, and the cost of a cover is the log of the
sum of its weights. Three solvers share the same problem representation:

- exact branch-and-bound with an admissible fractional lower bound and a memo of the
  cheapest partial cost seen for each uncovered set,
- greedy by log-weight per newly covered point (an H(|Z|) approximation),
- exhaustive enumeration of subcollections, used as an oracle on small problems.
"""

import itertools
import logging
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Optional, Sequence

import numpy as np

from thetapress.errors import BracketFailure, Infeasible
from thetapress.models import EvaluationMode, SolverKind, SolverStatus
from thetapress.nds import CoverCandidate

logger = logging.getLogger(__name__)

EXACT_MAX_POINTS = 24
EXACT_MAX_CANDIDATES = 5000
ORACLE_MAX_CANDIDATES = 12
MAX_BRACKET_DOUBLINGS = 60
DEFAULT_TOL = 1e-6


def log_add(a: float, b: float) -> float:
    """log(exp(a) + exp(b)) without overflow"""
    if a == -math.inf:
        return b
    if b == -math.inf:
        return a
    high, low = (a, b) if a >= b else (b, a)
    return high + math.log1p(math.exp(low - high))


def log_sum(values: Sequence[float]) -> float:
    total = -math.inf
    for value in values:
        total = log_add(total, value)
    return total


@dataclass(frozen=True)
class CoverSolution:
    """Cost of a cover (log of the weight sum) and the chosen candidate indices"""

    log_value: float
    chosen: tuple[int, ...]
    status: SolverStatus

    @property
    def value(self) -> float:
        return math.exp(self.log_value) if self.log_value < 709 else math.inf


@dataclass(frozen=True)
class CoverProblem:
    """Universe Z with the candidates meeting it.

    `norm` and `space_size` are the potential's sup norm and the number of points of the
    ambient space; they fix the initial root bracket.
    """

    universe: frozenset[int]
    candidates: tuple[CoverCandidate, ...]
    mode: EvaluationMode = EvaluationMode.SUP_VALUE
    norm: float = 0.0
    space_size: int = 1

    @classmethod
    def build(
        cls,
        universe: frozenset[int] | set[int],
        candidates: Sequence[CoverCandidate],
        mode: EvaluationMode = EvaluationMode.SUP_VALUE,
        norm: float = 0.0,
        space_size: Optional[int] = None,
    ) -> "CoverProblem":
        universe = frozenset(universe)
        kept = tuple(c for c in candidates if c.members & universe)
        size = space_size if space_size is not None else max(len(universe), 1)
        return cls(universe=universe, candidates=kept, mode=mode, norm=norm, space_size=size)

    @cached_property
    def points(self) -> tuple[int, ...]:
        return tuple(sorted(self.universe))

    @cached_property
    def full_mask(self) -> int:
        return (1 << len(self.points)) - 1

    @cached_property
    def masks(self) -> tuple[int, ...]:
        bit = {x: 1 << i for i, x in enumerate(self.points)}
        return tuple(sum(bit[x] for x in c.members if x in bit) for c in self.candidates)

    @cached_property
    def lengths(self) -> np.ndarray:
        return np.array([c.length for c in self.candidates], dtype=np.float64)

    @cached_property
    def values(self) -> np.ndarray:
        return np.array([c.value(self.mode) for c in self.candidates], dtype=np.float64)

    @cached_property
    def missing(self) -> frozenset[int]:
        covered = 0
        for mask in self.masks:
            covered |= mask
        return frozenset(x for i, x in enumerate(self.points) if not covered >> i & 1)

    @property
    def feasible(self) -> bool:
        return not self.missing

    def log_weights(self, alpha: float) -> np.ndarray:
        return -alpha * self.lengths + self.values

    @cached_property
    def _groups(self) -> tuple[tuple[int, ...], list[list[int]]]:
        """Distinct member masks and the candidate indices sharing each"""
        index: dict[int, int] = {}
        groups: list[list[int]] = []
        for i, mask in enumerate(self.masks):
            if mask not in index:
                index[mask] = len(groups)
                groups.append([])
            groups[index[mask]].append(i)
        return tuple(index), groups

    def reduced(self, alpha: float) -> tuple[list[int], list[float], list[int]]:
        """Cheapest candidate per mask at alpha, with dominated masks dropped.

        Returns masks, log-weights and the original candidate index of each survivor.
        """
        weights = self.log_weights(alpha)
        masks, groups = self._groups
        best = [min(group, key=lambda i: (weights[i], i)) for group in groups]
        costs = [float(weights[i]) for i in best]

        order = sorted(range(len(masks)), key=lambda g: (-masks[g].bit_count(), costs[g], g))
        kept: list[int] = []
        for g in order:
            mask, cost = masks[g], costs[g]
            if any(mask & ~masks[h] == 0 and costs[h] <= cost for h in kept):
                continue
            kept.append(g)
        kept.sort()
        return [masks[g] for g in kept], [costs[g] for g in kept], [best[g] for g in kept]


def resolve_solver(problem: CoverProblem, solver: SolverKind) -> SolverStatus:
    match solver:
        case SolverKind.EXACT:
            return SolverStatus.EXACT
        case SolverKind.GREEDY:
            return SolverStatus.GREEDY
        case SolverKind.AUTO:
            if len(problem.universe) <= EXACT_MAX_POINTS and len(problem.candidates) <= EXACT_MAX_CANDIDATES:
                return SolverStatus.EXACT
            logger.warning(
                f"GREEDY fallback: universe of {len(problem.universe)} points with "
                f"{len(problem.candidates)} candidates exceeds exact limits "
                f"({EXACT_MAX_POINTS} points, {EXACT_MAX_CANDIDATES} candidates); values are upper bounds"
            )
            return SolverStatus.GREEDY


def _greedy(masks: list[int], costs: list[float], full: int) -> tuple[float, list[int]]:
    uncovered = full
    total = -math.inf
    chosen: list[int] = []
    while uncovered:
        pick, score = -1, math.inf
        for i, mask in enumerate(masks):
            gain = (mask & uncovered).bit_count()
            if gain == 0:
                continue
            ratio = costs[i] - math.log(gain)
            if ratio < score:
                pick, score = i, ratio
        chosen.append(pick)
        total = log_add(total, costs[pick])
        uncovered &= ~masks[pick]
    return total, chosen


class _BranchAndBound:
    """Exact minimum of log(sum exp(cost)) over covers of `full`"""

    def __init__(self, masks: list[int], costs: list[float], full: int):
        self.masks = masks
        self.costs = costs
        self.full = full
        self.width = full.bit_length()
        self.containing = [[i for i, mask in enumerate(masks) if mask >> u & 1] for u in range(self.width)]
        self.memo: dict[int, float] = {}
        self.best = math.inf
        self.best_choice: list[int] = []
        self.nodes = 0

    def lower_bound(self, uncovered: int) -> float:
        """Each uncovered point pays at least its cheapest share of a covering set"""
        bound = -math.inf
        u = 0
        rest = uncovered
        while rest:
            if rest & 1:
                share = math.inf
                for i in self.containing[u]:
                    share = min(share, self.costs[i] - math.log((self.masks[i] & uncovered).bit_count()))
                bound = log_add(bound, share)
            rest >>= 1
            u += 1
        return bound

    def search(self, uncovered: int, spent: float, chosen: list[int]) -> None:
        self.nodes += 1
        if not uncovered:
            if spent < self.best:
                self.best = spent
                self.best_choice = list(chosen)
            return
        seen = self.memo.get(uncovered)
        if seen is not None and seen <= spent:
            return
        self.memo[uncovered] = spent
        if log_add(spent, self.lower_bound(uncovered)) >= self.best:
            return

        # branch on the uncovered point with the fewest covering candidates
        pivot, options = -1, None
        rest, u = uncovered, 0
        while rest:
            if rest & 1 and (options is None or len(self.containing[u]) < len(options)):
                pivot, options = u, self.containing[u]
            rest >>= 1
            u += 1
        assert options is not None and pivot >= 0

        ranked = sorted(
            options,
            key=lambda i: (self.costs[i] - math.log((self.masks[i] & uncovered).bit_count()), i),
        )
        for i in ranked:
            total = log_add(spent, self.costs[i])
            if total >= self.best:
                continue
            chosen.append(i)
            self.search(uncovered & ~self.masks[i], total, chosen)
            chosen.pop()


def _exact(masks: list[int], costs: list[float], full: int) -> tuple[float, list[int]]:
    incumbent, greedy_choice = _greedy(masks, costs, full)
    solver = _BranchAndBound(masks, costs, full)
    solver.best = incumbent
    solver.best_choice = greedy_choice
    solver.search(full, -math.inf, [])
    logger.debug(f"branch-and-bound visited {solver.nodes} nodes over {len(masks)} candidates")
    return solver.best, solver.best_choice


def solve_min_cover(problem: CoverProblem, alpha: float, status: SolverStatus = SolverStatus.EXACT) -> CoverSolution:
    """Minimum-weight cover of the universe at exponent alpha"""
    if not problem.universe:
        return CoverSolution(log_value=-math.inf, chosen=(), status=status)
    if not problem.feasible:
        raise Infeasible(problem.missing)
    masks, costs, origin = problem.reduced(alpha)
    match status:
        case SolverStatus.EXACT:
            log_value, picked = _exact(masks, costs, problem.full_mask)
        case SolverStatus.GREEDY:
            log_value, picked = _greedy(masks, costs, problem.full_mask)
    return CoverSolution(log_value=log_value, chosen=tuple(sorted(origin[i] for i in picked)), status=status)


def min_weight_cover(problem: CoverProblem, alpha: float, solver: SolverKind = SolverKind.AUTO) -> float:
    """The value M: minimum of sum exp(-alpha * n + s) over covers of the universe"""
    return solve_min_cover(problem, alpha, resolve_solver(problem, solver)).value


def exhaustive_min_cover(problem: CoverProblem, alpha: float) -> float:
    """Enumerate every subcollection; oracle for problems with at most a dozen candidates"""
    count = len(problem.candidates)
    if count > ORACLE_MAX_CANDIDATES:
        raise ValueError(f"exhaustive oracle limited to {ORACLE_MAX_CANDIDATES} candidates, got {count}")
    if not problem.universe:
        return 0.0
    if not problem.feasible:
        raise Infeasible(problem.missing)
    weights = problem.log_weights(alpha)
    best = math.inf
    for size in range(1, count + 1):
        for subset in itertools.combinations(range(count), size):
            covered = 0
            for i in subset:
                covered |= problem.masks[i]
            if covered == problem.full_mask:
                best = min(best, sum(math.exp(weights[i]) for i in subset))
    return best


@dataclass(frozen=True)
class CriticalExponent:
    alpha: float
    status: SolverStatus
    cover_cardinality: int
    candidates: int


def initial_bracket(problem: CoverProblem) -> tuple[float, float]:
    """[-|phi| - log P, |phi| + log P]; log M >= 0 at the left end and <= 0 at the right end"""
    reach = problem.norm + math.log(problem.space_size)
    return -reach, reach


def critical_alpha(
    problem: CoverProblem,
    tol: float = DEFAULT_TOL,
    solver: SolverKind = SolverKind.AUTO,
) -> CriticalExponent:
    """Root of M(alpha) = 1 by bracketing and bisection.

    The bisection sequence depends only on the bracket and on the signs of log M, so two
    problems with pointwise ordered M values yield ordered roots.
    """
    if not problem.universe:
        raise BracketFailure("empty universe: M(alpha) = 0 for every alpha")
    if not problem.feasible:
        logger.error(f"infeasible cover problem, uncovered points {sorted(problem.missing)[:8]}")
        raise Infeasible(problem.missing)

    status = resolve_solver(problem, solver)

    def log_m(alpha: float) -> float:
        return solve_min_cover(problem, alpha, status).log_value

    lo, hi = initial_bracket(problem)
    width = max(hi - lo, 1.0)
    doublings = 0
    while log_m(lo) < 0:
        lo -= width
        width *= 2
        doublings += 1
        if doublings > MAX_BRACKET_DOUBLINGS:
            raise BracketFailure(f"no lower bracket after {MAX_BRACKET_DOUBLINGS} doublings (lo={lo:g})")
    width = max(hi - lo, 1.0)
    doublings = 0
    while log_m(hi) > 0:
        hi += width
        width *= 2
        doublings += 1
        if doublings > MAX_BRACKET_DOUBLINGS:
            raise BracketFailure(f"no upper bracket after {MAX_BRACKET_DOUBLINGS} doublings (hi={hi:g})")

    if lo == hi:
        alpha = lo
    else:
        while hi - lo > tol:
            mid = (lo + hi) / 2
            if log_m(mid) > 0:
                lo = mid
            else:
                hi = mid
        alpha = (lo + hi) / 2

    at_root = solve_min_cover(problem, alpha, status)
    return CriticalExponent(
        alpha=alpha,
        status=status,
        cover_cardinality=len(at_root.chosen),
        candidates=len(problem.candidates),
    )
