"""
Classical pressures from spanning and separated sets, and the sup-entropy H(f; Z).

Conventions: (n, eps)-spanning uses d_n(x, y) <= eps with centers anywhere in X;
(n, eps)-separated sets are subsets of Z with pairwise d_n > eps. Bowen balls in
thetapress.pressure use the strict d_n < eps instead.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import networkx as nx
import numpy as np

from thetapress.cover_solver import EXACT_MAX_POINTS, CoverProblem, resolve_solver, solve_min_cover
from thetapress.models import CandidateKind, EvaluationMode, SolverKind, SolverStatus, SpanningResult
from thetapress.nds import CoverCandidate, NdsSystem

logger = logging.getLogger(__name__)


def _spanning_problem(
    distances: np.ndarray,
    universe: frozenset[int],
    centers: Sequence[int],
    log_weights: np.ndarray,
    n: int,
    epsilon: float,
) -> CoverProblem:
    candidates = []
    for x in centers:
        members = frozenset(int(y) for y in np.flatnonzero(distances[x] <= epsilon))
        candidates.append(
            CoverCandidate(
                kind=CandidateKind.BOWEN_BALL,
                length=n,
                members=members,
                sup_birkhoff=float(log_weights[list(members)].max()),
                center=int(x),
                radius=epsilon,
                center_birkhoff=float(log_weights[x]),
            )
        )
    return CoverProblem.build(universe, candidates, mode=EvaluationMode.CENTER_VALUE)


def _minimal_spanning(
    distances: np.ndarray,
    universe: frozenset[int],
    centers: Sequence[int],
    log_weights: np.ndarray,
    n: int,
    epsilon: float,
    solver: SolverKind,
) -> tuple[float, list[int], SolverStatus]:
    """log of the minimal spanning weight, with the witness centers"""
    problem = _spanning_problem(distances, universe, centers, log_weights, n, epsilon)
    status = resolve_solver(problem, solver)
    solution = solve_min_cover(problem, 0.0, status)
    witness = sorted(int(problem.candidates[i].center or 0) for i in solution.chosen)
    return solution.log_value, witness, status


def min_spanning(
    system: NdsSystem,
    subset: Iterable[int],
    n: int,
    epsilon: float,
    weighted: bool = True,
    solver: SolverKind = SolverKind.AUTO,
) -> SpanningResult:
    """Q_n: minimum of sum e^{S_n phi(x)} over (n, eps)-spanning sets of Z (r_n when unweighted)"""
    universe = frozenset(subset)
    if not universe:
        raise ValueError("spanning sets need a nonempty Z")
    log_weights = system.birkhoff_sums(n) if weighted else np.zeros(system.size)
    log_value, witness, status = _minimal_spanning(
        system.bowen_matrix(n), universe, list(system.points), log_weights, n, epsilon, solver
    )
    value = math.exp(log_value)
    return SpanningResult(
        kind="Q",
        n=n,
        epsilon=epsilon,
        value=value if weighted else float(round(value)),
        witness=witness,
        solver_status=status,
    )


def proximity_graph(distances: np.ndarray, points: Sequence[int], epsilon: float) -> nx.Graph:
    """Edges join points that are NOT (n, eps)-separated"""
    graph = nx.Graph()
    graph.add_nodes_from(points)
    for i, x in enumerate(points):
        for y in points[i + 1 :]:
            if distances[x, y] <= epsilon:
                graph.add_edge(x, y)
    return graph


@dataclass
class _IndependentSetSearch:
    """Branch-and-bound for a maximum-weight independent set.

    The bound at each node sums, over a greedy clique cover of the remaining vertices
    (a coloring of the complement graph), the heaviest weight in each clique.
    """

    graph: nx.Graph
    weights: dict[int, float]
    best: float = 0.0
    best_set: list[int] = field(default_factory=list)
    nodes: int = 0

    def clique_bound(self, remaining: list[int]) -> float:
        if not remaining:
            return 0.0
        complement = nx.complement(self.graph.subgraph(remaining))
        coloring = nx.coloring.greedy_color(complement, strategy="largest_first")
        heaviest: dict[int, float] = {}
        for vertex, color in coloring.items():
            heaviest[color] = max(heaviest.get(color, 0.0), self.weights[vertex])
        return sum(heaviest.values())

    def search(self, remaining: list[int], chosen: list[int], total: float) -> None:
        self.nodes += 1
        if total > self.best:
            self.best, self.best_set = total, list(chosen)
        if not remaining or total + self.clique_bound(remaining) <= self.best:
            return
        vertex, rest = remaining[0], remaining[1:]
        blocked = set(self.graph[vertex])
        chosen.append(vertex)
        self.search([v for v in rest if v not in blocked], chosen, total + self.weights[vertex])
        chosen.pop()
        self.search(rest, chosen, total)


def _maximum_separated(
    graph: nx.Graph, weights: dict[int, float], exact: bool
) -> tuple[float, list[int]]:
    order = sorted(graph.nodes, key=lambda v: (-weights[v], v))
    if exact:
        search = _IndependentSetSearch(graph=graph, weights=weights)
        search.search(order, [], 0.0)
        logger.debug(f"independent-set search visited {search.nodes} nodes on {len(order)} vertices")
        return search.best, sorted(search.best_set)
    chosen: list[int] = []
    blocked: set[int] = set()
    for vertex in order:
        if vertex not in blocked:
            chosen.append(vertex)
            blocked |= set(graph[vertex])
    return sum(weights[v] for v in chosen), sorted(chosen)


def max_separated(
    system: NdsSystem,
    subset: Iterable[int],
    n: int,
    epsilon: float,
    weighted: bool = True,
    solver: SolverKind = SolverKind.AUTO,
) -> SpanningResult:
    """P_n: maximum of sum e^{S_n phi(x)} over (n, eps)-separated subsets of Z (s_n when unweighted)"""
    points = sorted(set(subset))
    if not points:
        raise ValueError("separated sets need a nonempty Z")
    sums = system.birkhoff_sums(n) if weighted else np.zeros(system.size)
    shift = float(max(sums[x] for x in points))
    weights = {x: math.exp(float(sums[x]) - shift) for x in points}
    graph = proximity_graph(system.bowen_matrix(n), points, epsilon)

    match solver:
        case SolverKind.EXACT:
            exact = True
        case SolverKind.GREEDY:
            exact = False
        case _:
            exact = len(points) <= EXACT_MAX_POINTS
            if not exact:
                logger.warning(f"GREEDY fallback for separated sets on {len(points)} points (n={n}, eps={epsilon})")
    total, witness = _maximum_separated(graph, weights, exact)
    value = math.exp(math.log(total) + shift)
    return SpanningResult(
        kind="P",
        n=n,
        epsilon=epsilon,
        value=value if weighted else float(round(value)),
        witness=witness,
        solver_status=SolverStatus.EXACT if exact else SolverStatus.GREEDY,
    )


@dataclass(frozen=True)
class ClassicalReport:
    """Spanning and separated cells over an (eps, n) grid"""

    cells: tuple[SpanningResult, ...]

    def surrogate(self, kind: str, epsilon: float) -> float:
        """limsup surrogate: max over the n window of (1/n) log value"""
        values = [cell.log_value_over_n for cell in self.cells if cell.kind == kind and cell.epsilon == epsilon]
        if not values:
            raise KeyError(f"no {kind} cells at eps={epsilon}")
        return max(values)

    @property
    def epsilons(self) -> list[float]:
        return sorted({cell.epsilon for cell in self.cells}, reverse=True)


def classical_pressure(
    system: NdsSystem,
    subset: Iterable[int],
    epsilon_ladder: Sequence[float],
    n_window: Sequence[int],
    weighted: bool = True,
    solver: SolverKind = SolverKind.AUTO,
) -> ClassicalReport:
    """(1/n) log Q_n and (1/n) log P_n per cell; unweighted gives the entropy specialization"""
    if not epsilon_ladder or not n_window:
        raise ValueError("classical pressure needs a nonempty eps ladder and n window")
    universe = frozenset(subset)
    cells: list[SpanningResult] = []
    for epsilon in epsilon_ladder:
        for n in n_window:
            cells.append(min_spanning(system, universe, n, epsilon, weighted, solver))
            cells.append(max_separated(system, universe, n, epsilon, weighted, solver))
    return ClassicalReport(cells=tuple(cells))


def sup_bowen_matrix(system: NdsSystem, n: int) -> np.ndarray:
    """d_n*(x, y): the worst Bowen distance over starting times 1..r+q"""
    matrices = [system.bowen_matrix(n, start=i) for i in system.start_indices()]
    return np.maximum.reduce(matrices)


def sup_spanning_number(system: NdsSystem, subset: Iterable[int], n: int, epsilon: float) -> SpanningResult:
    """r_n*: minimal (n, eps)*-spanning set of Z chosen inside Z"""
    universe = frozenset(subset)
    if not universe:
        raise ValueError("sup-entropy needs a nonempty Z")
    log_value, witness, status = _minimal_spanning(
        sup_bowen_matrix(system, n), universe, sorted(universe), np.zeros(system.size), n, epsilon, SolverKind.AUTO
    )
    return SpanningResult(
        kind="sup", n=n, epsilon=epsilon, value=float(round(math.exp(log_value))), witness=witness,
        solver_status=status,
    )


@dataclass(frozen=True)
class SupEntropy:
    value: float
    cells: tuple[SpanningResult, ...]


def sup_entropy(
    system: NdsSystem,
    subset: Iterable[int],
    epsilon_ladder: Sequence[float],
    n_window: Sequence[int],
) -> SupEntropy:
    """max over the ladder and window of (1/n) log r_n*; the smallest eps dominates"""
    universe = frozenset(subset)
    cells = tuple(sup_spanning_number(system, universe, n, eps) for eps in epsilon_ladder for n in n_window)
    return SupEntropy(value=max(cell.log_value_over_n for cell in cells), cells=cells)


def spanning_matches(
    system: NdsSystem, subset: Iterable[int], result: SpanningResult, distances: Optional[np.ndarray] = None
) -> bool:
    """Whether the witness of a Q result really (n, eps)-spans Z"""
    matrix = distances if distances is not None else system.bowen_matrix(result.n)
    return all(any(matrix[x, y] <= result.epsilon for x in result.witness) for y in subset)
