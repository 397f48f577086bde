"""
Tests for the log-space set-cover solvers and the critical-exponent search.
"""

import math

import pytest

from thetapress.cover_solver import (
    CoverProblem,
    critical_alpha,
    exhaustive_min_cover,
    log_add,
    log_sum,
    min_weight_cover,
    resolve_solver,
    solve_min_cover,
)
from thetapress.errors import BracketFailure, Infeasible
from thetapress.models import CandidateKind, SolverKind, SolverStatus
from thetapress.nds import CoverCandidate


def ball(members, length=1, value=0.0, center=None) -> CoverCandidate:
    return CoverCandidate(
        kind=CandidateKind.BOWEN_BALL,
        length=length,
        members=frozenset(members),
        sup_birkhoff=value,
        center=center if center is not None else min(members),
        center_birkhoff=value,
    )


def path_problem() -> CoverProblem:
    """Points 0..5 covered by overlapping pairs and a few singletons with distinct weights"""
    candidates = [
        ball({0, 1}, value=0.3),
        ball({1, 2}, value=-0.2),
        ball({2, 3}, value=0.1),
        ball({3, 4}, value=0.0),
        ball({4, 5}, value=0.4),
        ball({0}, value=-1.0),
        ball({5}, value=-0.5),
        ball({2}, length=2, value=0.2),
        ball({0, 1, 2}, length=2, value=0.9),
        ball({3, 4, 5}, length=3, value=0.6),
    ]
    return CoverProblem.build(set(range(6)), candidates, norm=1.0, space_size=6)


class TestLogSpace:
    def test_log_add(self):
        assert log_add(math.log(2), math.log(3)) == pytest.approx(math.log(5))
        assert log_add(-math.inf, 1.5) == 1.5

    def test_log_sum_avoids_overflow(self):
        assert log_sum([1000.0, 1000.0]) == pytest.approx(1000.0 + math.log(2))
        assert log_sum([]) == -math.inf


class TestMinCover:
    """Exact, greedy and enumeration agree where they must"""

    def test_single_set_beats_pieces(self):
        problem = CoverProblem.build({0, 1}, [ball({0, 1}), ball({0}), ball({1})])
        assert min_weight_cover(problem, 0.0, SolverKind.EXACT) == pytest.approx(1.0)

    def test_exact_matches_enumeration(self):
        problem = path_problem()
        for alpha in (-1.0, 0.0, 0.35, 2.0):
            assert min_weight_cover(problem, alpha, SolverKind.EXACT) == pytest.approx(
                exhaustive_min_cover(problem, alpha), rel=1e-9
            )

    def test_greedy_never_below_exact(self):
        problem = path_problem()
        for alpha in (-1.0, 0.0, 0.35, 2.0):
            exact = min_weight_cover(problem, alpha, SolverKind.EXACT)
            assert min_weight_cover(problem, alpha, SolverKind.GREEDY) >= exact * (1 - 1e-12)

    def test_chosen_indices_cover_universe(self):
        problem = path_problem()
        solution = solve_min_cover(problem, 0.5)
        covered = frozenset().union(*(problem.candidates[i].members for i in solution.chosen))
        assert covered == problem.universe
        assert solution.status == SolverStatus.EXACT

    def test_candidates_missing_universe_are_dropped(self):
        problem = CoverProblem.build({0}, [ball({0}), ball({1})])
        assert len(problem.candidates) == 1

    def test_infeasible(self):
        problem = CoverProblem.build({0, 1, 2}, [ball({0, 1})])
        assert problem.missing == frozenset({2})
        with pytest.raises(Infeasible):
            solve_min_cover(problem, 0.0)

    def test_empty_universe(self):
        problem = CoverProblem.build(set(), [ball({0})])
        assert solve_min_cover(problem, 0.0).log_value == -math.inf
        assert exhaustive_min_cover(problem, 0.0) == 0.0

    def test_auto_resolves_to_exact_on_small_problems(self):
        assert resolve_solver(path_problem(), SolverKind.AUTO) == SolverStatus.EXACT

    def test_auto_falls_back_to_greedy(self):
        universe = set(range(30))
        problem = CoverProblem.build(universe, [ball({x}) for x in universe])
        assert resolve_solver(problem, SolverKind.AUTO) == SolverStatus.GREEDY

    def test_oracle_limit(self):
        problem = CoverProblem.build(set(range(13)), [ball({x}) for x in range(13)])
        with pytest.raises(ValueError):
            exhaustive_min_cover(problem, 0.0)


class TestCriticalAlpha:
    """Root of M(alpha) = 1"""

    def test_single_point(self):
        problem = CoverProblem.build({0}, [ball({0}, length=2, value=0.6)], norm=0.3, space_size=1)
        root = critical_alpha(problem, tol=1e-9)
        assert root.alpha == pytest.approx(0.3, abs=1e-8)
        assert root.cover_cardinality == 1

    def test_singletons(self):
        problem = CoverProblem.build(set(range(8)), [ball({x}, length=2) for x in range(8)], space_size=8)
        root = critical_alpha(problem, tol=1e-9)
        assert root.alpha == pytest.approx(math.log(8) / 2, abs=1e-8)
        assert root.cover_cardinality == 8

    def test_root_brackets_sign_change(self):
        problem = path_problem()
        root = critical_alpha(problem, tol=1e-7)
        below = solve_min_cover(problem, root.alpha - 1e-4).log_value
        above = solve_min_cover(problem, root.alpha + 1e-4).log_value
        assert below > 0 > above

    def test_empty_universe_has_no_root(self):
        with pytest.raises(BracketFailure):
            critical_alpha(CoverProblem.build(set(), []))

    def test_infeasible_problem(self):
        with pytest.raises(Infeasible):
            critical_alpha(CoverProblem.build({0, 1}, [ball({0})]))
