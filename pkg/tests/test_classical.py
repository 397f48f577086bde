"""
Tests for spanning/separated pressures and the sup-entropy.
"""

import math

import numpy as np
import pytest

from thetapress.classical import (
    classical_pressure,
    max_separated,
    min_spanning,
    proximity_graph,
    spanning_matches,
    sup_bowen_matrix,
    sup_entropy,
    sup_spanning_number,
)
from thetapress.models import SolverKind, SolverStatus
from thetapress.nds import NdsSystem, circle_metric


class TestSpanning:
    """r_n and Q_n with closed Bowen balls"""

    def test_closed_balls_on_the_circle(self, doubling8):
        result = min_spanning(doubling8, range(8), 1, 0.125, weighted=False)
        assert result.value == 3.0
        assert result.solver_status == SolverStatus.EXACT
        assert spanning_matches(doubling8, range(8), result)

    def test_small_radius_needs_every_point(self, doubling8):
        assert min_spanning(doubling8, range(8), 1, 0.1, weighted=False).value == 8.0

    def test_weighted_with_zero_potential_counts(self, doubling8):
        result = min_spanning(doubling8, range(8), 1, 0.125)
        assert result.value == pytest.approx(3.0)
        assert result.log_value_over_n == pytest.approx(math.log(3))

    def test_empty_subset(self, doubling8):
        with pytest.raises(ValueError):
            min_spanning(doubling8, [], 1, 0.1)


class TestSeparated:
    """s_n and P_n with d_n > eps"""

    def test_no_two_neighbours(self, doubling8):
        result = max_separated(doubling8, range(8), 1, 0.125, weighted=False)
        assert result.value == 4.0
        witness = result.witness
        assert all(doubling8.metric[x, y] > 0.125 for i, x in enumerate(witness) for y in witness[i + 1 :])

    def test_greedy_not_above_exact(self, weighted_doubling8):
        exact = max_separated(weighted_doubling8, range(8), 1, 0.2, solver=SolverKind.EXACT)
        greedy = max_separated(weighted_doubling8, range(8), 1, 0.2, solver=SolverKind.GREEDY)
        assert greedy.value <= exact.value * (1 + 1e-12)
        assert greedy.solver_status == SolverStatus.GREEDY

    def test_spanning_below_separated(self, weighted_doubling8):
        for n in (1, 2, 3):
            for eps in (0.2, 0.125):
                q = min_spanning(weighted_doubling8, range(8), n, eps)
                p = max_separated(weighted_doubling8, range(8), n, eps)
                assert q.value <= p.value * (1 + 1e-12)

    def test_proximity_graph(self):
        distances = circle_metric(4)
        graph = proximity_graph(distances, [0, 1, 2, 3], 0.25)
        assert graph.has_edge(0, 1)
        assert not graph.has_edge(0, 2)


class TestClassicalReport:
    def test_grid_shape(self, doubling8):
        report = classical_pressure(doubling8, range(8), [0.2, 0.1], [1, 2], weighted=False)
        assert len(report.cells) == 8
        assert report.epsilons == [0.2, 0.1]
        assert report.surrogate("Q", 0.1) == pytest.approx(math.log(8))

    def test_missing_cells(self, doubling8):
        report = classical_pressure(doubling8, range(8), [0.2], [1])
        with pytest.raises(KeyError):
            report.surrogate("Q", 0.5)

    def test_needs_grid(self, doubling8):
        with pytest.raises(ValueError):
            classical_pressure(doubling8, range(8), [], [1])


class TestSupEntropy:
    def test_autonomous_system_matches_spanning(self, doubling8):
        assert np.array_equal(sup_bowen_matrix(doubling8, 2), doubling8.bowen_matrix(2))
        assert sup_spanning_number(doubling8, range(8), 1, 0.125).value == 3.0

    def test_worst_start_dominates(self):
        collapse = np.zeros(4, dtype=np.int64)
        double = (2 * np.arange(4)) % 4
        system = NdsSystem(metric=circle_metric(4), maps=(collapse, double), potential=np.zeros(4))
        # from time 1 the collapse hides the pair; from time 2 doubling pulls it apart
        assert float(system.bowen_matrix(2)[0, 1]) == pytest.approx(0.25)
        assert float(system.bowen_matrix(2, start=2)[0, 1]) == pytest.approx(0.5)
        assert float(sup_bowen_matrix(system, 2)[0, 1]) == pytest.approx(0.5)

    def test_value_is_the_largest_cell(self, doubling8):
        entropy = sup_entropy(doubling8, range(8), [0.125], [1, 2])
        assert len(entropy.cells) == 2
        assert entropy.value == pytest.approx(math.log(3))
