"""
Tests for systems, Bowen metrics, Birkhoff sums and candidate sets.
"""

import numpy as np
import pytest

from thetapress.errors import InvalidCover, InvalidSystem
from thetapress.models import CandidateKind, EvaluationMode
from thetapress.nds import (
    NdsSystem,
    OpenCover,
    bowen_ball,
    bowen_distance,
    birkhoff_sum,
    circle_metric,
    hamming_metric,
    string_set,
    ultrametric_tree_metric,
)


def alternating_system() -> NdsSystem:
    identity = np.arange(4)
    swap = np.array([1, 0, 3, 2])
    rotate = np.array([1, 2, 3, 0])
    return NdsSystem(
        metric=circle_metric(4),
        prefix=(identity,),
        maps=(swap, rotate),
        potential=np.array([1.0, 0.0, 0.0, 0.0]),
        name="alternating",
    )


class TestValidation:
    """Metric, map and potential invariants"""

    def test_asymmetric_metric_rejected(self):
        metric = np.array([[0.0, 1.0], [2.0, 0.0]])
        with pytest.raises(InvalidSystem):
            NdsSystem(metric=metric, maps=(np.array([0, 1]),), potential=np.zeros(2))

    def test_nonzero_diagonal_rejected(self):
        metric = np.array([[0.5, 1.0], [1.0, 0.0]])
        with pytest.raises(InvalidSystem):
            NdsSystem(metric=metric, maps=(np.array([0, 1]),), potential=np.zeros(2))

    def test_triangle_inequality_enforced(self):
        metric = np.array([[0.0, 1.0, 5.0], [1.0, 0.0, 1.0], [5.0, 1.0, 0.0]])
        with pytest.raises(InvalidSystem):
            NdsSystem(metric=metric, maps=(np.arange(3),), potential=np.zeros(3))

    def test_map_values_in_range(self):
        with pytest.raises(InvalidSystem):
            NdsSystem(metric=circle_metric(3), maps=(np.array([0, 1, 3]),), potential=np.zeros(3))

    def test_missing_maps_rejected(self):
        with pytest.raises(InvalidSystem):
            NdsSystem(metric=circle_metric(3), maps=(), potential=np.zeros(3))

    def test_potential_length(self):
        with pytest.raises(InvalidSystem):
            NdsSystem(metric=circle_metric(3), maps=(np.arange(3),), potential=np.zeros(2))

    def test_arrays_are_frozen(self, doubling8):
        with pytest.raises(ValueError):
            doubling8.metric[0, 1] = 3.0


class TestMapSequence:
    """Eventually periodic indexing, compositions and shifts"""

    def test_map_at_runs_prefix_then_period(self):
        system = alternating_system()
        assert list(system.map_at(1)) == [0, 1, 2, 3]
        assert list(system.map_at(2)) == [1, 0, 3, 2]
        assert list(system.map_at(3)) == [1, 2, 3, 0]
        assert list(system.map_at(4)) == [1, 0, 3, 2]
        assert list(system.map_at(5)) == [1, 2, 3, 0]

    def test_map_at_rejects_zero(self):
        with pytest.raises(ValueError):
            alternating_system().map_at(0)

    def test_compose_doubling(self, doubling8):
        assert int(doubling8.compose(1, 0)[3]) == 3
        assert int(doubling8.compose(1, 2)[1]) == 4
        assert int(doubling8.compose(1, 3)[1]) == 0

    def test_orbit_rows(self):
        system = alternating_system()
        orbit = system.orbit(4)
        assert list(orbit[:, 0]) == [0, 0, 1, 2]

    def test_shift_into_period(self):
        system = alternating_system()
        shifted = system.shifted(3)
        assert shifted.prefix_length == 0
        assert list(shifted.map_at(1)) == list(system.map_at(3))
        assert list(shifted.map_at(2)) == list(system.map_at(4))

    def test_shift_inside_prefix(self):
        system = alternating_system()
        assert system.shifted(1).prefix_length == 1
        assert list(system.shifted(2).map_at(1)) == [1, 0, 3, 2]

    def test_start_indices(self):
        assert list(alternating_system().start_indices()) == [1, 2, 3]

    def test_composition_law(self):
        system = alternating_system()
        for i in range(1, 5):
            for n in range(4):
                for m in range(4):
                    joined = system.compose(i, n + m)
                    stepwise = system.compose(i + n, m)[system.compose(i, n)]
                    assert list(joined) == list(stepwise)


class TestBowenMetric:
    """d_n is the max of d along the first n iterates"""

    def test_n_equals_one_is_the_metric(self, doubling8):
        assert np.array_equal(doubling8.bowen_matrix(1), doubling8.metric)

    def test_doubling_separates_neighbours(self, doubling8):
        assert bowen_distance(doubling8, 0, 1, 1) == pytest.approx(0.125)
        assert bowen_distance(doubling8, 0, 1, 2) == pytest.approx(0.25)
        assert bowen_distance(doubling8, 0, 1, 3) == pytest.approx(0.5)

    def test_non_decreasing_in_n(self, weighted_doubling8):
        for n in range(1, 5):
            assert np.all(weighted_doubling8.bowen_matrix(n) <= weighted_doubling8.bowen_matrix(n + 1))

    def test_shifted_start(self):
        system = alternating_system()
        # from time 2 the first step swaps 0 and 1
        assert float(system.bowen_matrix(2, start=2)[0, 2]) == pytest.approx(0.5)


class TestBirkhoffSums:
    def test_alternating_sums(self):
        system = alternating_system()
        # orbit of 0: 0, 0, 1, 2
        assert birkhoff_sum(system, 0, 1) == 1.0
        assert birkhoff_sum(system, 0, 2) == 2.0
        assert birkhoff_sum(system, 0, 4) == 2.0

    def test_constant_potential(self, fixed_point):
        assert birkhoff_sum(fixed_point, 0, 5) == pytest.approx(1.5)


class TestCandidates:
    def test_bowen_ball_is_strict(self, doubling8):
        ball = bowen_ball(doubling8, 0, 1, 0.125)
        assert ball.members == frozenset({0})
        wider = bowen_ball(doubling8, 0, 1, 0.2)
        assert wider.members == frozenset({7, 0, 1})
        assert wider.kind == CandidateKind.BOWEN_BALL

    def test_ball_weights(self, weighted_doubling8):
        ball = bowen_ball(weighted_doubling8, 2, 1, 0.2)
        assert ball.center_birkhoff == pytest.approx(0.0, abs=1e-12)
        assert ball.sup_birkhoff == pytest.approx(0.5 * np.cos(np.pi / 4))
        assert ball.value(EvaluationMode.CENTER_VALUE) <= ball.value(EvaluationMode.SUP_VALUE)
        assert ball.log_weight(1.0) == pytest.approx(-1.0 + ball.sup_birkhoff)

    def test_radius_must_be_positive(self, doubling8):
        with pytest.raises(ValueError):
            bowen_ball(doubling8, 0, 1, 0.0)

    def test_string_cylinder(self, doubling8):
        halves = OpenCover.build(doubling8, [[0, 1, 2, 3], [4, 5, 6, 7]])
        cylinder = string_set(doubling8, halves, (0, 1))
        # x in the first half with 2x in the second half
        assert cylinder.members == frozenset({2, 3})
        assert cylinder.kind == CandidateKind.STRING

    def test_empty_cylinder(self, doubling8):
        halves = OpenCover.build(doubling8, [[0, 1, 2, 3], [4, 5, 6, 7]])
        cylinder = string_set(doubling8, halves, (1, 1, 1, 1))
        assert cylinder.members == frozenset()


class TestOpenCover:
    def test_must_cover_every_point(self, doubling8):
        with pytest.raises(InvalidCover):
            OpenCover.build(doubling8, [[0, 1, 2]])

    def test_empty_member_rejected(self, doubling8):
        with pytest.raises(InvalidCover):
            OpenCover.build(doubling8, [list(range(8)), []])

    def test_mesh(self, doubling8):
        cover = OpenCover.build(doubling8, [[0, 1, 2, 3], [4, 5, 6, 7]])
        assert cover.mesh == pytest.approx(0.375)
        assert len(cover) == 2


class TestMetricGenerators:
    def test_circle(self):
        metric = circle_metric(4)
        assert metric[0, 1] == pytest.approx(0.25)
        assert metric[0, 2] == pytest.approx(0.5)
        assert metric[0, 3] == pytest.approx(0.25)

    def test_hamming(self):
        metric = hamming_metric(3)
        assert metric[0, 7] == pytest.approx(1.0)
        assert metric[0, 1] == pytest.approx(1 / 3)

    def test_hamming_counts_differing_bits(self):
        metric = hamming_metric(4)
        for x in range(16):
            for y in range(16):
                assert metric[x, y] == pytest.approx((x ^ y).bit_count() / 4)

    def test_hamming_scale(self):
        assert hamming_metric(2, scale=1.0)[0, 3] == pytest.approx(2.0)

    def test_tree_is_ultrametric(self):
        metric = ultrametric_tree_metric(2, 3)
        assert metric[0, 1] == pytest.approx(0.25)
        assert metric[0, 4] == pytest.approx(1.0)
        size = metric.shape[0]
        for x in range(size):
            for y in range(size):
                for z in range(size):
                    assert metric[x, z] <= max(metric[x, y], metric[y, z]) + 1e-12

    def test_oscillation(self, weighted_doubling8):
        assert weighted_doubling8.oscillation(0.1) == 0.0
        assert weighted_doubling8.oscillation(1.0) == pytest.approx(1.0)
