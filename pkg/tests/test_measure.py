"""
Tests for discrete measures and measure pressures.
"""

import numpy as np
import pytest

from thetapress.errors import InvalidMeasure
from thetapress.measure import (
    DiscreteMeasure,
    dirac,
    explicit,
    full_measure_sets,
    geometric,
    measure_family,
    measure_pressure_profile,
    random_measures,
    uniform,
    variational_inf_check,
    variational_sup_check,
)
from thetapress.pressure import pressure_profile


class TestMeasures:
    def test_uniform(self):
        measure = uniform(4, {0, 2})
        assert measure.support == frozenset({0, 2})
        assert measure.mass({0}) == pytest.approx(0.5)

    def test_geometric_takes_residual_on_last_point(self):
        measure = geometric(4, {0, 1, 2})
        assert list(measure.weights) == pytest.approx([0.5, 0.25, 0.25, 0.0])

    def test_dirac(self):
        assert dirac(3, 1).support == frozenset({1})
        with pytest.raises(InvalidMeasure):
            dirac(3, 3)

    def test_weights_must_sum_to_one(self):
        with pytest.raises(InvalidMeasure):
            explicit([0.5, 0.6])

    def test_negative_weights(self):
        with pytest.raises(InvalidMeasure):
            DiscreteMeasure(np.array([1.5, -0.5]))

    def test_random_measures_reproducible(self):
        first = random_measures(6, range(6), 3, seed=11)
        second = random_measures(6, range(6), 3, seed=11)
        assert [m.support for m in first] == [m.support for m in second]
        for a, b in zip(first, second):
            assert np.array_equal(a.weights, b.weights)

    def test_family(self):
        family = measure_family(4, {1, 3}, random_count=2)
        assert [m.name for m in family][:4] == ["dirac:1", "dirac:3", "uniform", "geometric"]
        assert len(family) == 6


class TestMeasurePressure:
    """The measure pressure is the subset pressure of the support"""

    def test_support_profile(self, weighted_doubling8):
        measure = geometric(8, {1, 4, 6})
        profile = measure_pressure_profile(weighted_doubling8, measure, 0.2, "1/2", 2, 3)
        direct = pressure_profile(weighted_doubling8, {1, 4, 6}, 0.2, "1/2", 2, 3)
        assert [s.alpha for s in profile.scales] == [s.alpha for s in direct.scales]

    def test_size_mismatch(self, weighted_doubling8):
        with pytest.raises(InvalidMeasure):
            measure_pressure_profile(weighted_doubling8, uniform(4, range(4)), 0.2, 1, 1, 1)

    def test_full_measure_sets_contain_the_support(self, doubling8):
        measure = dirac(8, 0)
        sets = full_measure_sets(doubling8, measure, samples=4, seed=1)
        assert measure.support in sets
        assert frozenset(range(8)) in sets
        assert all(measure.support <= s for s in sets)

    def test_exhaustive_supersets_when_few_points_free(self, doubling8):
        sets = full_measure_sets(doubling8, uniform(8, range(3, 8)))
        assert len(sets) == 2**3

    def test_inf_check(self, weighted_doubling8):
        detail = variational_inf_check(weighted_doubling8, uniform(8, {0, 5}), 0.2, "1/2", 2, 3, instance="d8")
        assert detail.passed
        assert detail.gap == 0.0

    def test_sup_check(self, weighted_doubling8):
        detail = variational_sup_check(weighted_doubling8, {0, 2, 5}, 0.2, "1/2", 2, 3, instance="d8")
        assert detail.passed
        assert detail.diagnostics["measures"] == 3 + 2 + 3
