"""
Built-in and seeded random instance batteries for the property suite.
"""

import logging
from typing import Optional

import numpy as np

from thetapress.harness import FactorMap, Instance, relabeled
from thetapress.nds import (
    NdsSystem,
    OpenCover,
    circle_metric,
    euclidean_metric,
    hamming_metric,
    ultrametric_tree_metric,
)

logger = logging.getLogger(__name__)

RANDOM_MAX_POINTS = 12
RANDOM_MAX_PERIOD = 3


def multiplier_map(points: int, factor: int) -> np.ndarray:
    """x -> factor * x mod points on the circle grid"""
    return (factor * np.arange(points)) % points


def doubling_system(points: int, potential: Optional[np.ndarray] = None, name: str = "") -> NdsSystem:
    """Doubling map on equally spaced circle points with the arc-length metric"""
    return NdsSystem(
        metric=circle_metric(points),
        maps=(multiplier_map(points, 2),),
        potential=np.zeros(points) if potential is None else potential,
        name=name or f"doubling-{points}",
    )


def fixed_point_system(value: float = 0.3) -> NdsSystem:
    return NdsSystem(
        metric=np.zeros((1, 1)), maps=(np.zeros(1, dtype=np.int64),), potential=[value], name="fixed-point"
    )


def _doubling_instance() -> Instance:
    points = 8
    potential = 0.5 * np.cos(2 * np.pi * np.arange(points) / points)
    system = doubling_system(points, potential, name="doubling-8")
    target = NdsSystem(
        metric=circle_metric(4),
        maps=(multiplier_map(4, 2),),
        potential=0.5 * np.cos(2 * np.pi * np.arange(4) / 4),
        name="doubling-4",
    )
    collapse = FactorMap(source=system, target=target, pi=np.arange(points) % 4)
    relabel = relabeled(system, np.random.default_rng(7).permutation(points))
    return Instance(
        name=system.name,
        system=system,
        subset=frozenset(system.points),
        epsilon=0.2,
        factors=(collapse, relabel),
        commuting=(multiplier_map(points, 2), multiplier_map(points, 3)),
    )


def _fixed_point_instance() -> Instance:
    system = fixed_point_system()
    identity = FactorMap(source=system, target=system, pi=np.zeros(1, dtype=np.int64))
    return Instance(
        name=system.name,
        system=system,
        subset=frozenset({0}),
        epsilon=0.5,
        factors=(identity,),
        commuting=(np.zeros(1, dtype=np.int64), np.zeros(1, dtype=np.int64)),
    )


def _hamming_instance() -> Instance:
    """Two alternating maps on 3-bit words after one identity step"""
    words = np.arange(8)
    rotate = ((words << 1) | (words >> 2)) & 7
    flip = words ^ 1
    popcount = np.array([int(w).bit_count() for w in words])
    system = NdsSystem(
        metric=hamming_metric(3),
        maps=(rotate, flip),
        prefix=(words,),
        potential=popcount / 3 - 0.5,
        name="hamming-3-alternating",
    )
    relabel = relabeled(system, np.random.default_rng(3).permutation(8))
    return Instance(name=system.name, system=system, subset=frozenset({0, 1, 2, 3, 5}), epsilon=0.5, factors=(relabel,))


def _tree_instance() -> Instance:
    """Shift on the leaves of a binary tree of depth 3, covered by the two depth-one cylinders"""
    branching, depth = 2, 3
    size = branching**depth
    shift = (np.arange(size) * branching) % size
    system = NdsSystem(
        metric=ultrametric_tree_metric(branching, depth),
        maps=(shift,),
        potential=np.linspace(-0.4, 0.6, size),
        name="tree-shift",
    )
    cylinders = [[x for x in range(size) if x // branching ** (depth - 1) == a] for a in range(branching)]
    complement = (size - 1) - np.arange(size)
    return Instance(
        name=system.name,
        system=system,
        subset=frozenset(system.points),
        epsilon=0.3,
        cover=OpenCover.build(system, cylinders),
        commuting=(shift, shift[shift]),
        factors=(relabeled(system, complement),),
    )


def _product_instance() -> Instance:
    """Doubling on 4 circle points times a two-point fiber carried along by the identity"""
    base, fiber = 4, 2
    size = base * fiber
    y, b = np.arange(size) // fiber, np.arange(size) % fiber
    circle = circle_metric(base)
    metric = np.maximum(circle[np.ix_(y, y)], 0.5 * (b[:, None] != b[None, :]))
    target_potential = np.array([0.2, -0.1, 0.4, 0.0])
    target = NdsSystem(metric=circle, maps=(multiplier_map(base, 2),), potential=target_potential, name="doubling-4")
    system = NdsSystem(
        metric=metric,
        maps=(((2 * y) % base) * fiber + b,),
        potential=target_potential[y],
        name="doubling-4-times-2",
    )
    projection = FactorMap(source=system, target=target, pi=y)
    point = fixed_point_system(0.0)
    collapse = FactorMap(source=system, target=point, pi=np.zeros(size, dtype=np.int64))
    return Instance(
        name=system.name,
        system=system,
        subset=frozenset(system.points),
        epsilon=0.3,
        factors=(projection, collapse),
    )


def default_battery() -> list[Instance]:
    """Five built-in systems covering autonomous, nonautonomous, ultrametric and product structure"""
    return [_doubling_instance(), _fixed_point_instance(), _hamming_instance(), _tree_instance(), _product_instance()]


def random_system(
    rng: np.random.Generator, name: str, max_points: int = RANDOM_MAX_POINTS, max_period: int = RANDOM_MAX_PERIOD
) -> NdsSystem:
    """Random points in the unit square, random map tables and a potential with |phi| <= 1"""
    size = int(rng.integers(2, max_points + 1))
    period = int(rng.integers(1, max_period + 1))
    return NdsSystem(
        metric=euclidean_metric(rng.random((size, 2))),
        maps=tuple(rng.integers(0, size, size=size) for _ in range(period)),
        potential=rng.uniform(-1.0, 1.0, size),
        name=name,
    )


def random_battery(
    count: int, seed: int = 0, max_points: int = RANDOM_MAX_POINTS, max_period: int = RANDOM_MAX_PERIOD
) -> list[Instance]:
    """Seeded random systems; the same seed reproduces the same battery"""
    rng = np.random.default_rng(seed)
    battery = []
    for index in range(count):
        system = random_system(rng, f"random-{seed}-{index}", max_points, max_period)
        size = int(rng.integers(1, system.size + 1))
        subset = frozenset(int(x) for x in rng.choice(system.size, size=size, replace=False))
        distances = system.metric[system.metric > 0]
        epsilon = float(np.median(distances)) if distances.size else 0.5
        relabel = relabeled(system, rng.permutation(system.size))
        battery.append(Instance(name=system.name, system=system, subset=subset, epsilon=epsilon, factors=(relabel,)))
    logger.debug(f"built random battery of {count} systems from seed {seed}")
    return battery
