"""
Finite-scale nonautonomous dynamical systems.

A system is a finite metric space (points 0..P-1) with an eventually periodic sequence
of self-maps f_1, f_2, ... and a potential. Orbits, Bowen metrics and Birkhoff sums are
computed from the map tables and cached on the (immutable) system object.

Bowen balls use the strict convention d_n(x, y) < eps; spanning sets in
thetapress.classical use d_n(x, y) <= eps.
"""

import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from thetapress.errors import InvalidCover, InvalidSystem
from thetapress.models import CandidateKind, EvaluationMode

logger = logging.getLogger(__name__)

TRIANGLE_SLACK = 1e-12
TRIANGLE_CHECK_LIMIT = 256


def _freeze(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class NdsSystem:
    """Finite metric space with an eventually periodic map sequence and a potential"""

    metric: np.ndarray
    maps: tuple[np.ndarray, ...]
    potential: np.ndarray
    prefix: tuple[np.ndarray, ...] = ()
    name: str = ""
    check_triangle: bool = True
    _cache: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        metric = np.array(self.metric, dtype=np.float64)
        if metric.ndim != 2 or metric.shape[0] != metric.shape[1] or metric.shape[0] < 1:
            raise InvalidSystem(f"metric must be a non-empty square matrix, got shape {metric.shape}")
        size = metric.shape[0]
        if not np.all(np.isfinite(metric)) or np.any(metric < 0):
            raise InvalidSystem("metric entries must be finite and non-negative")
        if np.any(np.diag(metric) != 0):
            raise InvalidSystem("metric must vanish on the diagonal")
        if not np.array_equal(metric, metric.T):
            raise InvalidSystem("metric must be symmetric")
        if self.check_triangle or size <= TRIANGLE_CHECK_LIMIT:
            for k in range(size):
                via = metric[:, k : k + 1] + metric[k : k + 1, :]
                bad = np.argwhere(metric > via + TRIANGLE_SLACK)
                if bad.size:
                    x, y = (int(v) for v in bad[0])
                    raise InvalidSystem(f"triangle inequality fails for ({x}, {k}, {y})")

        if not self.maps:
            raise InvalidSystem("at least one periodic map is required")
        maps = tuple(self._table(table, size) for table in self.maps)
        prefix = tuple(self._table(table, size) for table in self.prefix)

        potential = np.array(self.potential, dtype=np.float64).reshape(-1)
        if potential.shape != (size,):
            raise InvalidSystem(f"potential must have {size} entries, got {potential.shape[0]}")
        if not np.all(np.isfinite(potential)):
            raise InvalidSystem("potential values must be finite")

        object.__setattr__(self, "metric", _freeze(metric))
        object.__setattr__(self, "maps", maps)
        object.__setattr__(self, "prefix", prefix)
        object.__setattr__(self, "potential", _freeze(potential))

    @staticmethod
    def _table(table: Sequence[int] | np.ndarray, size: int) -> np.ndarray:
        array = np.array(table, dtype=np.int64).reshape(-1)
        if array.shape != (size,):
            raise InvalidSystem(f"map tables must have {size} entries, got {array.shape[0]}")
        if np.any(array < 0) or np.any(array >= size):
            raise InvalidSystem(f"map table values must lie in 0..{size - 1}")
        return _freeze(array)

    @property
    def size(self) -> int:
        return self.metric.shape[0]

    @property
    def period(self) -> int:
        return len(self.maps)

    @property
    def prefix_length(self) -> int:
        return len(self.prefix)

    @property
    def norm(self) -> float:
        """Sup norm of the potential"""
        return float(np.max(np.abs(self.potential)))

    @property
    def diameter(self) -> float:
        return float(self.metric.max())

    @property
    def points(self) -> range:
        return range(self.size)

    def map_at(self, i: int) -> np.ndarray:
        """Table of f_i (1-based time index)"""
        if i < 1:
            raise ValueError(f"map index must be >= 1, got {i}")
        if i <= self.prefix_length:
            return self.prefix[i - 1]
        return self.maps[(i - self.prefix_length - 1) % self.period]

    def start_indices(self) -> range:
        """Starting times covering the prefix and one full period"""
        return range(1, self.prefix_length + self.period + 1)

    def compose(self, i: int, n: int) -> np.ndarray:
        """Table of f_i^n = f_{i+n-1} o ... o f_i"""
        if n < 0:
            raise ValueError(f"number of steps must be >= 0, got {n}")
        return self.orbit(n + 1, start=i)[n]

    def orbit(self, n: int, start: int = 1) -> np.ndarray:
        """Array of shape (n, P) whose row j is the table of f_start^j"""
        key = ("orbit", start)
        rows = self._cache.get(key)
        if rows is None:
            rows = [np.arange(self.size, dtype=np.int64)]
        while len(rows) < n:
            rows.append(self.map_at(start + len(rows) - 1)[rows[-1]])
        self._cache[key] = rows
        return np.stack(rows[:n]) if n > 0 else np.empty((0, self.size), dtype=np.int64)

    def bowen_matrix(self, n: int, start: int = 1) -> np.ndarray:
        """Matrix of d_n(x, y) for the sequence starting at f_start"""
        if n < 1:
            raise ValueError(f"Bowen metric needs n >= 1, got {n}")
        key = ("bowen", start)
        ladder: list[np.ndarray] = self._cache.setdefault(key, [])
        if len(ladder) < n:
            orbit = self.orbit(n, start=start)
            current = ladder[-1] if ladder else None
            for j in range(len(ladder), n):
                row = orbit[j]
                step = self.metric[np.ix_(row, row)]
                current = step if current is None else np.maximum(current, step)
                ladder.append(_freeze(current))
        return ladder[n - 1]

    def birkhoff_sums(self, n: int, start: int = 1) -> np.ndarray:
        """Vector of S_n phi(x) for every point"""
        if n < 1:
            raise ValueError(f"Birkhoff sums need n >= 1, got {n}")
        key = ("birkhoff", start)
        ladder: list[np.ndarray] = self._cache.setdefault(key, [])
        if len(ladder) < n:
            orbit = self.orbit(n, start=start)
            current = ladder[-1] if ladder else np.zeros(self.size)
            for j in range(len(ladder), n):
                current = current + self.potential[orbit[j]]
                ladder.append(_freeze(current))
        return ladder[n - 1]

    def with_potential(self, potential: Sequence[float] | np.ndarray, name: Optional[str] = None) -> "NdsSystem":
        return NdsSystem(
            metric=self.metric,
            maps=self.maps,
            prefix=self.prefix,
            potential=np.asarray(potential, dtype=np.float64),
            name=self.name if name is None else name,
            check_triangle=False,
        )

    def shifted(self, k: int) -> "NdsSystem":
        """The system f_k = {f_i}_{i >= k}"""
        if k < 1:
            raise ValueError(f"shift index must be >= 1, got {k}")
        if k <= self.prefix_length:
            prefix = self.prefix[k - 1 :]
            maps = self.maps
        else:
            offset = (k - self.prefix_length - 1) % self.period
            prefix = ()
            maps = self.maps[offset:] + self.maps[:offset]
        return NdsSystem(
            metric=self.metric,
            maps=maps,
            prefix=prefix,
            potential=self.potential,
            name=f"{self.name}[{k}:]",
            check_triangle=False,
        )

    def image(self, subset: Iterable[int], i: int = 1) -> frozenset[int]:
        table = self.map_at(i)
        return frozenset(int(table[x]) for x in subset)

    def oscillation(self, radius: float) -> float:
        """max |phi(x) - phi(y)| over pairs with d(x, y) < radius"""
        close = self.metric < radius
        spread = np.abs(self.potential[:, None] - self.potential[None, :])
        return float(spread[close].max()) if close.any() else 0.0


@dataclass(frozen=True)
class OpenCover:
    """Finite cover of the point set"""

    sets: tuple[frozenset[int], ...]
    mesh: float

    @classmethod
    def build(cls, system: NdsSystem, sets: Iterable[Iterable[int]]) -> "OpenCover":
        frozen = tuple(frozenset(int(x) for x in members) for members in sets)
        if not frozen:
            raise InvalidCover("open cover must contain at least one set")
        for index, members in enumerate(frozen):
            if not members:
                raise InvalidCover(f"cover set {index} is empty")
            if min(members) < 0 or max(members) >= system.size:
                raise InvalidCover(f"cover set {index} references points outside 0..{system.size - 1}")
        missing = set(system.points) - set().union(*frozen)
        if missing:
            raise InvalidCover(f"cover misses points {sorted(missing)}")
        mesh = max(float(system.metric[np.ix_(sorted(s), sorted(s))].max()) for s in frozen)
        return cls(sets=frozen, mesh=mesh)

    def __len__(self) -> int:
        return len(self.sets)

    def lebesgue_number(self, system: NdsSystem) -> float:
        """Largest r such that every open r-ball lies inside some cover set"""
        best = math.inf
        for x in system.points:
            # radius at which the ball around x stops fitting into any set
            fits = 0.0
            for members in self.sets:
                outside = [system.metric[x, y] for y in system.points if y not in members]
                if x in members:
                    fits = max(fits, min(outside) if outside else math.inf)
            best = min(best, fits)
        return best


@dataclass(frozen=True, slots=True)
class CoverCandidate:
    """A Bowen ball or string cylinder together with its Birkhoff weight data"""

    kind: CandidateKind
    length: int
    members: frozenset[int]
    sup_birkhoff: float
    center: Optional[int] = None
    radius: Optional[float] = None
    string: Optional[tuple[int, ...]] = None
    center_birkhoff: Optional[float] = None

    def value(self, mode: EvaluationMode = EvaluationMode.SUP_VALUE) -> float:
        match mode:
            case EvaluationMode.SUP_VALUE:
                return self.sup_birkhoff
            case EvaluationMode.CENTER_VALUE:
                if self.center_birkhoff is None:
                    raise ValueError("center-value mode needs Bowen-ball candidates")
                return self.center_birkhoff

    def log_weight(self, alpha: float, mode: EvaluationMode = EvaluationMode.SUP_VALUE) -> float:
        return -alpha * self.length + self.value(mode)

    def weight(self, alpha: float, mode: EvaluationMode = EvaluationMode.SUP_VALUE) -> float:
        return math.exp(self.log_weight(alpha, mode))


def compose(system: NdsSystem, start_index: int, steps: int) -> np.ndarray:
    """Function table of f_i^n"""
    return system.compose(start_index, steps)


def bowen_distance(system: NdsSystem, x: int, y: int, n: int) -> float:
    return float(system.bowen_matrix(n)[x, y])


def birkhoff_sum(system: NdsSystem, x: int, n: int) -> float:
    return float(system.birkhoff_sums(n)[x])


def bowen_ball(system: NdsSystem, x: int, n: int, epsilon: float) -> CoverCandidate:
    """The (n, eps)-Bowen ball {y : d_n(x, y) < eps}"""
    if epsilon <= 0:
        raise ValueError(f"radius must be positive, got {epsilon}")
    inside = np.flatnonzero(system.bowen_matrix(n)[x] < epsilon)
    sums = system.birkhoff_sums(n)
    return CoverCandidate(
        kind=CandidateKind.BOWEN_BALL,
        length=n,
        members=frozenset(int(y) for y in inside),
        sup_birkhoff=float(sums[inside].max()),
        center=x,
        radius=epsilon,
        center_birkhoff=float(sums[x]),
    )


def string_members(system: NdsSystem, cover: OpenCover, string: Sequence[int]) -> frozenset[int]:
    orbit = system.orbit(len(string))
    alive = np.ones(system.size, dtype=bool)
    for j, index in enumerate(string):
        allowed = np.zeros(system.size, dtype=bool)
        allowed[list(cover.sets[index])] = True
        alive &= allowed[orbit[j]]
    return frozenset(int(x) for x in np.flatnonzero(alive))


def string_set(system: NdsSystem, cover: OpenCover, string: Sequence[int]) -> CoverCandidate:
    """The cylinder X(U) = {x : f_1^j(x) in U_j for all j < len(U)}; may be empty"""
    if not string:
        raise ValueError("strings must have length >= 1")
    for index in string:
        if not 0 <= index < len(cover):
            raise InvalidCover(f"string index {index} outside cover of size {len(cover)}")
    members = string_members(system, cover, string)
    sums = system.birkhoff_sums(len(string))
    sup = float(max(sums[x] for x in members)) if members else -math.inf
    return CoverCandidate(
        kind=CandidateKind.STRING,
        length=len(string),
        members=members,
        sup_birkhoff=sup,
        string=tuple(string),
    )


# metric generators


def circle_metric(points: int, circumference: float = 1.0) -> np.ndarray:
    """Equally spaced points on a circle, arc-length metric"""
    index = np.arange(points)
    gap = np.abs(index[:, None] - index[None, :])
    return np.minimum(gap, points - gap) * (circumference / points)


def hamming_metric(bits: int, scale: Optional[float] = None) -> np.ndarray:
    """Binary words of the given length, normalized Hamming distance"""
    size = 2**bits
    index = np.arange(size)
    xor = index[:, None] ^ index[None, :]
    counts = np.bitwise_count(xor)
    return counts * (scale if scale is not None else 1.0 / bits)


def ultrametric_tree_metric(branching: int, depth: int, decay: float = 0.5) -> np.ndarray:
    """Leaves of a regular tree; d = decay**(common prefix length) for distinct leaves"""
    if not 0 < decay < 1:
        raise InvalidSystem(f"ultrametric decay must lie in (0, 1), got {decay}")
    leaves = list(itertools.product(range(branching), repeat=depth))
    size = len(leaves)
    metric = np.zeros((size, size))
    for a, b in itertools.combinations(range(size), 2):
        shared = 0
        while leaves[a][shared] == leaves[b][shared]:
            shared += 1
        metric[a, b] = metric[b, a] = decay**shared
    return metric


def euclidean_metric(coordinates: Sequence[Sequence[float]]) -> np.ndarray:
    coords = np.asarray(coordinates, dtype=np.float64)
    diff = coords[:, None, :] - coords[None, :, :]
    metric = np.sqrt((diff**2).sum(axis=-1))
    return (metric + metric.T) / 2
