"""
Shortest-path engine over the implicit weighted lattice.

All travel times come from one best-first sweep (Sweep) that settles points
in lexicographic (distance, coordinates) order, materializing edge weights
on demand. A sweep is confined to region & window; results computed in a
finite window carry a Certificate saying whether they are provably equal to
the infinite-lattice value (window-exact) or only an upper bound.
"""

import heapq
import logging
import math
from dataclasses import dataclass
from enum import Enum
from types import MappingProxyType
from typing import Callable, Dict, Iterable, Iterator, List, Mapping, Optional, Sequence, Tuple, Union

from fpp_lab.errors import EmptyTargetError, UnreachableError, WindowTooSmallError
from fpp_lab.lattice import Box, FullLattice, LatticeEdge, Point, Region
from fpp_lab.weights import WeightField

logger = logging.getLogger(__name__)

Target = Union[Region, Callable[[Point], bool]]

FULL_LATTICE = FullLattice()


class Certificate(Enum):
    """How a windowed quantity relates to its infinite-lattice counterpart."""
    WINDOW_EXACT = "window-exact"
    UPPER_BOUND = "upper-bound"
    CENSORED = "censored"


@dataclass(frozen=True)
class TravelTime:
    value: float
    certificate: Certificate

    @property
    def exact(self) -> bool:
        return self.certificate is Certificate.WINDOW_EXACT


class Sweep:
    """
    Multi-source best-first settling inside region & window.

    Iterating yields (point, distance) pairs in nondecreasing distance,
    ties broken by coordinates. Distances are left folds of edge weights
    along the settling tree, so a geodesic's weight sum reproduces its
    distance bit for bit.
    """

    def __init__(
        self,
        field: WeightField,
        sources: Iterable[Point],
        window: Box,
        region: Optional[Region] = None,
    ):
        self.field = field
        self.window = window
        self.region = region if region is not None else FULL_LATTICE
        self.sources: Tuple[Point, ...] = tuple(sorted(set(sources)))
        if not self.sources:
            raise ValueError("sweep needs at least one source")
        for s in self.sources:
            if not window.contains(s):
                raise ValueError(f"source {s} lies outside the window")
            if not self.region.contains(s):
                raise ValueError(f"source {s} lies outside the region")

        self.settled: Dict[Point, float] = {}
        self.parents: Dict[Point, Tuple[Point, LatticeEdge]] = {}
        self.boundary_min = math.inf
        self.settled_up_to = -math.inf
        self.exhausted = False

        self._best: Dict[Point, float] = {s: 0.0 for s in self.sources}
        self._heap: List[Tuple[float, Point]] = [(0.0, s) for s in self.sources]
        heapq.heapify(self._heap)
        self._lo = tuple(c - window.radius for c in window.center)
        self._hi = tuple(c + window.radius for c in window.center)
        self._in_region = None if isinstance(self.region, FullLattice) else self.region.contains

    @property
    def boundary_touched(self) -> bool:
        return self.boundary_min < math.inf

    def __iter__(self) -> Iterator[Tuple[Point, float]]:
        return self.settle()

    def settle(self, limit: float = math.inf) -> Iterator[Tuple[Point, float]]:
        """
        Settle points with distance <= limit.

        Args:
            limit: Stop before settling anything farther than this

        Yields:
            (point, distance) in settling order
        """
        heap = self._heap
        best = self._best
        settled = self.settled
        parents = self.parents
        weight = self.field.weight
        in_region = self._in_region
        lo, hi = self._lo, self._hi
        dim = len(lo)

        while heap:
            if heap[0][0] > limit:
                return
            d, p = heapq.heappop(heap)
            if p in settled or d > best[p]:
                continue
            settled[p] = d
            self.settled_up_to = d
            if d < self.boundary_min and any(p[i] == lo[i] or p[i] == hi[i] for i in range(dim)):
                self.boundary_min = d
            yield p, d

            for axis in range(dim):
                c = p[axis]
                head, tail = p[:axis], p[axis + 1:]
                if c < hi[axis]:
                    q = head + (c + 1,) + tail
                    if q not in settled and (in_region is None or in_region(q)):
                        nd = d + weight(LatticeEdge(p, axis))
                        if nd < best.get(q, math.inf):
                            best[q] = nd
                            parents[q] = (p, LatticeEdge(p, axis))
                            heapq.heappush(heap, (nd, q))
                if c > lo[axis]:
                    q = head + (c - 1,) + tail
                    if q not in settled and (in_region is None or in_region(q)):
                        edge = LatticeEdge(q, axis)
                        nd = d + weight(edge)
                        if nd < best.get(q, math.inf):
                            best[q] = nd
                            parents[q] = (p, edge)
                            heapq.heappush(heap, (nd, q))
        self.exhausted = True

    def run(self, limit: float = math.inf) -> 'Sweep':
        for _ in self.settle(limit):
            pass
        return self

    def source_margin(self) -> int:
        return min(self.window.margin(s) for s in self.sources)

    def certify(self, value: float, target_margin: int = 0) -> Certificate:
        """
        Certificate for a value found by this sweep.

        Exact when every settled window-boundary point is at least `value`
        away (a path leaving the window costs at least that much), or when the
        support infimum is positive and leaving the window needs more steps
        than value / min_weight.
        """
        if self.boundary_min >= value:
            return Certificate.WINDOW_EXACT
        w_min = self.field.min_weight
        if w_min > 0 and value <= (self.source_margin() + target_margin) * w_min:
            return Certificate.WINDOW_EXACT
        return Certificate.UPPER_BOUND

    def path_to(self, z: Point) -> Tuple[LatticeEdge, ...]:
        """Edges of the settling-tree path from the sources to z, in order."""
        if z not in self.settled:
            raise UnreachableError(f"{z} was not settled by this sweep")
        edges: List[LatticeEdge] = []
        p = z
        while p in self.parents:
            prev, edge = self.parents[p]
            edges.append(edge)
            p = prev
        edges.reverse()
        return tuple(edges)

    def failure(self, what: str) -> Exception:
        """Error to raise when the target was not found before exhaustion."""
        if self.boundary_touched:
            return WindowTooSmallError(f"{what}: no path inside {self.window.describe()}")
        return UnreachableError(f"{what}: region {self.region.describe()} disconnects it")


@dataclass(frozen=True)
class TravelTimeMap:
    """Settled distances of one sweep; immutable once returned."""
    sources: Tuple[Point, ...]
    region: Region
    window: Box
    distances: Mapping[Point, float]
    parents: Mapping[Point, Tuple[Point, LatticeEdge]]
    settled_up_to: float
    boundary_touched: bool
    boundary_min: float
    min_weight: float

    def __contains__(self, p: Point) -> bool:
        return p in self.distances

    def __getitem__(self, p: Point) -> float:
        return self.distances[p]

    def certificate(self, z: Point) -> Certificate:
        """Certificate of the distance to a settled point."""
        value = self.distances[z]
        if self.boundary_min >= value:
            return Certificate.WINDOW_EXACT
        margin = min(self.window.margin(s) for s in self.sources) + self.window.margin(z)
        if self.min_weight > 0 and value <= margin * self.min_weight:
            return Certificate.WINDOW_EXACT
        return Certificate.UPPER_BOUND

    def path_to(self, z: Point) -> Tuple[LatticeEdge, ...]:
        if z not in self.distances:
            raise UnreachableError(f"{z} was not settled by this sweep")
        edges: List[LatticeEdge] = []
        p = z
        while p in self.parents:
            prev, edge = self.parents[p]
            edges.append(edge)
            p = prev
        edges.reverse()
        return tuple(edges)


def sweep(
    field: WeightField,
    sources: Iterable[Point],
    window: Box,
    region: Optional[Region] = None,
    t_max: float = math.inf,
) -> TravelTimeMap:
    """
    Settle everything reachable within region & window up to time t_max.

    Args:
        field: Passage times
        sources: Starting points (distance 0)
        window: Finite box confining the sweep
        region: Optional path restriction
        t_max: Largest distance to settle

    Returns:
        TravelTimeMap of all settled points
    """
    s = Sweep(field, sources, window, region).run(t_max)
    logger.debug(f"Sweep settled {len(s.settled)} points up to {s.settled_up_to}")
    return TravelTimeMap(
        sources=s.sources,
        region=s.region,
        window=window,
        distances=MappingProxyType(dict(s.settled)),
        parents=MappingProxyType(dict(s.parents)),
        settled_up_to=min(t_max, s.settled_up_to) if not s.exhausted else math.inf,
        boundary_touched=s.boundary_touched,
        boundary_min=s.boundary_min,
        min_weight=field.min_weight,
    )


def _check_endpoint(p: Point, region: Region, window: Box, name: str) -> None:
    if not window.contains(p):
        raise ValueError(f"{name} {p} lies outside the window")
    if not region.contains(p):
        raise ValueError(f"{name} {p} lies outside the region")


def travel_time(
    field: WeightField,
    y: Point,
    z: Point,
    window: Box,
    region: Optional[Region] = None,
) -> TravelTime:
    """
    T(y, z) over paths inside region & window.

    Raises:
        UnreachableError: If the region disconnects y from z
        WindowTooSmallError: If the window cuts every path (censored)
    """
    region = region if region is not None else FULL_LATTICE
    _check_endpoint(y, region, window, "start")
    _check_endpoint(z, region, window, "end")
    if y == z:
        return TravelTime(0.0, Certificate.WINDOW_EXACT)

    s = Sweep(field, (y,), window, region)
    for p, d in s.settle():
        if p == z:
            return TravelTime(d, s.certify(d, window.margin(z)))
    raise s.failure(f"T({y}, {z})")


def _as_predicate(targets: Target) -> Callable[[Point], bool]:
    if isinstance(targets, Region):
        return targets.contains
    return targets


def travel_time_set(
    field: WeightField,
    sources: Iterable[Point],
    targets: Target,
    window: Box,
    region: Optional[Region] = None,
) -> TravelTime:
    """
    min over sources s and target points t of T(s, t), by one multi-source sweep.

    Raises:
        EmptyTargetError: If no window point satisfies the target predicate
        UnreachableError, WindowTooSmallError: As travel_time
    """
    is_target = _as_predicate(targets)
    s = Sweep(field, sources, window, region)
    for p, d in s.settle():
        if is_target(p):
            return TravelTime(d, s.certify(d))
    if not any(is_target(p) for p in window.points()):
        raise EmptyTargetError("no window point satisfies the target predicate")
    raise s.failure("set-to-set travel time")


@dataclass(frozen=True)
class BallSnapshot:
    """B_t = {z : T(0, z) <= t} within the window."""
    t: float
    members: frozenset


@dataclass(frozen=True)
class BallGrowth:
    """Event sequence (z, T(0, z)) in nondecreasing T up to t_max."""
    events: Tuple[Tuple[Point, float], ...]
    t_max: float
    boundary_touched: bool

    def snapshot(self, t: float) -> BallSnapshot:
        return ball_at(self.events, t)

    def times(self) -> Dict[Point, float]:
        return dict(self.events)


def ball_at(events: Sequence[Tuple[Point, float]], t: float) -> BallSnapshot:
    return BallSnapshot(t=t, members=frozenset(p for p, d in events if d <= t))


def grow_ball(
    field: WeightField,
    t_max: float,
    window: Box,
    center: Optional[Point] = None,
) -> BallGrowth:
    """
    Grow B_t from the center (default origin) up to t_max.

    boundary_touched records whether a window-boundary point entered the ball,
    in which case later snapshots may miss points reached from outside.
    """
    if t_max < 0:
        raise ValueError(f"t_max must be nonnegative, got {t_max}")
    center = center if center is not None else window.center
    s = Sweep(field, (center,), window)
    events = tuple(s.settle(t_max))
    logger.debug(f"Ball grown to t={t_max}: {len(events)} points")
    return BallGrowth(events=events, t_max=t_max, boundary_touched=s.boundary_touched)


def geodesic(
    field: WeightField,
    y: Point,
    z: Point,
    window: Box,
    region: Optional[Region] = None,
) -> Tuple[LatticeEdge, ...]:
    """
    A minimal path from y to z (edges in order from y).

    Raises:
        UnreachableError, WindowTooSmallError: As travel_time
    """
    region = region if region is not None else FULL_LATTICE
    _check_endpoint(y, region, window, "start")
    _check_endpoint(z, region, window, "end")
    s = Sweep(field, (y,), window, region)
    for p, _ in s.settle():
        if p == z:
            return s.path_to(z)
    raise s.failure(f"geodesic {y} -> {z}")


def path_weight(field: WeightField, edges: Sequence[LatticeEdge]) -> float:
    """Left-to-right sum of edge weights."""
    total = 0.0
    for e in edges:
        total += field.weight(e)
    return total
