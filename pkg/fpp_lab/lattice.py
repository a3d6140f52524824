"""
Geometry of the integer lattice Z^d.

Points are plain tuples of ints so they hash fast and compare
lexicographically. Edges are stored in canonical (base, axis) form: the edge
joins base and base + e_axis. Regions are immutable predicates over points.
"""

import itertools
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterator, List, NamedTuple, Sequence, Tuple, Union

from fpp_lab.errors import InvalidDirectionError

logger = logging.getLogger(__name__)

Point = Tuple[int, ...]
Length = Union[int, float, Fraction]

SUPPORTED_DIMENSIONS = (2, 3, 4)


def check_dimension(d: int) -> int:
    """
    Validate a lattice dimension.

    Args:
        d: Requested dimension

    Returns:
        The dimension, unchanged

    Raises:
        ValueError: If d is not one of 2, 3, 4
    """
    if d not in SUPPORTED_DIMENSIONS:
        raise ValueError(f"dimension must be one of {SUPPORTED_DIMENSIONS}, got {d}")
    return d


def origin(d: int) -> Point:
    return (0,) * d


def unit(d: int, axis: int) -> Point:
    return tuple(1 if i == axis else 0 for i in range(d))


def add(p: Point, q: Point) -> Point:
    return tuple(a + b for a, b in zip(p, q))


def sub(p: Point, q: Point) -> Point:
    return tuple(a - b for a, b in zip(p, q))


def scale(k: int, p: Point) -> Point:
    return tuple(k * a for a in p)


def dot(p: Sequence[int], q: Sequence[int]) -> int:
    return sum(a * b for a, b in zip(p, q))


def l1_norm(p: Sequence[Union[int, float]]) -> Union[int, float]:
    return sum(abs(a) for a in p)


def euclidean_norm(p: Sequence[Union[int, float]]) -> float:
    return math.sqrt(sum(a * a for a in p))


def linf_norm(p: Sequence[Union[int, float]]) -> Union[int, float]:
    return max(abs(a) for a in p)


def l1_distance(p: Point, q: Point) -> int:
    return sum(abs(a - b) for a, b in zip(p, q))


def linf_distance(p: Point, q: Point) -> int:
    return max(abs(a - b) for a, b in zip(p, q))


class LatticeEdge(NamedTuple):
    """Nearest-neighbour edge in canonical form: base -- base + e_axis."""
    base: Point
    axis: int

    @property
    def head(self) -> Point:
        b = self.base
        return b[:self.axis] + (b[self.axis] + 1,) + b[self.axis + 1:]

    def endpoints(self) -> Tuple[Point, Point]:
        return self.base, self.head

    def other(self, p: Point) -> Point:
        """Endpoint opposite to p."""
        if p == self.base:
            return self.head
        if p == self.head:
            return self.base
        raise ValueError(f"{p} is not an endpoint of {self}")


def canonical_edge(p: Point, q: Point) -> LatticeEdge:
    """
    Canonical form of the undirected edge {p, q}.

    Raises:
        ValueError: If p and q are not nearest neighbours
    """
    diff = sub(q, p)
    if l1_norm(diff) != 1:
        raise ValueError(f"{p} and {q} are not nearest neighbours")
    axis = next(i for i, c in enumerate(diff) if c != 0)
    return LatticeEdge(p, axis) if diff[axis] == 1 else LatticeEdge(q, axis)


def neighbors(z: Point) -> List[Tuple[LatticeEdge, Point]]:
    """
    The 2d nearest neighbours of z with their connecting edges.

    Args:
        z: Lattice point

    Returns:
        List of (canonical edge, neighbour) pairs, ordered +e_0, -e_0, +e_1, ...
    """
    out = []
    for axis in range(len(z)):
        head, tail = z[:axis], z[axis + 1:]
        c = z[axis]
        up = head + (c + 1,) + tail
        down = head + (c - 1,) + tail
        out.append((LatticeEdge(z, axis), up))
        out.append((LatticeEdge(down, axis), down))
    return out


def incident_edges(z: Point) -> List[LatticeEdge]:
    return [edge for edge, _ in neighbors(z)]


_STAR_OFFSETS = {
    d: tuple(o for o in itertools.product((-1, 0, 1), repeat=d) if any(o))
    for d in SUPPORTED_DIMENSIONS
}


def star_neighbors(z: Point) -> List[Point]:
    """The 3^d - 1 points at l-infinity distance one from z."""
    return [tuple(a + b for a, b in zip(z, o)) for o in _STAR_OFFSETS[len(z)]]


def l1_sphere_size(d: int, n: int) -> int:
    """Number of points of Z^d with l1 norm exactly n."""
    if n == 0:
        return 1
    return sum(2 ** k * math.comb(d, k) * math.comb(n - 1, k - 1) for k in range(1, d + 1))


def l1_sphere(d: int, n: int) -> Iterator[Point]:
    """Enumerate all points of Z^d with l1 norm exactly n, lexicographically."""
    if d == 1:
        if n == 0:
            yield (0,)
        else:
            yield (-n,)
            yield (n,)
        return
    for first in range(-n, n + 1):
        for rest in l1_sphere(d - 1, n - abs(first)):
            yield (first,) + rest


def canonicalize_direction(z: Point) -> Point:
    """
    Reflect a direction into the first orthant.

    Raises:
        InvalidDirectionError: If z is the zero vector
    """
    if not any(z):
        raise InvalidDirectionError("direction must be nonzero")
    return tuple(abs(c) for c in z)


def check_direction(z: Point) -> Point:
    """
    Require a nonzero first-orthant direction.

    Raises:
        InvalidDirectionError: If z is zero or has a negative coordinate
    """
    check_dimension(len(z))
    if any(c < 0 for c in z):
        raise InvalidDirectionError(f"direction {z} has a negative coordinate")
    if not any(z):
        raise InvalidDirectionError("direction must be nonzero")
    return tuple(z)


# Regions

class Region:
    """Immutable membership predicate over lattice points."""

    def contains(self, p: Point) -> bool:
        raise NotImplementedError

    def __contains__(self, p: Point) -> bool:
        return self.contains(p)

    def describe(self) -> str:
        return type(self).__name__


@dataclass(frozen=True)
class FullLattice(Region):
    def contains(self, p: Point) -> bool:
        return True

    def describe(self) -> str:
        return "full"


@dataclass(frozen=True)
class Box(Region):
    """Axis-parallel box of side 2*radius + 1 (the l-infinity ball); also used as window."""
    center: Point
    radius: int

    def __post_init__(self):
        if self.radius < 0:
            raise ValueError(f"box radius must be nonnegative, got {self.radius}")

    @property
    def dimension(self) -> int:
        return len(self.center)

    def contains(self, p: Point) -> bool:
        r = self.radius
        return all(-r <= a - c <= r for a, c in zip(p, self.center))

    def on_boundary(self, p: Point) -> bool:
        """True for points of the box at l-infinity distance exactly radius from the center."""
        return linf_distance(p, self.center) == self.radius

    def margin(self, p: Point) -> int:
        """Number of unit steps needed to leave the box from p."""
        return self.radius - linf_distance(p, self.center) + 1

    def points(self) -> Iterator[Point]:
        ranges = [range(c - self.radius, c + self.radius + 1) for c in self.center]
        return itertools.product(*ranges)

    def boundary_points(self) -> Iterator[Point]:
        return (p for p in self.points() if self.on_boundary(p))

    def describe(self) -> str:
        return f"box(center={list(self.center)}, radius={self.radius})"


@dataclass(frozen=True)
class L1Ball(Region):
    center: Point
    radius: int

    def contains(self, p: Point) -> bool:
        return l1_distance(p, self.center) <= self.radius

    def describe(self) -> str:
        return f"l1ball(center={list(self.center)}, radius={self.radius})"


@dataclass(frozen=True)
class Cylinder(Region):
    """
    Points within Euclidean distance r of the line R*direction.

    Membership compares |y|^2 |z|^2 - (y.z)^2 <= r^2 |z|^2 in exact rationals.
    """
    direction: Point
    radius: Length
    _bound: Fraction = field(init=False, repr=False, compare=False)
    _z2: int = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not any(self.direction):
            raise InvalidDirectionError("cylinder direction must be nonzero")
        if self.radius < 0:
            raise ValueError(f"cylinder radius must be nonnegative, got {self.radius}")
        z2 = dot(self.direction, self.direction)
        object.__setattr__(self, "_z2", z2)
        object.__setattr__(self, "_bound", Fraction(self.radius) ** 2 * z2)

    def contains(self, p: Point) -> bool:
        yz = dot(p, self.direction)
        return dot(p, p) * self._z2 - yz * yz <= self._bound

    def describe(self) -> str:
        return f"cylinder(direction={list(self.direction)}, radius={self.radius})"


@dataclass(frozen=True)
class Slab(Region):
    """Points whose coordinate sum lies in [low, high]."""
    low: int
    high: int

    def contains(self, p: Point) -> bool:
        return self.low <= sum(p) <= self.high

    def describe(self) -> str:
        return f"slab({self.low}, {self.high})"


@dataclass(frozen=True)
class MuBall(Region):
    """{z : mu(z) <= threshold}."""
    threshold: float
    mu: Callable[[Point], float]

    def contains(self, p: Point) -> bool:
        return self.mu(p) <= self.threshold

    def describe(self) -> str:
        return f"mu-ball({self.threshold})"


@dataclass(frozen=True)
class MuBallComplement(Region):
    """{z : mu(z) > threshold}."""
    threshold: float
    mu: Callable[[Point], float]

    def contains(self, p: Point) -> bool:
        return self.mu(p) > self.threshold

    def describe(self) -> str:
        return f"mu-ball-complement({self.threshold})"


@dataclass(frozen=True)
class Intersection(Region):
    parts: Tuple[Region, ...]

    def contains(self, p: Point) -> bool:
        return all(part.contains(p) for part in self.parts)

    def describe(self) -> str:
        return " & ".join(part.describe() for part in self.parts)


@dataclass(frozen=True)
class Hyperplane:
    """H_n = {z : z_1 + ... + z_d = n}."""
    level: int

    def contains(self, p: Point) -> bool:
        return sum(p) == self.level

    def __contains__(self, p: Point) -> bool:
        return self.contains(p)


def hyperplane_level(p: Point) -> int:
    return sum(p)


# Cylinder cross-sections

def _section_search_radius(d: int, r: Length) -> int:
    # A point of the hyperplane within distance r of the axis sits within
    # (sqrt(d) + 1) * r of the axis point on that hyperplane.
    return math.ceil((math.sqrt(d) + 1) * float(r)) + 1


def cross_section(direction: Point, r: Length, n: int) -> Tuple[Point, ...]:
    """
    V_n(z, r): cylinder points on the hyperplane H_{n*|z|_1}.

    Args:
        direction: First-orthant direction z
        r: Euclidean cylinder radius
        n: Level index

    Returns:
        Sorted tuple of lattice points

    Raises:
        InvalidDirectionError: If direction is zero or has a negative coordinate
    """
    z = check_direction(direction)
    if r < 0:
        raise ValueError(f"radius must be nonnegative, got {r}")
    d = len(z)
    cylinder = Cylinder(z, r)
    center = scale(n, z)
    reach = _section_search_radius(d, r)
    points = []
    for w in itertools.product(range(-reach, reach + 1), repeat=d - 1):
        offset = w + (-sum(w),)
        p = add(center, offset)
        if cylinder.contains(p):
            points.append(p)
    return tuple(sorted(points))


def cross_edges(direction: Point, r: Length, n: int) -> Tuple[LatticeEdge, ...]:
    """
    E_n(z, r): edges from cylinder points on H_{n|z|-1} to cylinder points on H_{n|z|}.

    Raises:
        InvalidDirectionError: If direction is zero or has a negative coordinate
    """
    z = check_direction(direction)
    cylinder = Cylinder(z, r)
    edges = []
    for p in cross_section(z, r, n):
        for axis in range(len(z)):
            q = p[:axis] + (p[axis] - 1,) + p[axis + 1:]
            if cylinder.contains(q):
                edges.append(LatticeEdge(q, axis))
    return tuple(sorted(edges))


def translate_edges(edges: Sequence[LatticeEdge], shift: Point) -> Tuple[LatticeEdge, ...]:
    return tuple(LatticeEdge(add(e.base, shift), e.axis) for e in edges)
