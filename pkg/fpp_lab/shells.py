"""
Shells around lattice points.

Vertices are colored by a threshold t̄: white when every incident edge has
weight ≤ t̄, black otherwise. Around a center z the smallest box D_n(z)
touching an "infinite" white cluster (one reaching the window boundary) is
grown by black ⋆-paths; the exterior boundary of that cluster is the shell
S_z, and Δ_z adds the white interior points joined to S_z by white paths.
"""

import json
import logging
from collections import deque
from dataclasses import dataclass
from itertools import product
from typing import Any, Dict, FrozenSet, Iterable, Iterator, List, Optional, Set, Tuple

from fpp_lab.errors import NoWhiteWitnessError, WindowOverflowError
from fpp_lab.lattice import Box, Point, incident_edges, neighbors, star_neighbors
from fpp_lab.paths import TravelTime, travel_time, travel_time_set
from fpp_lab.weights import WeightField, quantile_tbar

logger = logging.getLogger(__name__)

COMPLETE = "complete"
INDETERMINATE = "indeterminate"


class Coloring:
    """
    Black/white vertex coloring of a field at threshold t̄.

    Colors and white components are memoized; one Coloring can be shared by
    every shell built on the same field and window.
    """

    def __init__(self, field: WeightField, tbar: float):
        self.field = field
        self.tbar = tbar
        self._black: Dict[Point, bool] = {}
        self._component: Dict[Point, int] = {}
        self._reaches: List[bool] = []

    def is_black(self, z: Point) -> bool:
        black = self._black.get(z)
        if black is None:
            black = any(self.field.weight(e) > self.tbar for e in incident_edges(z))
            self._black[z] = black
        return black

    def is_white(self, z: Point) -> bool:
        return not self.is_black(z)

    def white_cluster_reaches(self, y: Point, window: Box) -> bool:
        """Whether the white lattice cluster of y (inside window) meets the window boundary."""
        if not window.contains(y) or self.is_black(y):
            return False
        cid = self._component.get(y)
        if cid is None:
            cid = self._flood_white(y, window)
        return self._reaches[cid]

    def _flood_white(self, y: Point, window: Box) -> int:
        cid = len(self._reaches)
        reaches = False
        self._component[y] = cid
        queue = deque([y])
        while queue:
            p = queue.popleft()
            if window.on_boundary(p):
                reaches = True
            for _, q in neighbors(p):
                if q in self._component or not window.contains(q) or self.is_black(q):
                    continue
                self._component[q] = cid
                queue.append(q)
        self._reaches.append(reaches)
        return cid


@dataclass(frozen=True)
class StarCluster:
    """C(A, b) together with whether its flood stayed off the window boundary."""
    points: FrozenSet[Point]
    complete: bool


def black_star_cluster(
    coloring: Coloring,
    A: Iterable[Point],
    window: Box,
    require_complete: bool = False,
) -> StarCluster:
    """
    A together with every black vertex ⋆-connected to a black ℓ∞-neighbor of A.

    Args:
        coloring: Vertex colors
        A: Seed set, inside the window
        window: Flood confinement
        require_complete: Raise instead of returning an indeterminate cluster

    Raises:
        WindowOverflowError: If require_complete and the flood hit the boundary
    """
    seeds = frozenset(A)
    for a in seeds:
        if not window.contains(a):
            raise ValueError(f"seed point {a} lies outside the window")

    flood: Set[Point] = set()
    queue: deque = deque()
    for a in seeds:
        for q in star_neighbors(a):
            if q not in seeds and q not in flood and window.contains(q) and coloring.is_black(q):
                flood.add(q)
                queue.append(q)

    complete = True
    while queue:
        p = queue.popleft()
        if window.on_boundary(p):
            complete = False
        for q in star_neighbors(p):
            if q not in seeds and q not in flood and window.contains(q) and coloring.is_black(q):
                flood.add(q)
                queue.append(q)

    if not complete:
        logger.warning(f"Black cluster of {len(seeds)} seeds reached the window boundary")
        if require_complete:
            raise WindowOverflowError(f"black ⋆-cluster touches the boundary of {window.describe()}")
    return StarCluster(points=seeds | flood, complete=complete)


def _bounding_box(points: Iterable[Point], pad: int) -> Tuple[Point, Point]:
    pts = list(points)
    d = len(pts[0])
    lo = tuple(min(p[i] for p in pts) - pad for i in range(d))
    hi = tuple(max(p[i] for p in pts) + pad for i in range(d))
    return lo, hi


def _in_bounds(p: Point, lo: Point, hi: Point) -> bool:
    return all(l <= c <= h for c, l, h in zip(p, lo, hi))


def _frame(lo: Point, hi: Point) -> Iterator[Point]:
    for p in product(*(range(l, h + 1) for l, h in zip(lo, hi))):
        if any(c == l or c == h for c, l, h in zip(p, lo, hi)):
            yield p


def _outside_component(blocked: FrozenSet[Point], pad: int) -> Tuple[Set[Point], Point, Point]:
    """Points of bbox(blocked)+pad joined to the box frame without crossing blocked."""
    lo, hi = _bounding_box(blocked, pad)
    seen: Set[Point] = set()
    queue: deque = deque()
    for p in _frame(lo, hi):
        if p not in blocked:
            seen.add(p)
            queue.append(p)
    while queue:
        p = queue.popleft()
        for _, q in neighbors(p):
            if q not in seen and q not in blocked and _in_bounds(q, lo, hi):
                seen.add(q)
                queue.append(q)
    return seen, lo, hi


def exterior_boundary(C: Iterable[Point], window: Box) -> FrozenSet[Point]:
    """
    ∂_ext C: ℓ∞-neighbors of C outside C that connect to infinity avoiding C.

    Connection to infinity is decided inside bbox(C) padded by one, whose
    frame lies entirely outside C.

    Raises:
        WindowOverflowError: If C or its ℓ∞-neighborhood reaches the window boundary
    """
    cluster = frozenset(C)
    if not cluster:
        raise ValueError("exterior boundary of an empty set")
    ring: Set[Point] = set()
    for p in cluster:
        for q in star_neighbors(p):
            if q not in cluster:
                ring.add(q)
    for p in cluster | ring:
        if not window.contains(p) or window.on_boundary(p):
            raise WindowOverflowError(f"neighborhood of a {len(cluster)}-point set meets the window boundary")

    outside, _, _ = _outside_component(cluster, 1)
    return frozenset(p for p in ring if p in outside)


def _interior(S: FrozenSet[Point]) -> Set[Point]:
    """Points enclosed by S (not joined to infinity without crossing S), S excluded."""
    outside, lo, hi = _outside_component(S, 1)
    return {
        p for p in product(*(range(l, h + 1) for l, h in zip(lo, hi)))
        if p not in outside and p not in S
    }


def l1_diameter(points: Iterable[Point]) -> int:
    """Largest ℓ1 distance between two points of a finite set (0 for fewer than two)."""
    pts = list(points)
    if len(pts) < 2:
        return 0
    d = len(pts[0])
    best = 0
    for signs in product((1, -1), repeat=d - 1):
        s = (1,) + signs
        values = [sum(a * c for a, c in zip(s, p)) for p in pts]
        best = max(best, max(values) - min(values))
    return best


@dataclass(frozen=True)
class Shell:
    center: Point
    n_of_z: int
    S: FrozenSet[Point]
    delta: FrozenSet[Point]
    diameter: int
    status: str
    tbar: float = 0.0

    @property
    def complete(self) -> bool:
        return self.status == COMPLETE

    def to_dict(self) -> Dict[str, Any]:
        return {
            'center': list(self.center),
            'n_of_z': self.n_of_z,
            'S': [list(p) for p in sorted(self.S)],
            'delta': [list(p) for p in sorted(self.delta)],
            'diameter': self.diameter,
            'status': self.status,
            'tbar': self.tbar,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'Shell':
        status = data['status']
        if status not in (COMPLETE, INDETERMINATE):
            raise ValueError(f"unknown shell status {status!r}")
        return cls(
            center=tuple(data['center']),
            n_of_z=int(data['n_of_z']),
            S=frozenset(tuple(p) for p in data['S']),
            delta=frozenset(tuple(p) for p in data['delta']),
            diameter=int(data['diameter']),
            status=status,
            tbar=float(data.get('tbar', 0.0)),
        )


def shell_to_json(shell: Shell) -> str:
    return json.dumps(shell.to_dict(), sort_keys=True)


def shell_from_json(text: str) -> Shell:
    return Shell.from_dict(json.loads(text))


def find_n_of_z(coloring: Coloring, z: Point, window: Box) -> int:
    """
    min{n ≥ 0 : some y in D_n(z) has a boundary-reaching white cluster}.

    Raises:
        NoWhiteWitnessError: If D_n(z) leaves the window before a witness appears
    """
    n = 0
    while True:
        box = Box(z, n)
        if any(not window.contains(p) or window.on_boundary(p) for p in box.boundary_points()):
            raise NoWhiteWitnessError(f"no white witness around {z} inside {window.describe()}")
        layer = box.boundary_points() if n > 0 else iter((z,))
        if any(coloring.white_cluster_reaches(y, window) for y in layer):
            return n
        n += 1


def build_shell(
    field: WeightField,
    z: Point,
    delta: float,
    window: Box,
    coloring: Optional[Coloring] = None,
) -> Shell:
    """
    Construct S_z and Δ_z.

    Args:
        field: Passage times
        z: Center, well inside the window
        delta: Tail level; t̄ = quantile_tbar(spec, delta)
        window: Finite box standing in for Z^d
        coloring: Shared coloring at the same t̄ (built when omitted)

    Returns:
        Shell; status is indeterminate when the black flood reached the
        window boundary, in which case S and delta are empty

    Raises:
        NoWhiteWitnessError: If no D_n(z) inside the window meets an infinite white cluster
    """
    if not window.contains(z):
        raise ValueError(f"center {z} lies outside the window")
    tbar = quantile_tbar(field.spec, delta)
    if coloring is None:
        coloring = Coloring(field, tbar)
    elif coloring.tbar != tbar:
        raise ValueError(f"coloring threshold {coloring.tbar} differs from t̄={tbar}")

    # 1. Smallest box touching an infinite white cluster
    n = find_n_of_z(coloring, z, window)

    # 2. Grow it by black ⋆-paths
    cluster = black_star_cluster(coloring, Box(z, n).points(), window)
    if not cluster.complete:
        return Shell(z, n, frozenset(), frozenset(), 0, INDETERMINATE, tbar)

    # 3. Exterior boundary
    try:
        S = exterior_boundary(cluster.points, window)
    except WindowOverflowError:
        logger.warning(f"Shell around {z} overflows {window.describe()}")
        return Shell(z, n, frozenset(), frozenset(), 0, INDETERMINATE, tbar)

    # 4. White interior points attached to S
    inside = _interior(S)
    attached: Set[Point] = set(S)
    queue = deque(S)
    while queue:
        p = queue.popleft()
        for _, q in neighbors(p):
            if q not in attached and q in inside and coloring.is_white(q):
                attached.add(q)
                queue.append(q)

    return Shell(
        center=z,
        n_of_z=n,
        S=S,
        delta=frozenset(attached),
        diameter=l1_diameter(S),
        status=COMPLETE,
        tbar=tbar,
    )


@dataclass(frozen=True)
class ShellComparison:
    """
    Terms of the shell comparison

        0 ≤ T(y,z) − T(Δ_y,Δ_z) ≤ T(y,Δ_y) + T(Δ_z,z) + 2d·t̄·(|Δ_y|+|Δ_z|)
    """
    point_time: TravelTime
    set_time: TravelTime
    entry_time: TravelTime
    exit_time: TravelTime
    slack: float

    @property
    def value(self) -> float:
        return self.set_time.value

    @property
    def gap(self) -> float:
        return self.point_time.value - self.set_time.value

    @property
    def holds(self) -> bool:
        return 0.0 <= self.gap <= self.entry_time.value + self.exit_time.value + self.slack

    def to_dict(self) -> Dict[str, Any]:
        return {
            'T_yz': self.point_time.value,
            'T_sets': self.set_time.value,
            'T_entry': self.entry_time.value,
            'T_exit': self.exit_time.value,
            'slack': self.slack,
            'holds': self.holds,
        }


def shell_travel_time(field: WeightField, shell_y: Shell, shell_z: Shell, window: Box) -> ShellComparison:
    """
    T(Δ_y, Δ_z) by a set-to-set sweep, with the other comparison terms.

    Raises:
        WindowTooSmallError, UnreachableError: From the path engine
    """
    for shell in (shell_y, shell_z):
        if not shell.complete:
            raise ValueError(f"shell around {shell.center} is {shell.status}")
    y, z = shell_y.center, shell_z.center
    d = len(y)
    targets_z = shell_z.delta
    return ShellComparison(
        point_time=travel_time(field, y, z, window),
        set_time=travel_time_set(field, shell_y.delta, targets_z.__contains__, window),
        entry_time=travel_time_set(field, [y], shell_y.delta.__contains__, window),
        exit_time=travel_time_set(field, shell_z.delta, lambda p: p == z, window),
        slack=2 * d * shell_y.tbar * (len(shell_y.delta) + len(shell_z.delta)),
    )


def _reaches_avoiding(start: Point, blocked: FrozenSet[Point], window: Box, goal) -> bool:
    if start in blocked:
        return False
    seen = {start}
    queue = deque([start])
    while queue:
        p = queue.popleft()
        if goal(p):
            return True
        for _, q in neighbors(p):
            if q not in seen and q not in blocked and window.contains(q):
                seen.add(q)
                queue.append(q)
    return False


def _lattice_connected(points: FrozenSet[Point]) -> bool:
    if not points:
        return False
    start = min(points)
    seen = {start}
    queue = deque([start])
    while queue:
        p = queue.popleft()
        for _, q in neighbors(p):
            if q in points and q not in seen:
                seen.add(q)
                queue.append(q)
    return len(seen) == len(points)


@dataclass(frozen=True)
class ShellProperties:
    connected: bool
    all_white: bool
    separates: bool
    white_witness: bool

    @property
    def ok(self) -> bool:
        return self.connected and self.all_white and self.separates and self.white_witness


def shell_properties(shell: Shell, coloring: Coloring, window: Box) -> ShellProperties:
    """Structural checks of a complete shell on its coloring."""
    lo, hi = _bounding_box(shell.S, 0) if shell.S else (shell.center, shell.center)

    def escapes(p: Point) -> bool:
        return window.on_boundary(p) or not _in_bounds(p, lo, hi)

    return ShellProperties(
        connected=_lattice_connected(shell.delta),
        all_white=all(coloring.is_white(p) for p in shell.delta),
        separates=not _reaches_avoiding(shell.center, shell.delta, window, escapes),
        white_witness=any(coloring.white_cluster_reaches(p, window) for p in shell.delta),
    )


def shells_separate(shell_y: Shell, shell_z: Shell, window: Box) -> bool:
    """
    For disjoint Δ_y, Δ_z: y cannot reach z avoiding Δ_y, nor z reach y avoiding Δ_z.

    Overlapping shells pass trivially.
    """
    if shell_y.delta & shell_z.delta:
        return True
    y, z = shell_y.center, shell_z.center
    return (
        not _reaches_avoiding(y, shell_y.delta, window, lambda p: p == z)
        and not _reaches_avoiding(z, shell_z.delta, window, lambda p: p == y)
    )
