"""
Deviation estimators around the time constant.

Builds a reference μ (exact for deterministic weights, otherwise a Monte
Carlo fan of directions extended by homogeneity), then measures how travel
times stray from it: tail probabilities below and above μ, the deviation
sets Z_ε and T_ε of a single realization, nested partial sums whose trend
tracks complete convergence, and point-to-shape ratios.

Every replica-level computation is a pure function of (spec, master_seed,
replica index); the `mapper` argument lets the runner farm replicas out to
a worker pool without changing any result.
"""

import logging
import math
from dataclasses import dataclass
from typing import Any, Callable, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from fpp_lab.errors import (
    EmptyFanError,
    InsufficientDataError,
    MuDegenerateError,
    MuTooUncertainError,
)
from fpp_lab.lattice import (
    Box,
    MuBallComplement,
    Point,
    check_dimension,
    l1_norm,
    l1_sphere,
    linf_norm,
    origin,
    scale,
)
from fpp_lab.paths import Certificate, Sweep, TravelTime, sweep, travel_time, travel_time_set
from fpp_lab.stats import (
    FitResult,
    MeanCI,
    StatBlock,
    TrendResult,
    increment_trend,
    log_linear_fit,
    log_log_fit,
    mean_interval,
)
from fpp_lab.weights import DistributionSpec, WeightField, derive_seed, y_survival

logger = logging.getLogger(__name__)

EXACT = "exact"
ESTIMATED = "estimated"

MIN_REPLICAS = 30
MU_DEGENERATE_TOLERANCE = 1e-9

Mapper = Callable[..., Iterable[Any]]


# Sampling helpers

def _replicate(fn: Callable[[int], Any], replicas: int, mapper: Mapper = map) -> List[Any]:
    return list(mapper(fn, range(replicas)))


def _columns(values: np.ndarray) -> Tuple[Tuple[float, ...], ...]:
    """Replica-by-column array as per-column tuples of Python floats."""
    return tuple(tuple(float(v) for v in values[:, j]) for j in range(values.shape[1]))


def _origin_window(targets: Sequence[Point], pad: Optional[int] = None) -> Box:
    """Origin-centered box holding every target with room for wandering geodesics."""
    reach = max(linf_norm(t) for t in targets)
    if pad is None:
        pad = max(4, max(l1_norm(t) for t in targets) // 2)
    return Box(origin(len(targets[0])), reach + pad)


def times_from_origin(field: WeightField, targets: Sequence[Point], window: Box) -> Dict[Point, TravelTime]:
    """
    T(0, t) for every target by one sweep that stops once all are settled.

    Raises:
        WindowTooSmallError, UnreachableError: If a target is never settled
    """
    remaining = set(targets)
    found: Dict[Point, TravelTime] = {}
    s = Sweep(field, (window.center,), window)
    for p, d in s.settle():
        if p in remaining:
            found[p] = TravelTime(d, s.certify(d, window.margin(p)))
            remaining.discard(p)
            if not remaining:
                return found
    raise s.failure(f"{len(remaining)} targets")


# Time-constant reference

@dataclass(frozen=True)
class MuPoint:
    """μ̂(z) from T(0, n z)/n at each n of a grid; the estimate is the largest n."""
    direction: Point
    n_grid: Tuple[int, ...]
    per_n: Tuple[MeanCI, ...]
    exactness: str
    certified_fraction: float = 1.0
    samples: Tuple[Tuple[float, ...], ...] = ()

    @property
    def value(self) -> MeanCI:
        return self.per_n[-1]

    @property
    def blocks(self) -> Tuple[StatBlock, ...]:
        """Mergeable mean blocks of T(0, n z)/n, one per n."""
        return tuple(StatBlock.from_values(s) for s in self.samples)

    @property
    def mu_hat(self) -> float:
        return self.value.mean

    def to_dict(self) -> Dict[str, Any]:
        return {
            'direction': list(self.direction),
            'n_grid': list(self.n_grid),
            'per_n': [ci.to_dict() for ci in self.per_n],
            'mu_hat': self.mu_hat,
            'exactness': self.exactness,
            'certified_fraction': self.certified_fraction,
        }


def _exact_ci(value: float, n: int) -> MeanCI:
    return MeanCI(mean=value, lower=value, upper=value, sd=0.0, n=n)


def estimate_mu(
    spec: DistributionSpec,
    z: Point,
    n_grid: Sequence[int],
    replicas: int,
    master_seed: int = 0,
    confidence: float = 0.95,
    mapper: Mapper = map,
) -> MuPoint:
    """
    Estimate μ(z) as the replica mean of T(0, n z)/n at the largest n.

    Deterministic(c) is answered exactly with c|z|.

    Raises:
        ValueError: For z = 0 or an empty or unsorted n_grid
        InsufficientDataError: With fewer than 30 replicas
    """
    z = tuple(z)
    d = check_dimension(len(z))
    if l1_norm(z) == 0:
        raise ValueError("the time constant needs a nonzero direction")
    ns = tuple(n_grid)
    if not ns or any(n < 1 for n in ns) or list(ns) != sorted(set(ns)):
        raise ValueError(f"n_grid must be increasing positive integers, got {list(ns)}")

    if spec.is_deterministic:
        value = float(spec.c * l1_norm(z))
        constant = tuple((value,) * max(replicas, 1) for _ in ns)
        return MuPoint(z, ns, tuple(_exact_ci(value, replicas) for _ in ns), EXACT, samples=constant)
    if replicas < MIN_REPLICAS:
        raise InsufficientDataError(f"need at least {MIN_REPLICAS} replicas, got {replicas}")

    targets = [scale(n, z) for n in ns]
    window = _origin_window(targets)

    def one(k: int) -> Tuple[List[float], int]:
        field = WeightField(derive_seed(master_seed, k, "mu"), spec, d)
        times = times_from_origin(field, targets, window)
        return [times[t].value / n for t, n in zip(targets, ns)], sum(times[t].exact for t in targets)

    rows = _replicate(one, replicas, mapper)
    values = np.array([r[0] for r in rows])
    certified = sum(r[1] for r in rows)
    per_n = tuple(mean_interval(values[:, j], confidence) for j in range(len(ns)))
    logger.info(f"mu({list(z)}) ~ {per_n[-1].mean:.5f} from {replicas} replicas at n={ns[-1]}")
    return MuPoint(
        z, ns, per_n, ESTIMATED, certified / (replicas * len(ns)),
        samples=_columns(values),
    )


@dataclass(frozen=True)
class FanEntry:
    """μ̂(y)/|y| for one canonical direction y (nonnegative, sorted descending)."""
    direction: Point
    value: float
    half_width: float

    def to_dict(self) -> Dict[str, Any]:
        return {'direction': list(self.direction), 'value': self.value, 'half_width': self.half_width}


def _canonical_unit(x: Sequence[float]) -> Tuple[float, ...]:
    """|x| sorted descending and scaled to unit ℓ1 norm."""
    norm = l1_norm(x)
    return tuple(sorted((abs(c) / norm for c in x), reverse=True))


@dataclass(frozen=True)
class MuEstimate:
    """
    Reference time constant over a fan of directions with |y| = N.

    The fan lists sorted nonnegative directions only; coordinate permutations
    and sign flips map every other direction onto it.
    """
    dimension: int
    fan_norm: int
    entries: Tuple[FanEntry, ...]
    exactness: str

    def __post_init__(self):
        if not self.entries:
            raise EmptyFanError("a time-constant estimate needs at least one direction")

    @property
    def mu_lower(self) -> float:
        return min(e.value for e in self.entries)

    @property
    def mu_upper(self) -> float:
        return max(e.value for e in self.entries)

    @property
    def max_half_width(self) -> float:
        """Largest per-unit-norm CI half-width over the fan (0 when exact)."""
        return max(e.half_width for e in self.entries)

    @property
    def exact(self) -> bool:
        return self.exactness == EXACT

    def nearest(self, x: Sequence[float]) -> Tuple[FanEntry, float]:
        """Fan entry closest to x/|x| in ℓ1, and that distance."""
        u = _canonical_unit(x)
        best: Optional[Tuple[FanEntry, float]] = None
        for entry in self.entries:
            n = self.fan_norm
            dist = sum(abs(a - b / n) for a, b in zip(u, entry.direction))
            if best is None or dist < best[1]:
                best = (entry, dist)
        assert best is not None
        return best

    def mu(self, x: Sequence[float]) -> float:
        return extend_mu(self, x)

    def __call__(self, x: Sequence[float]) -> float:
        return extend_mu(self, x)

    def lookup_error(self, x: Sequence[float]) -> float:
        """Lipschitz bound μ(e1)·|u − y/N|·|x| on the nearest-direction error."""
        if l1_norm(x) == 0:
            return 0.0
        _, dist = self.nearest(x)
        return self.mu_upper * dist * l1_norm(x)

    def check_precision(self, z_norm: float, epsilon: float) -> None:
        """
        Refuse a noisy reference: the CI width at |z| must stay within ε|z|/4.

        Raises:
            MuTooUncertainError: If the reference is too wide
        """
        if self.exact:
            return
        width = 2.0 * self.max_half_width * z_norm
        if not math.isfinite(width) or width > epsilon * z_norm / 4.0:
            raise MuTooUncertainError(
                f"mu CI width {width:.4g} exceeds eps*|z|/4 = {epsilon * z_norm / 4.0:.4g}"
            )

    def to_dict(self) -> Dict[str, Any]:
        return {
            'dimension': self.dimension,
            'fan_norm': self.fan_norm,
            'entries': [e.to_dict() for e in self.entries],
            'exactness': self.exactness,
            'mu_lower': self.mu_lower,
            'mu_upper': self.mu_upper,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> 'MuEstimate':
        return cls(
            dimension=int(data['dimension']),
            fan_norm=int(data['fan_norm']),
            entries=tuple(
                FanEntry(tuple(e['direction']), float(e['value']), float(e['half_width']))
                for e in data['entries']
            ),
            exactness=data['exactness'],
        )

    @classmethod
    def exact_deterministic(cls, spec: DistributionSpec, d: int) -> 'MuEstimate':
        """μ(x) = c|x| for constant weights c."""
        if not spec.is_deterministic:
            raise ValueError(f"exact reference needs deterministic weights, got {spec.kind}")
        return cls(d, 1, (FanEntry(tuple([1] + [0] * (d - 1)), float(spec.c), 0.0),), EXACT)

    @classmethod
    def from_point(cls, point: MuPoint) -> 'MuEstimate':
        """Single-direction reference built from one estimate_mu result."""
        d = len(point.direction)
        norm = l1_norm(point.direction)
        canonical = tuple(sorted((abs(c) for c in point.direction), reverse=True))
        half = point.value.half_width / norm if point.exactness == ESTIMATED else 0.0
        return cls(d, norm, (FanEntry(canonical, point.mu_hat / norm, half),), point.exactness)


def fan_directions(d: int, N: int) -> Tuple[Point, ...]:
    """Nonnegative lattice directions with |y| = N and coordinates sorted descending."""
    if N < 1:
        raise ValueError(f"fan norm must be positive, got {N}")
    return tuple(sorted(
        p for p in l1_sphere(check_dimension(d), N)
        if all(c >= 0 for c in p) and list(p) == sorted(p, reverse=True)
    ))


def estimate_mu_fan(
    spec: DistributionSpec,
    d: int,
    N: int,
    n: int,
    replicas: int,
    master_seed: int = 0,
    confidence: float = 0.95,
    mapper: Mapper = map,
) -> MuEstimate:
    """
    MuEstimate over the fan |y| = N from T(0, n y)/(n N), all fan targets
    sharing one sweep per replica.

    Raises:
        InsufficientDataError: With fewer than 30 replicas (non-deterministic weights)
    """
    directions = fan_directions(d, N)
    if spec.is_deterministic:
        entries = tuple(FanEntry(y, float(spec.c), 0.0) for y in directions)
        return MuEstimate(d, N, entries, EXACT)
    if replicas < MIN_REPLICAS:
        raise InsufficientDataError(f"need at least {MIN_REPLICAS} replicas, got {replicas}")
    if n < 1:
        raise ValueError(f"n must be positive, got {n}")

    targets = [scale(n, y) for y in directions]
    window = _origin_window(targets)

    def one(k: int) -> List[float]:
        field = WeightField(derive_seed(master_seed, k, "mu"), spec, d)
        times = times_from_origin(field, targets, window)
        return [times[t].value / (n * N) for t in targets]

    values = np.array(_replicate(one, replicas, mapper))
    entries = []
    for j, y in enumerate(directions):
        ci = mean_interval(values[:, j], confidence)
        entries.append(FanEntry(y, ci.mean, ci.half_width))
    logger.info(f"Estimated mu over {len(directions)} fan directions (N={N}, n={n}, replicas={replicas})")
    return MuEstimate(d, N, tuple(entries), ESTIMATED)


def extend_mu(estimate: MuEstimate, x: Sequence[float]) -> float:
    """
    Positive-homogeneous extension: |x| times the fan value nearest x/|x|.

    Raises:
        EmptyFanError: If the estimate has no directions
    """
    if not estimate.entries:
        raise EmptyFanError("no fan directions to interpolate from")
    norm = l1_norm(x)
    if norm == 0:
        return 0.0
    entry, _ = estimate.nearest(x)
    return entry.value * norm


# Tails

BELOW = "below"
ABOVE = "above"
Y_CURVE_SCALES = (1, 2, 4)


@dataclass(frozen=True)
class TailSummary:
    side: str
    direction: Point
    epsilon: float
    mu: float
    x_grid: Tuple[float, ...]
    blocks: Tuple[StatBlock, ...]
    fit: Optional[FitResult]
    y_curves: Mapping[int, Tuple[float, ...]]
    dominance: Tuple[StatBlock, ...]
    certified: int

    @property
    def counts(self) -> Tuple[int, ...]:
        return tuple(b.k for b in self.blocks)

    @property
    def probabilities(self) -> Tuple[float, ...]:
        return tuple(b.estimate for b in self.blocks)

    def intervals(self, confidence: float = 0.95) -> Tuple[Tuple[float, float], ...]:
        return tuple(b.interval(confidence) for b in self.blocks)


def _tail_samples(
    spec: DistributionSpec, z: Point, replicas: int, master_seed: int, mapper: Mapper,
) -> Tuple[np.ndarray, int]:
    d = len(z)
    window = _origin_window([z])

    def one(k: int) -> TravelTime:
        field = WeightField(derive_seed(master_seed, k, "tails"), spec, d)
        return times_from_origin(field, [z], window)[z]

    results = _replicate(one, replicas, mapper)
    return np.array([r.value for r in results]), sum(r.exact for r in results)


def _check_tail_args(z: Point, epsilon: float, x_grid: Sequence[float], replicas: int) -> float:
    norm = l1_norm(z)
    if norm == 0:
        raise ValueError("tail estimates need a nonzero z")
    if epsilon <= 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    if replicas < 1:
        raise ValueError(f"replicas must be positive, got {replicas}")
    if not x_grid:
        raise ValueError("x_grid is empty")
    return norm


def tail_below(
    spec: DistributionSpec,
    z: Point,
    epsilon: float,
    x_grid: Sequence[float],
    replicas: int,
    mu_ref: MuEstimate,
    master_seed: int = 0,
    mapper: Mapper = map,
) -> TailSummary:
    """
    P̂(T(0,z) − μ(z) < −εx) for each x >= |z|, with a log-linear fit.

    Raises:
        ValueError: For x below |z|
        MuTooUncertainError: If the reference is too noisy at |z|
    """
    norm = _check_tail_args(z, epsilon, x_grid, replicas)
    if any(x < norm for x in x_grid):
        raise ValueError(f"lower-tail grid must start at |z| = {norm}")
    mu_ref.check_precision(norm, epsilon)
    mu_z = mu_ref.mu(z)
    times, certified = _tail_samples(spec, z, replicas, master_seed, mapper)
    deviation = times - mu_z
    blocks = tuple(StatBlock.from_indicators(deviation < -epsilon * x) for x in x_grid)
    return TailSummary(
        side=BELOW, direction=tuple(z), epsilon=epsilon, mu=mu_z, x_grid=tuple(float(x) for x in x_grid),
        blocks=blocks, fit=log_linear_fit(x_grid, [b.estimate for b in blocks]),
        y_curves={}, dominance=(), certified=certified,
    )


def tail_above(
    spec: DistributionSpec,
    z: Point,
    epsilon: float,
    x_grid: Sequence[float],
    replicas: int,
    mu_ref: MuEstimate,
    master_seed: int = 0,
    mapper: Mapper = map,
) -> TailSummary:
    """
    P̂(T(0,z) − μ(z) > εx) for each x, with a log-log fit, the Y-tail curves
    P(Y > x/c) for c in (1, 2, 4) and the dominance check P̂(T(0,z) > 8μ̄x).

    Raises:
        MuTooUncertainError: If the reference is too noisy at |z|
    """
    _check_tail_args(z, epsilon, x_grid, replicas)
    norm = l1_norm(z)
    mu_ref.check_precision(norm, epsilon)
    d = len(z)
    mu_z = mu_ref.mu(z)
    times, certified = _tail_samples(spec, z, replicas, master_seed, mapper)
    deviation = times - mu_z
    blocks = tuple(StatBlock.from_indicators(deviation > epsilon * x) for x in x_grid)
    big_m = 8.0 * mu_ref.mu_upper
    dominance = tuple(StatBlock.from_indicators(times > big_m * x) for x in x_grid)
    return TailSummary(
        side=ABOVE, direction=tuple(z), epsilon=epsilon, mu=mu_z, x_grid=tuple(float(x) for x in x_grid),
        blocks=blocks, fit=log_log_fit(x_grid, [b.estimate for b in blocks]),
        y_curves={c: tuple(y_survival(spec, d, x / c) for x in x_grid) for c in Y_CURVE_SCALES},
        dominance=dominance, certified=certified,
    )


# Deviation sets

@dataclass(frozen=True)
class PointRecord:
    point: Point
    time: float
    mu: float
    exact: bool


@dataclass(frozen=True)
class DeviationInterval:
    point: Point
    kind: str  # "A" or "B"
    low: float
    high: float

    @property
    def length(self) -> float:
        return self.high - self.low


def union_measure(intervals: Iterable[Tuple[float, float]]) -> Tuple[float, float, int]:
    """Lebesgue measure, supremum and number of maximal components of a union of [a, b)."""
    spans = sorted((a, b) for a, b in intervals if b > a)
    total = 0.0
    components = 0
    cur_lo = cur_hi = None
    for a, b in spans:
        if cur_hi is None or a > cur_hi:
            if cur_hi is not None:
                total += cur_hi - cur_lo
            cur_lo, cur_hi = a, b
            components += 1
        else:
            cur_hi = max(cur_hi, b)
    if cur_hi is not None:
        total += cur_hi - cur_lo
    return total, max((b for _, b in spans), default=0.0), components


@dataclass(frozen=True)
class DeviationReport:
    epsilon: float
    window_radius: int
    members: Tuple[Point, ...]
    sup_Z: int
    intervals: Tuple[DeviationInterval, ...]
    T_measure: float
    sup_T: float
    components: int
    censored: bool
    records: Tuple[PointRecord, ...]
    mu_exactness: str

    @property
    def Z_size(self) -> int:
        return len(self.members)

    def interval_total(self) -> float:
        return math.fsum(i.length for i in self.intervals)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'epsilon': self.epsilon,
            'window_radius': self.window_radius,
            'Z_size': self.Z_size,
            'sup_Z': self.sup_Z,
            'T_measure': self.T_measure,
            'sup_T': self.sup_T,
            'components': self.components,
            'censored': self.censored,
            'mu_exactness': self.mu_exactness,
        }


def deviation_sets(field: WeightField, epsilon: float, mu_ref: MuEstimate, window: Box) -> DeviationReport:
    """
    Z_ε and T_ε of one realization inside an origin-centered window.

    I_A(z) = [μ(z)/(1−ε), T(0,z)) and I_B(z) = [T(0,z), μ(z)/(1+ε)) when
    nonempty. The report is censored when a member of Z_ε lies in the outer
    half of the window or carries only an upper-bound travel time.

    Raises:
        MuTooUncertainError: If the reference is too noisy at the window scale
    """
    if not 0 < epsilon < 1:
        raise ValueError(f"epsilon must lie in (0, 1), got {epsilon}")
    if any(c != 0 for c in window.center):
        raise ValueError("deviation sets are measured from the origin; center the window there")
    d = window.dimension
    mu_ref.check_precision(window.radius * d, epsilon)

    tmap = sweep(field, [window.center], window)
    records: List[PointRecord] = []
    members: List[Point] = []
    intervals: List[DeviationInterval] = []
    censored = False
    half = window.radius / 2.0
    for p in sorted(tmap.distances):
        t = tmap[p]
        mu_p = mu_ref.mu(p)
        exact = tmap.certificate(p) is Certificate.WINDOW_EXACT
        records.append(PointRecord(p, t, mu_p, exact))
        norm = l1_norm(p)
        if abs(t - mu_p) > epsilon * norm:
            members.append(p)
            if linf_norm(p) > half or not exact:
                censored = True
        low_a = mu_p / (1 - epsilon)
        if t > low_a:
            intervals.append(DeviationInterval(p, "A", low_a, t))
        high_b = mu_p / (1 + epsilon)
        if t < high_b:
            intervals.append(DeviationInterval(p, "B", t, high_b))

    measure, sup_t, components = union_measure((i.low, i.high) for i in intervals)
    if censored:
        logger.warning(f"Deviation sets censored in window radius {window.radius} (eps={epsilon})")
    return DeviationReport(
        epsilon=epsilon,
        window_radius=window.radius,
        members=tuple(members),
        sup_Z=max((l1_norm(p) for p in members), default=0),
        intervals=tuple(intervals),
        T_measure=measure,
        sup_T=sup_t,
        components=components,
        censored=censored,
        records=tuple(records),
        mu_exactness=mu_ref.exactness,
    )


def shape_inclusions(report: DeviationReport, t: float) -> Tuple[bool, bool]:
    """
    (B^μ_{(1−ε)t} ⊆ B_t, B_t ⊆ B^μ_{(1+ε)t}) within the report's window.
    """
    eps = report.epsilon
    inner = all(r.time <= t for r in report.records if r.mu <= (1 - eps) * t)
    outer = all(r.mu <= (1 + eps) * t for r in report.records if r.time <= t)
    return inner, outer


def grid_measure(report: DeviationReport, step: float, t_max: Optional[float] = None) -> float:
    """
    step × #{grid t : A_t ∪ B_t ≠ ∅}, evaluated at cell midpoints directly from
    the point data rather than from the intervals.
    """
    if step <= 0:
        raise ValueError(f"step must be positive, got {step}")
    if t_max is None:
        t_max = report.sup_T
    if not report.records or t_max <= 0:
        return 0.0
    times = np.array([r.time for r in report.records])
    mus = np.array([r.mu for r in report.records])
    eps = report.epsilon
    cells = int(math.ceil(t_max / step))
    hits = 0
    for i in range(cells):
        t = (i + 0.5) * step
        a = np.any((mus / (1 - eps) <= t) & (times > t))
        b = np.any((times <= t) & (mus / (1 + eps) > t))
        if a or b:
            hits += 1
    return hits * step


@dataclass(frozen=True)
class LowerBoundChains:
    """Per-realization lower bounds for |Z_ε| and |I_A(z)| driven by Y."""
    beta_count: float
    y_count: int
    z_size: int
    count_holds: bool
    beta_interval: float
    interval_checked: int
    interval_holds: bool


def lower_bound_chains(
    report: DeviationReport,
    field: WeightField,
    mu_upper: float,
    beta_interval: Optional[float] = None,
) -> LowerBoundChains:
    """
    |Z_ε| >= #{z : Y(z) > (μ̄+ε)|z|}, and |I_A(z)| >= Y(z) − β|z| whenever
    Y(z) > β|z| with β > μ̄/(1−ε).
    """
    eps = report.epsilon
    beta_count = mu_upper + eps
    if beta_interval is None:
        beta_interval = mu_upper / (1 - eps) + eps
    elif beta_interval <= mu_upper / (1 - eps):
        raise ValueError(f"beta must exceed mu_upper/(1-eps) = {mu_upper / (1 - eps):.4g}")

    lengths_a = {i.point: i.length for i in report.intervals if i.kind == "A"}
    y_count = 0
    checked = 0
    interval_ok = True
    for r in report.records:
        norm = l1_norm(r.point)
        if norm == 0:
            continue
        y = field.y_at(r.point).value
        if y > beta_count * norm:
            y_count += 1
        if y > beta_interval * norm:
            checked += 1
            if lengths_a.get(r.point, 0.0) < y - beta_interval * norm:
                interval_ok = False
    return LowerBoundChains(
        beta_count=beta_count,
        y_count=y_count,
        z_size=report.Z_size,
        count_holds=report.Z_size >= y_count,
        beta_interval=beta_interval,
        interval_checked=checked,
        interval_holds=interval_ok,
    )


# Summability diagnostics

@dataclass(frozen=True)
class PartialSums:
    """Nested partial sums (mean over replicas, with CI) and their trend."""
    checkpoints: Tuple[int, ...]
    sums: Tuple[MeanCI, ...]
    comparison: Tuple[float, ...]
    trend: TrendResult
    uncertified: int
    samples: Tuple[Tuple[float, ...], ...] = ()

    @property
    def blocks(self) -> Tuple[StatBlock, ...]:
        return tuple(StatBlock.from_values(s) for s in self.samples)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'checkpoints': list(self.checkpoints),
            'sums': [s.to_dict() for s in self.sums],
            'comparison': list(self.comparison),
            'trend': self.trend.to_dict(),
            'uncertified': self.uncertified,
        }


def _partial_sums(
    checkpoints: Tuple[int, ...],
    rows: List[Tuple[List[float], int]],
    comparison: Tuple[float, ...],
    confidence: float,
    threshold: float,
) -> PartialSums:
    sums = np.array([r[0] for r in rows])
    cis = tuple(mean_interval(sums[:, j], confidence) for j in range(len(checkpoints)))
    return PartialSums(
        checkpoints=checkpoints,
        sums=cis,
        comparison=comparison,
        trend=increment_trend([c.mean for c in cis], threshold),
        uncertified=sum(1 for r in rows if r[1]),
        samples=_columns(sums),
    )


def _check_nested(values: Sequence[int], what: str) -> Tuple[int, ...]:
    out = tuple(values)
    if not out or any(v < 1 for v in out) or list(out) != sorted(set(out)):
        raise ValueError(f"{what} must be increasing positive integers, got {list(out)}")
    return out


def comparison_series(spec: DistributionSpec, d: int, alpha: float, big_m: float, limit: int) -> float:
    return math.fsum(n ** (alpha - 1) * y_survival(spec, d, big_m * n) for n in range(1, limit + 1))


def hre_partial_sum(
    spec: DistributionSpec,
    d: int,
    alpha: float,
    epsilon: float,
    radii: Sequence[int],
    replicas: int,
    mu_ref: MuEstimate,
    master_seed: int = 0,
    confidence: float = 0.95,
    threshold: float = 0.9,
    big_m: float = 1.0,
    mapper: Mapper = map,
) -> PartialSums:
    """
    Σ_{1<=|z|<=R} |z|^(α−d) P̂(|T(0,z) − μ(z)| > ε|z|) for nested radii R, next
    to Σ_{n<=R} n^(α−1) P(Y > M n).

    Raises:
        MuTooUncertainError: If the reference is too noisy at the largest radius
    """
    if alpha <= 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    radii = _check_nested(radii, "radii")
    mu_ref.check_precision(radii[-1], epsilon)
    window = Box(origin(d), radii[-1] + max(4, radii[-1] // 2))

    def one(k: int) -> Tuple[List[float], int]:
        field = WeightField(derive_seed(master_seed, k, "hre"), spec, d)
        tmap = sweep(field, [window.center], window)
        per_norm = [0.0] * (radii[-1] + 1)
        uncertified = 0
        for p, t in tmap.distances.items():
            norm = l1_norm(p)
            if norm == 0 or norm > radii[-1]:
                continue
            if abs(t - mu_ref.mu(p)) > epsilon * norm:
                per_norm[norm] += norm ** (alpha - d)
                if tmap.certificate(p) is not Certificate.WINDOW_EXACT:
                    uncertified += 1
        running = np.cumsum(per_norm)
        return [float(running[r]) for r in radii], uncertified

    comparison = tuple(comparison_series(spec, d, alpha, big_m, r) for r in radii)
    return _partial_sums(radii, _replicate(one, replicas, mapper), comparison, confidence, threshold)


def radial_sum(
    spec: DistributionSpec,
    z: Point,
    alpha: float,
    epsilon: float,
    checkpoints: Sequence[int],
    replicas: int,
    mu_ref: MuEstimate,
    master_seed: int = 0,
    confidence: float = 0.95,
    threshold: float = 0.9,
    mapper: Mapper = map,
) -> PartialSums:
    """
    Σ_{n<=N} n^(α−1) P̂(|T(0,nz) − nμ(z)| > εn) at each checkpoint N.

    Raises:
        MuTooUncertainError: If the reference is too noisy at the largest N
    """
    if alpha <= 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    checkpoints = _check_nested(checkpoints, "checkpoints")
    n_max = checkpoints[-1]
    z = tuple(z)
    d = len(z)
    mu_ref.check_precision(n_max * l1_norm(z), epsilon)
    mu_z = mu_ref.mu(z)
    targets = [scale(n, z) for n in range(1, n_max + 1)]
    window = _origin_window(targets)

    def one(k: int) -> Tuple[List[float], int]:
        field = WeightField(derive_seed(master_seed, k, "radial"), spec, d)
        times = times_from_origin(field, targets, window)
        terms = [0.0] * (n_max + 1)
        uncertified = 0
        for n, t in enumerate(targets, start=1):
            result = times[t]
            if abs(result.value - n * mu_z) > epsilon * n:
                terms[n] = n ** (alpha - 1)
                uncertified += not result.exact
        running = np.cumsum(terms)
        return [float(running[c]) for c in checkpoints], uncertified

    comparison = tuple(comparison_series(spec, d, alpha, 1.0, c) for c in checkpoints)
    return _partial_sums(checkpoints, _replicate(one, replicas, mapper), comparison, confidence, threshold)


@dataclass(frozen=True)
class LpRow:
    point: Point
    moment: MeanCI
    samples: Tuple[float, ...] = ()


def lp_error(
    spec: DistributionSpec,
    p: float,
    z_grid: Sequence[Point],
    replicas: int,
    mu_ref: MuEstimate,
    master_seed: int = 0,
    confidence: float = 0.95,
    mapper: Mapper = map,
) -> Tuple[LpRow, ...]:
    """E|T(0,z) − μ(z)|^p / |z|^p per z, on shared realizations."""
    if p <= 0:
        raise ValueError(f"p must be positive, got {p}")
    zs = [tuple(z) for z in z_grid]
    if not zs or any(l1_norm(z) == 0 for z in zs):
        raise ValueError("z_grid must hold nonzero points")
    d = len(zs[0])
    window = _origin_window(zs)
    mus = [mu_ref.mu(z) for z in zs]

    def one(k: int) -> List[float]:
        field = WeightField(derive_seed(master_seed, k, "lp"), spec, d)
        times = times_from_origin(field, zs, window)
        return [abs(times[z].value - m) ** p / l1_norm(z) ** p for z, m in zip(zs, mus)]

    values = np.array(_replicate(one, replicas, mapper))
    columns = _columns(values)
    return tuple(LpRow(z, mean_interval(columns[j], confidence), columns[j]) for j, z in enumerate(zs))


# Point-to-shape

@dataclass(frozen=True)
class ShapeHit:
    n: int
    time: float
    ratio: float
    exact: bool


def point_to_shape(
    field: WeightField,
    n_grid: Sequence[int],
    mu_ref: MuEstimate,
    window: Box,
) -> Tuple[ShapeHit, ...]:
    """
    T(0, ¬B^μ_n)/n for every n of the grid, from one sweep.

    Raises:
        ValueError: For n < 1
        MuDegenerateError: If μ vanishes in some direction
        WindowTooSmallError: If the window ends before leaving B^μ_n
    """
    ns = _check_nested(n_grid, "n_grid")
    if mu_ref.mu_lower <= MU_DEGENERATE_TOLERANCE:
        raise MuDegenerateError(f"mu_lower = {mu_ref.mu_lower:.3g}; the mu-balls are unbounded")
    s = Sweep(field, (window.center,), window)
    hits: List[ShapeHit] = []
    pending = 0
    for p, d in s.settle():
        mu_p = mu_ref.mu(p)
        while pending < len(ns) and mu_p > ns[pending]:
            n = ns[pending]
            exact = s.certify(d) is Certificate.WINDOW_EXACT
            hits.append(ShapeHit(n, d, d / n, exact))
            pending += 1
        if pending == len(ns):
            return tuple(hits)
    raise s.failure(f"exit from mu-ball of radius {ns[pending]}")


def point_to_shape_replicas(
    spec: DistributionSpec,
    d: int,
    n_grid: Sequence[int],
    mu_ref: MuEstimate,
    replicas: int,
    master_seed: int = 0,
    confidence: float = 0.95,
    mapper: Mapper = map,
) -> Tuple['ShapeRow', ...]:
    """Per n: mean ratio T(0, ¬B^μ_n)/n and mean |ratio − 1| across replicas."""
    ns = _check_nested(n_grid, "n_grid")
    reach = math.ceil(ns[-1] / mu_ref.mu_lower) if mu_ref.mu_lower > MU_DEGENERATE_TOLERANCE else ns[-1]
    window = Box(origin(d), reach + max(4, reach // 2))

    def one(k: int) -> List[ShapeHit]:
        field = WeightField(derive_seed(master_seed, k, "shape"), spec, d)
        return list(point_to_shape(field, ns, mu_ref, window))

    hits = _replicate(one, replicas, mapper)
    rows = []
    for j, n in enumerate(ns):
        ratios = tuple(h[j].ratio for h in hits)
        rows.append(ShapeRow(
            n=n,
            ratio=mean_interval(ratios, confidence),
            error=mean_interval([abs(r - 1) for r in ratios], confidence),
            samples=ratios,
            uncertified=sum(1 for h in hits if not h[j].exact),
        ))
    return tuple(rows)


@dataclass(frozen=True)
class ShapeRow:
    n: int
    ratio: MeanCI
    error: MeanCI
    samples: Tuple[float, ...]
    uncertified: int = 0


# Y records

@dataclass(frozen=True)
class YRecordScan:
    beta: float
    records: Tuple[int, ...]
    witnesses: Tuple[Tuple[int, Point, float], ...]
    certificate_checked: int
    certificate_holds: bool

    @property
    def sup(self) -> int:
        return max(self.records, default=0)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'beta': self.beta,
            'records': list(self.records),
            'sup': self.sup,
            'witnesses': len(self.witnesses),
            'certificate_checked': self.certificate_checked,
            'certificate_holds': self.certificate_holds,
        }


def y_record_scan(
    field: WeightField,
    beta: float,
    window: Box,
    mu_ref: Optional[MuEstimate] = None,
    epsilon: Optional[float] = None,
) -> YRecordScan:
    """
    η_β = {even n <= radius : Y(z) > βn for some |z| = n}.

    With a reference and ε, every witness with Y(z) > (μ̄+ε)|z| is checked to
    satisfy |T(0,z) − μ(z)| > ε|z|.
    """
    if beta <= 0:
        raise ValueError(f"beta must be positive, got {beta}")
    d = window.dimension
    records: List[int] = []
    witnesses: List[Tuple[int, Point, float]] = []
    for n in range(2, window.radius + 1, 2):
        found = False
        for z in l1_sphere(d, n):
            p = tuple(c + o for c, o in zip(z, window.center))
            y = field.y_at(p).value
            if y > beta * n:
                witnesses.append((n, p, y))
                found = True
        if found:
            records.append(n)

    checked = 0
    holds = True
    if mu_ref is not None and epsilon is not None:
        bound = mu_ref.mu_upper + epsilon
        for n, p, y in witnesses:
            if y > bound * n:
                checked += 1
                t = travel_time(field, window.center, p, window).value
                if not abs(t - mu_ref.mu(p)) > epsilon * n:
                    holds = False
    return YRecordScan(beta, tuple(records), tuple(witnesses), checked, holds)


# Supplementary set-to-set and off-lattice checks

@dataclass(frozen=True)
class AnnulusRow:
    m: int
    ell: int
    block: StatBlock


def annulus_crossing(
    spec: DistributionSpec,
    d: int,
    m_values: Sequence[int],
    eta: float,
    epsilon: float,
    mu_ref: MuEstimate,
    replicas: int,
    master_seed: int = 0,
    mapper: Mapper = map,
) -> Tuple[Tuple[AnnulusRow, ...], Optional[FitResult]]:
    """
    P̂(T(B^μ_ℓ, ¬B^μ_{ℓ+m}) < m(1−ε)) with ℓ = floor(ηm), and a log-linear fit in m.

    Raises:
        MuDegenerateError: If μ vanishes in some direction
    """
    ms = _check_nested(m_values, "m_values")
    if mu_ref.mu_lower <= MU_DEGENERATE_TOLERANCE:
        raise MuDegenerateError("annulus crossings need a nondegenerate mu")
    if eta < 0 or not 0 < epsilon < 1:
        raise ValueError("eta must be nonnegative and epsilon in (0, 1)")

    layout = []
    for m in ms:
        ell = int(math.floor(eta * m))
        reach = math.ceil((ell + m) / mu_ref.mu_lower) + 2
        window = Box(origin(d), reach)
        sources = tuple(p for p in window.points() if mu_ref.mu(p) <= ell)
        layout.append((m, ell, window, sources))

    def one(k: int) -> List[bool]:
        field = WeightField(derive_seed(master_seed, k, "annulus"), spec, d)
        flags = []
        for m, ell, window, sources in layout:
            target = MuBallComplement(ell + m, mu_ref.mu)
            flags.append(travel_time_set(field, sources, target, window).value < m * (1 - epsilon))
        return flags

    flags = np.array(_replicate(one, replicas, mapper), dtype=bool)
    rows = tuple(
        AnnulusRow(m, ell, StatBlock.proportion(int(flags[:, j].sum()), replicas))
        for j, (m, ell, _, _) in enumerate(layout)
    )
    return rows, log_linear_fit(ms, [r.block.estimate for r in rows])


def lattice_round(x: Sequence[float]) -> Point:
    """Coordinatewise nearest lattice point, halves rounded away from zero."""
    return tuple(int(math.copysign(math.floor(abs(c) + 0.5), c)) for c in x)


def off_lattice_limit(
    spec: DistributionSpec,
    x: Sequence[float],
    n_grid: Sequence[int],
    replicas: int,
    mu_ref: MuEstimate,
    master_seed: int = 0,
    confidence: float = 0.95,
    mapper: Mapper = map,
) -> Tuple[Tuple['OffLatticeRow', ...], float, float]:
    """
    T(0, z^(n))/n for z^(n) the rounding of n·x, against the extension μ(x)
    and its lookup error bound.
    """
    ns = _check_nested(n_grid, "n_grid")
    if l1_norm(x) == 0:
        raise ValueError("x must be nonzero")
    d = len(x)
    targets = [lattice_round([n * c for c in x]) for n in ns]
    window = _origin_window(targets)

    def one(k: int) -> List[float]:
        field = WeightField(derive_seed(master_seed, k, "off-lattice"), spec, d)
        times = times_from_origin(field, targets, window)
        return [times[t].value / n for t, n in zip(targets, ns)]

    columns = _columns(np.array(_replicate(one, replicas, mapper)))
    rows = tuple(
        OffLatticeRow(n, t, mean_interval(columns[j], confidence), columns[j])
        for j, (n, t) in enumerate(zip(ns, targets))
    )
    return rows, extend_mu(mu_ref, x), mu_ref.lookup_error(x)


@dataclass(frozen=True)
class OffLatticeRow:
    n: int
    target: Point
    ratio: MeanCI
    samples: Tuple[float, ...]
