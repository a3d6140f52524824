"""
Regenerative structure on cylinders.

Along the cylinder C(z, r) the level-n event A_n asks every edge of E_n(z, r)
to weigh at most t̄. The events are independent across levels, so the levels
where they occur (ρ_1 < ρ_2 < ...) cut the cylinder into i.i.d. blocks. Each
block contributes one segment time T_C(V_{ρ_{j-1}}, V_{ρ_j}) and one
increment ρ_j - ρ_{j-1}; pooled over traces they estimate μ_τ, μ_ρ and
bracket the tube constant μ_C(z, r).
"""

import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Dict, Iterable, List, Optional, Sequence, Tuple, Union

from fpp_lab.errors import InsufficientDataError, NoRegenerationError, RadiusTooSmallError
from fpp_lab.lattice import (
    Box,
    Cylinder,
    Intersection,
    Length,
    Point,
    Slab,
    add,
    check_direction,
    cross_edges,
    cross_section,
    l1_norm,
    linf_norm,
    scale,
    translate_edges,
)
from fpp_lab.paths import Certificate, TravelTime, travel_time, travel_time_set
from fpp_lab.stats import MeanCI, StatBlock, mean_interval, wilson_interval
from fpp_lab.weights import DistributionSpec, WeightField, derive_seed, y_survival

logger = logging.getLogger(__name__)

MIN_TRACES = 30
UNDERESTIMATE = "underestimate"

# How far past m_max a scan may look for the regeneration that closes ν(m_max)
OVERSHOOT_FACTOR = 20


# Geometry helpers

def covering_window(direction: Point, r: Length, n_low: int, n_high: int) -> Box:
    """
    A box whose interior holds every point of C(z, r) between levels
    n_low*|z| and n_high*|z| (one lattice step of clearance to its boundary).
    """
    z = check_direction(direction)
    d = len(z)
    norm = l1_norm(z)
    mid = (n_low + n_high) // 2
    # Axis parameter of a cylinder point in the slab lies within this of mid
    spread = (n_high - n_low) / 2.0 + 1.0 + float(r) * math.sqrt(d) / norm
    radius = math.ceil(spread * linf_norm(z) + float(r)) + 2
    return Box(scale(mid, z), radius)


def slab_region(direction: Point, r: Length, n_low: int, n_high: int, margin: int = 0) -> Intersection:
    """C(z, r) ∩ {n_low*|z| - margin <= level <= n_high*|z| + margin}."""
    norm = l1_norm(direction)
    return Intersection((
        Cylinder(direction, r),
        Slab(n_low * norm - margin, n_high * norm + margin),
    ))


def regeneration_occurs(field: WeightField, base_edges: Sequence, direction: Point, n: int, tbar: float) -> bool:
    """A_n: every edge of E_n = E_0 + n*z weighs at most t̄."""
    return all(field.weight(e) <= tbar for e in translate_edges(base_edges, scale(n, direction)))


def section_at(base_section: Sequence[Point], direction: Point, n: int) -> Tuple[Point, ...]:
    shift = scale(n, direction)
    return tuple(add(p, shift) for p in base_section)


def segment_time(field: WeightField, direction: Point, r: Length, n_low: int, n_high: int) -> float:
    """T_C(V_{n_low}, V_{n_high}) inside the cylinder slab between the two sections."""
    base = cross_section(direction, r, 0)
    sources = section_at(base, direction, n_low)
    targets = frozenset(section_at(base, direction, n_high))
    window = covering_window(direction, r, n_low, n_high)
    region = slab_region(direction, r, n_low, n_high)
    return travel_time_set(field, sources, targets.__contains__, window, region).value


def cylinder_time(field: WeightField, direction: Point, r: Length, n: int) -> float:
    """T_C(V_0, V_n), with one |z| of level margin on each side of the slab."""
    base = cross_section(direction, r, 0)
    margin = l1_norm(direction)
    targets = frozenset(section_at(base, direction, n))
    window = covering_window(direction, r, -1, n + 1)
    region = slab_region(direction, r, 0, n, margin)
    return travel_time_set(field, base, targets.__contains__, window, region).value


# Traces

@dataclass(frozen=True)
class RegenerationTrace:
    """Regeneration levels of one realization and the segment times between them."""
    direction: Point
    radius: float
    tbar: float
    rho: Tuple[int, ...]
    segment_times: Tuple[float, ...]
    e0_size: int
    m_max: int
    full_time: Optional[float] = None
    seed: Optional[int] = None

    def __post_init__(self):
        if not self.rho or self.rho[0] != 0:
            raise ValueError("rho must start at 0")
        if any(b <= a for a, b in zip(self.rho, self.rho[1:])):
            raise ValueError("rho must be strictly increasing")
        if self.segment_times and len(self.segment_times) != len(self.rho) - 1:
            raise ValueError("one segment time per regeneration is required")

    @property
    def increments(self) -> Tuple[int, ...]:
        return tuple(b - a for a, b in zip(self.rho, self.rho[1:]))

    @property
    def regenerations_within(self) -> int:
        """Number of j >= 1 with ρ_j <= m_max."""
        return sum(1 for n in self.rho[1:] if n <= self.m_max)

    def nu(self, m: int) -> int:
        """
        ν(m) = min{j >= 1 : ρ_j > m}.

        Raises:
            ValueError: If the trace never passes level m
        """
        for j, level in enumerate(self.rho[1:], start=1):
            if level > m:
                return j
        raise ValueError(f"trace does not regenerate beyond level {m}")

    def sandwich_bounds(self, n: int) -> Tuple[float, float]:
        """
        Realization-wise bracket of T_C(V_0, V_n):

            sum_{j<ν(n)} s_j  <=  T_C(V_0, V_n)  <=  sum_{j<=ν(n)} s_j + t̄|E_0|(ν(n) - 1)
        """
        if not self.segment_times:
            raise ValueError("trace was scanned without segment times")
        j = self.nu(n)
        lower = math.fsum(self.segment_times[:j - 1])
        upper = math.fsum(self.segment_times[:j]) + self.tbar * self.e0_size * (j - 1)
        return lower, upper

    def renewal_ratios(self, ms: Iterable[int]) -> List[Dict[str, float]]:
        """ρ_{ν(m)}/m and ν(m)/m for each m (limits 1 and 1/μ_ρ)."""
        rows = []
        for m in ms:
            j = self.nu(m)
            rows.append({'m': m, 'rho_ratio': self.rho[j] / m, 'nu_ratio': j / m})
        return rows

    def to_dict(self) -> Dict[str, Any]:
        return {
            'direction': list(self.direction),
            'radius': self.radius,
            'tbar': self.tbar,
            'rho': list(self.rho),
            'segment_times': list(self.segment_times),
            'e0_size': self.e0_size,
            'm_max': self.m_max,
            'full_time': self.full_time,
            'seed': self.seed,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'RegenerationTrace':
        return cls(
            direction=tuple(data['direction']),
            radius=data['radius'],
            tbar=float(data['tbar']),
            rho=tuple(int(n) for n in data['rho']),
            segment_times=tuple(float(t) for t in data['segment_times']),
            e0_size=int(data['e0_size']),
            m_max=int(data['m_max']),
            full_time=data.get('full_time'),
            seed=data.get('seed'),
        )

    def to_json_line(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json_line(cls, line: str) -> 'RegenerationTrace':
        return cls.from_dict(json.loads(line))


def write_traces(path: Union[str, Path], traces: Iterable[RegenerationTrace]) -> int:
    """Write one JSON object per line; returns the number written."""
    count = 0
    with open(path, 'w', encoding='utf-8') as f:
        for trace in traces:
            f.write(trace.to_json_line() + '\n')
            count += 1
    return count


def read_traces(path: Union[str, Path]) -> List[RegenerationTrace]:
    with open(path, 'r', encoding='utf-8') as f:
        return [RegenerationTrace.from_json_line(line) for line in f if line.strip()]


def scan_regenerations(
    field: WeightField,
    direction: Point,
    r: Length,
    tbar: float,
    m_max: int,
    with_segments: bool = True,
    with_full_time: bool = False,
) -> RegenerationTrace:
    """
    Scan levels 1, 2, ... for A_n up to m_max, then on to the first
    regeneration beyond m_max so that ν(m) is defined for every m <= m_max.

    Args:
        field: Passage times
        direction: First-orthant direction z
        r: Cylinder radius
        tbar: Regeneration threshold
        m_max: Last level of interest
        with_segments: Compute the segment travel times
        with_full_time: Also compute T_C(V_0, V_{m_max})

    Raises:
        NoRegenerationError: If no A_n occurs in 1..m_max
    """
    z = check_direction(direction)
    if m_max < 1:
        raise ValueError(f"m_max must be at least 1, got {m_max}")
    if r < 0:
        raise ValueError(f"radius must be nonnegative, got {r}")

    base_edges = cross_edges(z, r, 0)
    rho = [0]
    limit = OVERSHOOT_FACTOR * m_max + 1000
    n = 0
    while n < limit:
        n += 1
        if regeneration_occurs(field, base_edges, z, n, tbar):
            rho.append(n)
            if n > m_max:
                break

    if len(rho) == 1 or rho[1] > m_max:
        raise NoRegenerationError(f"no regeneration of C({list(z)}, {r}) up to level {m_max}")
    if rho[-1] <= m_max:
        logger.warning(f"No regeneration within {limit} levels past m_max={m_max}")

    segments: Tuple[float, ...] = ()
    if with_segments:
        segments = tuple(segment_time(field, z, r, a, b) for a, b in zip(rho, rho[1:]))
    full = cylinder_time(field, z, r, m_max) if with_full_time else None

    logger.debug(f"Scanned C({list(z)}, {r}): {len(rho) - 1} regenerations up to level {rho[-1]}")
    return RegenerationTrace(
        direction=z,
        radius=float(r),
        tbar=tbar,
        rho=tuple(rho),
        segment_times=segments,
        e0_size=len(base_edges),
        m_max=m_max,
        full_time=full,
        seed=field.seed,
    )


# Estimation

@dataclass(frozen=True)
class RegenEstimate:
    mu_tau_hat: MeanCI
    mu_rho_hat: MeanCI
    mu_c_hat: Optional[MeanCI]
    sandwich: Tuple[float, float]
    p_hat: float
    p_interval: Tuple[float, float]
    inverse_p_hat: float
    traces: int
    bias_direction: str = UNDERESTIMATE

    def sandwich_contains(self, widths: float = 2.0) -> Optional[bool]:
        """μ̂_C inside the sandwich, allowing `widths` CI half-widths of slack."""
        if self.mu_c_hat is None:
            return None
        slack = widths * self.mu_c_hat.half_width if self.mu_c_hat.n > 1 else 0.0
        low, high = self.sandwich
        return low - slack <= self.mu_c_hat.mean <= high + slack

    def to_dict(self) -> Dict[str, Any]:
        return {
            'mu_tau': self.mu_tau_hat.to_dict(),
            'mu_rho': self.mu_rho_hat.to_dict(),
            'mu_c': self.mu_c_hat.to_dict() if self.mu_c_hat else None,
            'sandwich': list(self.sandwich),
            'p_hat': self.p_hat,
            'p_interval': list(self.p_interval),
            'inverse_p_hat': self.inverse_p_hat,
            'traces': self.traces,
            'bias_direction': self.bias_direction,
        }


def estimate_regen_constants(
    traces: Sequence[RegenerationTrace],
    confidence: float = 0.95,
    min_traces: int = MIN_TRACES,
) -> RegenEstimate:
    """
    Pool segments and increments over independent traces.

    μ̂_C is the mean of T_C(V_0, V_{m_max})/m_max; the sequence of means is
    superadditive so the finite-m value sits below the limit.

    Raises:
        InsufficientDataError: With fewer than min_traces traces
    """
    if len(traces) < min_traces:
        raise InsufficientDataError(f"need at least {min_traces} traces, got {len(traces)}")
    first = traces[0]
    key = (first.direction, first.radius, first.tbar, first.e0_size)
    for t in traces:
        if (t.direction, t.radius, t.tbar, t.e0_size) != key:
            raise ValueError("traces come from different cylinders or thresholds")

    segments = [s for t in traces for s in t.segment_times]
    increments = [k for t in traces for k in t.increments]
    if not segments:
        raise InsufficientDataError("traces carry no segment times")
    mu_tau = mean_interval(segments, confidence)
    mu_rho = mean_interval(increments, confidence)

    full = [t.full_time / t.m_max for t in traces if t.full_time is not None]
    mu_c = mean_interval(full, confidence) if full else None

    ratio = mu_tau.mean / mu_rho.mean
    sandwich = (ratio, ratio + first.e0_size * first.tbar / mu_rho.mean)

    successes = sum(t.regenerations_within for t in traces)
    trials = sum(t.m_max for t in traces)
    p_hat = successes / trials
    logger.info(f"Regeneration estimate from {len(traces)} traces: "
                f"mu_tau={mu_tau.mean:.4f}, mu_rho={mu_rho.mean:.4f}, p_hat={p_hat:.4f}")
    return RegenEstimate(
        mu_tau_hat=mu_tau,
        mu_rho_hat=mu_rho,
        mu_c_hat=mu_c,
        sandwich=sandwich,
        p_hat=p_hat,
        p_interval=wilson_interval(successes, trials, confidence),
        inverse_p_hat=1.0 / p_hat if p_hat > 0 else math.inf,
        traces=len(traces),
    )


# Tube constants

@dataclass(frozen=True)
class TubeSweep:
    radii: Tuple[Length, ...]
    n: int
    per_radius: Tuple[MeanCI, ...]
    unrestricted: MeanCI
    monotone_realizations: int
    replicas: int
    certified: int
    samples: Tuple[Tuple[float, ...], ...] = ()
    free_samples: Tuple[float, ...] = ()

    def to_dict(self) -> Dict[str, Any]:
        return {
            'radii': [float(r) for r in self.radii],
            'n': self.n,
            'per_radius': [ci.to_dict() for ci in self.per_radius],
            'unrestricted': self.unrestricted.to_dict(),
            'monotone_realizations': self.monotone_realizations,
            'replicas': self.replicas,
            'certified': self.certified,
        }


def tube_constant_sweep(
    spec: DistributionSpec,
    direction: Point,
    radii: Sequence[Length],
    n: int,
    replicas: int,
    master_seed: int = 0,
    confidence: float = 0.95,
    mapper: Callable[..., Iterable[Any]] = map,
) -> TubeSweep:
    """
    μ̂_C(z, r) = mean T_C(V_0, V_n)/n per radius on shared (coupled) fields,
    with μ̂(z) = mean T(0, n z)/n for reference.

    Raises:
        InsufficientDataError: With fewer than MIN_TRACES replicas
    """
    z = check_direction(direction)
    radii = tuple(radii)
    if any(b <= a for a, b in zip(radii, radii[1:])):
        raise ValueError("radii must be strictly increasing")
    if replicas < MIN_TRACES:
        raise InsufficientDataError(f"need at least {MIN_TRACES} replicas, got {replicas}")
    if n < 1:
        raise ValueError(f"n must be at least 1, got {n}")

    d = len(z)
    target = scale(n, z)
    free_window = covering_window(z, n * linf_norm(z), 0, n)

    def one(k: int) -> Tuple[List[float], TravelTime]:
        field = WeightField(derive_seed(master_seed, k, "tube"), spec, d)
        values = [cylinder_time(field, z, r, n) / n for r in radii]
        return values, travel_time(field, scale(0, z), target, free_window)

    per_radius: List[List[float]] = [[] for _ in radii]
    free: List[float] = []
    monotone = 0
    certified = 0
    for values, result in mapper(one, range(replicas)):
        for bucket, v in zip(per_radius, values):
            bucket.append(v)
        if all(b <= a for a, b in zip(values, values[1:])):
            monotone += 1
        free.append(result.value / n)
        if result.certificate is Certificate.WINDOW_EXACT:
            certified += 1

    return TubeSweep(
        radii=radii,
        n=n,
        per_radius=tuple(mean_interval(v, confidence) for v in per_radius),
        unrestricted=mean_interval(free, confidence),
        monotone_realizations=monotone,
        replicas=replicas,
        certified=certified,
        samples=tuple(tuple(v) for v in per_radius),
        free_samples=tuple(free),
    )


# Cylinder tail

@dataclass(frozen=True)
class TailRow:
    x: float
    lhs: StatBlock
    rhs: float

    def violated(self, confidence: float = 0.95) -> bool:
        """Empirical tail significantly above the bound."""
        lower, _ = self.lhs.interval(confidence)
        return lower > self.rhs

    def to_dict(self, confidence: float = 0.95) -> Dict[str, Any]:
        lower, upper = self.lhs.interval(confidence)
        return {
            'x': self.x, 'lhs': self.lhs.estimate, 'lhs_lower': lower, 'lhs_upper': upper,
            'rhs': self.rhs, 'violated': self.violated(confidence),
        }


@dataclass(frozen=True)
class TailCheckReport:
    direction: Point
    radius: Length
    rows: Tuple[TailRow, ...]
    replicas: int
    certified: int

    @property
    def any_violation(self) -> bool:
        return any(row.violated() for row in self.rows)


def min_tail_radius(d: int) -> float:
    """Radius leaving room for 2d disjoint detours of length at most 9."""
    return 9 * math.sqrt(d)


def cylinder_tail_check(
    spec: DistributionSpec,
    direction: Point,
    r: Length,
    x_grid: Sequence[float],
    replicas: int,
    master_seed: int = 0,
    mapper: Callable[..., Iterable[Any]] = map,
) -> TailCheckReport:
    """
    Empirical P(T_C(0, z) > 9|z|x) against 9^{2d} |z| P(Y > x).

    Raises:
        RadiusTooSmallError: If r < 9*sqrt(d)
    """
    z = check_direction(direction)
    d = len(z)
    if r < min_tail_radius(d):
        raise RadiusTooSmallError(f"cylinder radius {r} below {min_tail_radius(d):.3f} for d={d}")
    if any(x < 0 for x in x_grid):
        raise ValueError("x values must be nonnegative")
    if replicas < 1:
        raise ValueError(f"replicas must be positive, got {replicas}")

    norm = l1_norm(z)
    cylinder = Cylinder(z, r)
    window = covering_window(z, r, 0, 1)
    start = scale(0, z)

    def one(k: int) -> TravelTime:
        field = WeightField(derive_seed(master_seed, k, "cylinder-tail"), spec, d)
        return travel_time(field, start, z, window, cylinder)

    results = list(mapper(one, range(replicas)))
    times = [r.value for r in results]
    certified = sum(r.certificate is Certificate.WINDOW_EXACT for r in results)

    rows = tuple(
        TailRow(
            x=float(x),
            lhs=StatBlock.from_indicators(t > 9 * norm * x for t in times),
            rhs=9 ** (2 * d) * norm * y_survival(spec, d, x),
        )
        for x in x_grid
    )
    return TailCheckReport(direction=z, radius=r, rows=rows, replicas=replicas, certified=certified)
