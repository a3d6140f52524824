"""
Seed-deterministic i.i.d. passage times on the edges of Z^d.

A weight is a pure function of (seed, canonical edge): the edge id is hashed
with splitmix64, the top 53 bits become a uniform in (0, 1) and the uniform
goes through the quantile function of the configured law. The result is
rounded to a 2^-32 grid, so sums of moderate path weights are exact in
float64.

Also here: the statistic Y(z), the threshold t-bar, the restricted-moment
identity and the min-of-i.i.d. moment check.
"""

import hashlib
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, Mapping, Sequence, Tuple

import numpy as np
from scipy import integrate

from fpp_lab.errors import EmptySampleError, InvalidExponentsError
from fpp_lab.lattice import LatticeEdge, Point, check_dimension, incident_edges
from fpp_lab.stats import MeanCI, mean_interval

logger = logging.getLogger(__name__)

MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_UNIT = 2.0 ** -53
_GRID = 2.0 ** 32
_GRID_LIMIT = 2.0 ** 20

DETERMINISTIC = "deterministic"
UNIFORM = "uniform"
EXPONENTIAL = "exponential"
BERNOULLI = "bernoulli"
PARETO = "pareto"

# Parameters each kind reads, in serialization order
KIND_PARAMS: Dict[str, Tuple[str, ...]] = {
    DETERMINISTIC: ("c",),
    UNIFORM: ("low", "high"),
    EXPONENTIAL: ("rate",),
    BERNOULLI: ("p0",),
    PARETO: ("a",),
}

# Bond percolation thresholds; d=2 is exact, d=3,4 are numerical values.
PC_BOND: Dict[int, float] = {2: 0.5, 3: 0.2488, 4: 0.1601}


def pc_bond(d: int) -> float:
    return PC_BOND[check_dimension(d)]


def splitmix64(x: int) -> int:
    z = (x + _GOLDEN) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def hash_words(seed: int, words: Sequence[int]) -> int:
    """Chain splitmix64 over a sequence of (possibly negative) integers."""
    h = splitmix64(seed & MASK64)
    for w in words:
        h = splitmix64(h ^ (w & MASK64))
    return h


def _tag_word(tag: str) -> int:
    return int.from_bytes(hashlib.blake2b(tag.encode('utf-8'), digest_size=8).digest(), 'little')


def derive_seed(master_seed: int, index: int, tag: str = "replica") -> int:
    """
    Child seed for replica `index` of stream `tag`.

    Pure in its arguments, so any replica can be reproduced on its own.
    """
    return hash_words(master_seed, (_tag_word(tag), index))


def uniform_from_hash(h: int) -> float:
    """Map 64 random bits to a uniform in the open interval (0, 1)."""
    return ((h >> 11) + 0.5) * _UNIT


def quantize(x: float) -> float:
    """Round to the 2^-32 grid (values beyond 2^20 are kept as they are)."""
    if x < _GRID_LIMIT:
        return round(x * _GRID) / _GRID
    return x


@dataclass(frozen=True)
class DistributionSpec:
    """
    Law of a single passage time.

    Kinds: deterministic(c), uniform(low, high), exponential(rate),
    bernoulli(p0) with an atom of mass p0 at 0 and value 1 otherwise,
    pareto(a) with P(tau > x) = x^-a for x >= 1.
    """
    kind: str
    c: float = 1.0
    low: float = 0.0
    high: float = 1.0
    rate: float = 1.0
    p0: float = 0.0
    a: float = 1.0

    def __post_init__(self):
        if self.kind not in KIND_PARAMS:
            raise ValueError(f"unknown distribution kind: {self.kind}")
        if self.kind == DETERMINISTIC and not self.c >= 0:
            raise ValueError(f"deterministic value must be nonnegative, got {self.c}")
        if self.kind == UNIFORM and not 0 <= self.low < self.high:
            raise ValueError(f"uniform needs 0 <= low < high, got ({self.low}, {self.high})")
        if self.kind == EXPONENTIAL and not self.rate > 0:
            raise ValueError(f"exponential rate must be positive, got {self.rate}")
        if self.kind == BERNOULLI and not 0 <= self.p0 <= 1:
            raise ValueError(f"bernoulli p0 must be a probability, got {self.p0}")
        if self.kind == PARETO and not self.a > 0:
            raise ValueError(f"pareto exponent must be positive, got {self.a}")

    # Factories

    @classmethod
    def deterministic(cls, c: float = 1.0) -> 'DistributionSpec':
        return cls(DETERMINISTIC, c=c)

    @classmethod
    def uniform(cls, low: float = 0.0, high: float = 1.0) -> 'DistributionSpec':
        return cls(UNIFORM, low=low, high=high)

    @classmethod
    def exponential(cls, rate: float = 1.0) -> 'DistributionSpec':
        return cls(EXPONENTIAL, rate=rate)

    @classmethod
    def bernoulli(cls, p0: float) -> 'DistributionSpec':
        return cls(BERNOULLI, p0=p0)

    @classmethod
    def pareto(cls, a: float) -> 'DistributionSpec':
        return cls(PARETO, a=a)

    # Law

    def quantile(self, q: float) -> float:
        """Generalized inverse CDF: inf{x : P(tau <= x) >= q}."""
        kind = self.kind
        if kind == DETERMINISTIC:
            return float(self.c)
        if kind == UNIFORM:
            return self.low + q * (self.high - self.low)
        if kind == EXPONENTIAL:
            return math.inf if q >= 1 else -math.log1p(-q) / self.rate
        if kind == BERNOULLI:
            return 0.0 if q <= self.p0 else 1.0
        return math.inf if q >= 1 else (1.0 - q) ** (-1.0 / self.a)

    def sample_quantiles(self, u: np.ndarray) -> np.ndarray:
        """Vectorised quantile for Monte Carlo draws."""
        u = np.asarray(u, dtype=float)
        kind = self.kind
        if kind == DETERMINISTIC:
            return np.full(u.shape, float(self.c))
        if kind == UNIFORM:
            return self.low + u * (self.high - self.low)
        if kind == EXPONENTIAL:
            return -np.log1p(-u) / self.rate
        if kind == BERNOULLI:
            return np.where(u <= self.p0, 0.0, 1.0)
        return (1.0 - u) ** (-1.0 / self.a)

    def cdf(self, x: float) -> float:
        """P(tau <= x)."""
        return 1.0 - self.survival(x)

    def survival(self, x: float) -> float:
        """P(tau > x)."""
        kind = self.kind
        if kind == DETERMINISTIC:
            return 1.0 if x < self.c else 0.0
        if kind == UNIFORM:
            if x < self.low:
                return 1.0
            if x >= self.high:
                return 0.0
            return (self.high - x) / (self.high - self.low)
        if kind == EXPONENTIAL:
            return 1.0 if x < 0 else math.exp(-self.rate * x)
        if kind == BERNOULLI:
            if x < 0:
                return 1.0
            return 1.0 - self.p0 if x < 1 else 0.0
        return 1.0 if x < 1 else x ** (-self.a)

    @property
    def support_min(self) -> float:
        """Infimum of the support."""
        kind = self.kind
        if kind == DETERMINISTIC:
            return float(self.c)
        if kind == UNIFORM:
            return float(self.low)
        if kind == EXPONENTIAL:
            return 0.0
        if kind == BERNOULLI:
            return 0.0 if self.p0 > 0 else 1.0
        return 1.0

    @property
    def support_max(self) -> float:
        kind = self.kind
        if kind == DETERMINISTIC:
            return float(self.c)
        if kind == UNIFORM:
            return float(self.high)
        if kind == BERNOULLI:
            return 1.0 if self.p0 < 1 else 0.0
        return math.inf

    def mean(self) -> float:
        kind = self.kind
        if kind == DETERMINISTIC:
            return float(self.c)
        if kind == UNIFORM:
            return (self.low + self.high) / 2.0
        if kind == EXPONENTIAL:
            return 1.0 / self.rate
        if kind == BERNOULLI:
            return 1.0 - self.p0
        return self.a / (self.a - 1.0) if self.a > 1 else math.inf

    @property
    def is_deterministic(self) -> bool:
        return self.kind == DETERMINISTIC

    # Serialization

    def to_dict(self) -> Dict[str, Any]:
        data: Dict[str, Any] = {'kind': self.kind}
        for name in KIND_PARAMS[self.kind]:
            data[name] = getattr(self, name)
        return data

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> 'DistributionSpec':
        """
        Build a spec from its serialized form.

        Raises:
            ValueError: On unknown kinds, unknown parameters or invalid values
        """
        kind = data.get('kind')
        if kind not in KIND_PARAMS:
            raise ValueError(f"unknown distribution kind: {kind}")
        allowed = KIND_PARAMS[kind]
        extra = sorted(set(data) - set(allowed) - {'kind'})
        if extra:
            raise ValueError(f"unexpected parameters for {kind}: {extra}")
        params = {name: float(data[name]) for name in allowed if name in data}
        return cls(kind, **params)


def quantile_tbar(spec: DistributionSpec, delta: float) -> float:
    """
    Smallest t-bar with P(tau <= t-bar) >= 1 - delta.

    Args:
        spec: Passage-time law
        delta: Allowed mass above the threshold, in (0, 1)

    Returns:
        The threshold t-bar
    """
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta must be in (0, 1), got {delta}")
    target = 1.0 - delta
    kind = spec.kind
    if kind == DETERMINISTIC:
        return float(spec.c)
    if kind == BERNOULLI:
        return 0.0 if spec.p0 >= target else 1.0
    if kind == UNIFORM:
        t = spec.quantile(target)
    elif kind == EXPONENTIAL:
        t = -math.log(delta) / spec.rate
    else:
        t = delta ** (-1.0 / spec.a)

    # Settle floating-point rounding onto the smallest qualifying float
    for _ in range(64):
        if spec.cdf(t) >= target:
            break
        t = math.nextafter(t, math.inf)
    for _ in range(64):
        below = math.nextafter(t, -math.inf)
        if spec.cdf(below) < target:
            break
        t = below
    return t


def y_survival(spec: DistributionSpec, d: int, x: float) -> float:
    """P(Y > x) for Y the minimum of 2d independent passage times."""
    return spec.survival(x) ** (2 * d)


@dataclass(frozen=True)
class YStatistic:
    """Minimum passage time over the 2d edges incident to a point."""
    value: float


@dataclass(frozen=True)
class WeightField:
    """
    Lazily realized i.i.d. passage times.

    weight(e) depends only on (seed, e), so any number of threads may query
    the same field and see identical values.
    """
    seed: int
    spec: DistributionSpec
    dimension: int

    def __post_init__(self):
        check_dimension(self.dimension)

    def uniform(self, edge: LatticeEdge) -> float:
        h = splitmix64(self.seed & MASK64)
        for c in edge.base:
            h = splitmix64(h ^ (c & MASK64))
        h = splitmix64(h ^ edge.axis)
        return uniform_from_hash(h)

    def weight(self, edge: LatticeEdge) -> float:
        return quantize(self.spec.quantile(self.uniform(edge)))

    def __call__(self, edge: LatticeEdge) -> float:
        return self.weight(edge)

    def incident_weights(self, z: Point) -> Tuple[float, ...]:
        return tuple(self.weight(e) for e in incident_edges(z))

    def y_at(self, z: Point) -> YStatistic:
        return YStatistic(min(self.incident_weights(z)))

    @property
    def min_weight(self) -> float:
        """Lower bound on every weight of the field."""
        return quantize(self.spec.support_min)

    def with_seed(self, seed: int) -> 'WeightField':
        return WeightField(seed, self.spec, self.dimension)


@dataclass(frozen=True)
class PinnedWeightField(WeightField):
    """A field whose listed edges carry fixed weights; all others come from the hash."""
    pins: Tuple[Tuple[LatticeEdge, float], ...] = ()
    _table: Dict[LatticeEdge, float] = field(init=False, repr=False, compare=False, hash=False)

    def __post_init__(self):
        super().__post_init__()
        for edge, value in self.pins:
            if not value >= 0:
                raise ValueError(f"pinned weight must be nonnegative, got {value} on {edge}")
        object.__setattr__(self, '_table', dict(self.pins))

    @classmethod
    def pin(cls, base: WeightField, pins: Mapping[LatticeEdge, float]) -> 'PinnedWeightField':
        merged = dict(base.pins) if isinstance(base, PinnedWeightField) else {}
        merged.update(pins)
        return cls(base.seed, base.spec, base.dimension, tuple(sorted(merged.items())))

    def weight(self, edge: LatticeEdge) -> float:
        pinned = self._table.get(edge)
        if pinned is not None:
            return pinned
        return super().weight(edge)

    @property
    def min_weight(self) -> float:
        values = [super().min_weight] + [v for _, v in self.pins]
        return min(values)

    def with_seed(self, seed: int) -> 'PinnedWeightField':
        return PinnedWeightField(seed, self.spec, self.dimension, self.pins)


# Moment utilities

@dataclass(frozen=True)
class RestrictedMoment:
    """Both sides of E[X^a 1{X > t}] = t^a P(X > t) + a * int_t^inf x^(a-1) P(X > x) dx."""
    direct: float
    formula: float
    samples: int

    @property
    def relative_gap(self) -> float:
        scale = max(abs(self.direct), abs(self.formula))
        return 0.0 if scale == 0 else abs(self.direct - self.formula) / scale


def restricted_moment(samples: Sequence[float], alpha: float, a: float) -> RestrictedMoment:
    """
    Evaluate the restricted-moment identity on an empirical law.

    The integral runs over the empirical tail, which is a step function, so
    it is summed exactly piece by piece.

    Args:
        samples: Nonnegative sample values
        alpha: Exponent, > 0
        a: Threshold, >= 0

    Returns:
        RestrictedMoment with the direct average and the right-hand side

    Raises:
        EmptySampleError: If samples is empty
    """
    if alpha <= 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    if a < 0:
        raise ValueError(f"threshold must be nonnegative, got {a}")
    x = np.asarray(samples, dtype=float)
    if x.size == 0:
        raise EmptySampleError("restricted_moment needs at least one sample")
    if np.any(x < 0):
        raise ValueError("samples must be nonnegative")

    n = x.size
    above = np.sort(x[x > a])
    k = above.size
    direct = float(np.sum(above ** alpha) / n)

    head = (a ** alpha) * k / n
    if k == 0:
        return RestrictedMoment(direct=direct, formula=head, samples=n)
    breakpoints = np.concatenate(([a], above)) ** alpha
    # Between the j-th and (j+1)-th breakpoint, k - j samples exceed x
    remaining = k - np.arange(k)
    integral = float(np.sum(remaining * np.diff(breakpoints)) / n)
    return RestrictedMoment(direct=direct, formula=head + integral, samples=n)


def restricted_moment_exact(spec: DistributionSpec, alpha: float, a: float) -> float:
    """Right-hand side of the restricted-moment identity under the exact law."""
    if alpha <= 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    head = (a ** alpha) * spec.survival(a)
    upper = spec.support_max
    if upper <= a:
        return head
    # Split at the jumps of the survival function
    cuts = [a] + sorted({p for p in (spec.support_min, 1.0) if a < p < upper}) + [upper]
    total = 0.0
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        value, _ = integrate.quad(
            lambda t: t ** (alpha - 1) * spec.survival(t), lo, hi, limit=200
        )
        total += value
    return head + alpha * total


@dataclass(frozen=True)
class MinMomentReport:
    """Monte Carlo check of E[(min_L S)^beta] <= N^(L+beta) (1 + beta/alpha E[(min_K tau)^alpha]^(L/K))."""
    K: int
    L: int
    alpha: float
    beta: float
    N: int
    lhs: MeanCI
    min_moment: MeanCI
    rhs: float
    rhs_lower: float
    rhs_upper: float
    holds: bool

    def to_dict(self) -> Dict[str, Any]:
        return {
            'K': self.K, 'L': self.L, 'alpha': self.alpha, 'beta': self.beta, 'N': self.N,
            'lhs': self.lhs.to_dict(), 'min_moment': self.min_moment.to_dict(),
            'rhs': self.rhs, 'rhs_lower': self.rhs_lower, 'rhs_upper': self.rhs_upper,
            'holds': self.holds,
        }


def _min_moment_rhs(m: float, K: int, L: int, alpha: float, beta: float, N: int) -> float:
    return N ** (L + beta) * (1.0 + (beta / alpha) * max(m, 0.0) ** (L / K))


def min_moment_rhs(m: float, K: int, L: int, alpha: float, beta: float, N: int = 1) -> float:
    """Right side of the min-moment inequality for E[(min_K tau)^alpha] = m."""
    return _min_moment_rhs(m, K, L, alpha, beta, N)


def min_moment_samples(
    spec: DistributionSpec, K: int, L: int, alpha: float, beta: float, N: int, replicas: int, seed: int,
) -> Tuple[np.ndarray, np.ndarray]:
    """Draws of (min over L sums of N passage times)^beta and (min of K passage times)^alpha."""
    rng = np.random.default_rng(seed)
    sums = spec.sample_quantiles(rng.random((replicas, L, N))).sum(axis=2)
    mins = spec.sample_quantiles(rng.random((replicas, K))).min(axis=1)
    return sums.min(axis=1) ** beta, mins ** alpha


def min_moment_check(
    spec: DistributionSpec,
    K: int,
    L: int,
    alpha: float,
    beta: float,
    N: int = 1,
    replicas: int = 100_000,
    seed: int = 0,
    confidence: float = 0.95,
) -> MinMomentReport:
    """
    Compare both sides of the min-of-i.i.d. moment inequality by simulation.

    The left side draws L independent sums of N passage times and takes the
    beta-th power of their minimum; the right side uses the alpha-th moment
    of the minimum of K passage times.

    Raises:
        InvalidExponentsError: If beta*K > alpha*L
    """
    if not L >= K >= 1:
        raise ValueError(f"need L >= K >= 1, got K={K}, L={L}")
    if N < 1:
        raise ValueError(f"N must be at least 1, got {N}")
    if alpha <= 0 or beta <= 0:
        raise ValueError(f"exponents must be positive, got alpha={alpha}, beta={beta}")
    if beta * K > alpha * L:
        raise InvalidExponentsError(f"beta*K = {beta * K} exceeds alpha*L = {alpha * L}")
    if replicas < 2:
        raise ValueError(f"replicas must be at least 2, got {replicas}")

    lhs_values, moment_values = min_moment_samples(spec, K, L, alpha, beta, N, replicas, seed)
    lhs = mean_interval(lhs_values, confidence)
    moment = mean_interval(moment_values, confidence)

    rhs = _min_moment_rhs(moment.mean, K, L, alpha, beta, N)
    lo_m = moment.lower if math.isfinite(moment.lower) else moment.mean
    hi_m = moment.upper if math.isfinite(moment.upper) else moment.mean
    rhs_lower = _min_moment_rhs(lo_m, K, L, alpha, beta, N)
    rhs_upper = _min_moment_rhs(hi_m, K, L, alpha, beta, N)
    lhs_low = lhs.lower if math.isfinite(lhs.lower) else lhs.mean
    holds = lhs_low <= rhs_upper

    logger.info(
        f"Min-moment check {spec.kind} K={K} L={L} alpha={alpha} beta={beta} N={N}: "
        f"lhs={lhs.mean:.4g} rhs={rhs:.4g} holds={holds}"
    )
    return MinMomentReport(
        K=K, L=L, alpha=alpha, beta=beta, N=N,
        lhs=lhs, min_moment=moment,
        rhs=rhs, rhs_lower=rhs_lower, rhs_upper=rhs_upper, holds=holds,
    )
