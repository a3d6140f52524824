"""
Statistics shared by the estimators and the harness.

Provides:
- StatBlock: mergeable count/moment accumulator with exact rational sums
- Wilson score intervals for proportions and Student-t intervals for means
- Log-linear and log-log tail fits
- Nested partial-sum trend diagnostics
"""

import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy import stats as sps

logger = logging.getLogger(__name__)

PROPORTION = "proportion"
MEAN = "mean"


def z_score(confidence: float) -> float:
    """Two-sided normal quantile for a confidence level."""
    if not 0.0 < confidence < 1.0:
        raise ValueError(f"confidence must be in (0, 1), got {confidence}")
    return float(sps.norm.ppf(0.5 + confidence / 2.0))


def wilson_interval(successes: int, trials: int, confidence: float = 0.95) -> Tuple[float, float]:
    """
    Wilson score interval for a binomial proportion.

    Args:
        successes: Number of successes k
        trials: Number of trials n
        confidence: Two-sided confidence level

    Returns:
        (lower, upper), always inside [0, 1] and containing k/n
    """
    if trials == 0:
        return (0.0, 1.0)
    if not 0 <= successes <= trials:
        raise ValueError(f"successes must be within [0, {trials}], got {successes}")

    z = z_score(confidence)
    p_hat = successes / trials
    denominator = 1 + z ** 2 / trials
    center = (p_hat + z ** 2 / (2 * trials)) / denominator
    margin = (z / denominator) * math.sqrt(
        p_hat * (1 - p_hat) / trials + z ** 2 / (4 * trials ** 2)
    )

    lower = max(0.0, min(center - margin, p_hat))
    upper = min(1.0, max(center + margin, p_hat))
    return (lower, upper)


@dataclass(frozen=True)
class MeanCI:
    """Sample mean with a two-sided Student-t interval."""
    mean: float
    lower: float
    upper: float
    sd: float
    n: int

    @property
    def half_width(self) -> float:
        return (self.upper - self.lower) / 2.0

    def to_dict(self) -> Dict[str, Any]:
        return {
            'mean': self.mean, 'lower': self.lower, 'upper': self.upper,
            'sd': self.sd, 'n': self.n,
        }


def _t_interval(n: int, mean: float, variance: float, confidence: float) -> Tuple[float, float, float]:
    if n < 2:
        return (math.nan, math.nan, math.nan)
    sd = math.sqrt(max(variance, 0.0))
    t = float(sps.t.ppf(0.5 + confidence / 2.0, n - 1))
    half = t * sd / math.sqrt(n)
    return (mean - half, mean + half, sd)


def mean_interval(values: Sequence[float], confidence: float = 0.95) -> MeanCI:
    """
    Mean of a sample with a Student-t interval.

    Raises:
        ValueError: If values is empty
    """
    arr = np.asarray(values, dtype=float)
    if arr.size == 0:
        raise ValueError("mean_interval needs at least one value")
    mean = float(arr.mean())
    variance = float(arr.var(ddof=1)) if arr.size > 1 else 0.0
    lower, upper, sd = _t_interval(arr.size, mean, variance, confidence)
    return MeanCI(mean=mean, lower=lower, upper=upper, sd=sd, n=int(arr.size))


def _fraction_to_str(x: Fraction) -> str:
    return f"{x.numerator}/{x.denominator}"


def _fraction_from_str(text: str) -> Fraction:
    return Fraction(text)


@dataclass(frozen=True)
class StatBlock:
    """
    Mergeable statistic.

    A proportion block counts successes k out of n trials. A mean block keeps
    the exact rational sum and sum of squares of its samples, so pooling is
    associative and commutative down to the last bit.
    """
    kind: str
    n: int = 0
    k: int = 0
    total: Fraction = field(default_factory=Fraction)
    total_sq: Fraction = field(default_factory=Fraction)

    @classmethod
    def proportion(cls, successes: int, trials: int) -> 'StatBlock':
        if not 0 <= successes <= trials:
            raise ValueError(f"successes must be within [0, {trials}], got {successes}")
        return cls(kind=PROPORTION, n=trials, k=successes)

    @classmethod
    def from_indicators(cls, flags: Iterable[bool]) -> 'StatBlock':
        flags = list(flags)
        return cls.proportion(sum(1 for f in flags if f), len(flags))

    @classmethod
    def from_values(cls, values: Iterable[float]) -> 'StatBlock':
        total = Fraction(0)
        total_sq = Fraction(0)
        n = 0
        for v in values:
            if not math.isfinite(v):
                raise ValueError(f"mean blocks accept finite values only, got {v}")
            f = Fraction(v)
            total += f
            total_sq += f * f
            n += 1
        return cls(kind=MEAN, n=n, total=total, total_sq=total_sq)

    def merge(self, other: 'StatBlock') -> 'StatBlock':
        if self.kind != other.kind:
            raise ValueError(f"cannot merge {self.kind} block with {other.kind} block")
        return StatBlock(
            kind=self.kind,
            n=self.n + other.n,
            k=self.k + other.k,
            total=self.total + other.total,
            total_sq=self.total_sq + other.total_sq,
        )

    @property
    def estimate(self) -> float:
        if self.n == 0:
            return math.nan
        if self.kind == PROPORTION:
            return self.k / self.n
        return float(self.total / self.n)

    @property
    def variance(self) -> float:
        """Unbiased sample variance (mean blocks)."""
        if self.kind != MEAN or self.n < 2:
            return math.nan
        n = self.n
        return float((self.total_sq - self.total * self.total / n) / (n - 1))

    def interval(self, confidence: float = 0.95) -> Tuple[float, float]:
        if self.kind == PROPORTION:
            return wilson_interval(self.k, self.n, confidence)
        if self.n == 0:
            return (math.nan, math.nan)
        lower, upper, _ = _t_interval(self.n, self.estimate, self.variance, confidence)
        return (lower, upper)

    def half_width(self, confidence: float = 0.95) -> float:
        lower, upper = self.interval(confidence)
        return (upper - lower) / 2.0

    def columns(self, name: str, confidence: float = 0.95) -> Dict[str, Any]:
        """CSV columns for this block, prefixed with name."""
        lower, upper = self.interval(confidence)
        if self.kind == PROPORTION:
            return {
                f"{name}_n": self.n,
                f"{name}_k": self.k,
                f"{name}_p": self.estimate,
                f"{name}_lo": lower,
                f"{name}_hi": upper,
            }
        sd = math.sqrt(self.variance) if self.n > 1 else math.nan
        return {
            f"{name}_n": self.n,
            f"{name}_mean": self.estimate,
            f"{name}_sd": sd,
            f"{name}_lo": lower,
            f"{name}_hi": upper,
        }

    def to_dict(self) -> Dict[str, Any]:
        if self.kind == PROPORTION:
            return {'kind': self.kind, 'n': self.n, 'k': self.k}
        return {
            'kind': self.kind,
            'n': self.n,
            'sum': _fraction_to_str(self.total),
            'sum_sq': _fraction_to_str(self.total_sq),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'StatBlock':
        kind = data['kind']
        if kind == PROPORTION:
            return cls.proportion(int(data['k']), int(data['n']))
        if kind == MEAN:
            return cls(
                kind=MEAN,
                n=int(data['n']),
                total=_fraction_from_str(data['sum']),
                total_sq=_fraction_from_str(data['sum_sq']),
            )
        raise ValueError(f"unknown stat block kind: {kind}")


# Tail fits

@dataclass(frozen=True)
class FitResult:
    """Least-squares line through transformed tail points."""
    slope: float
    intercept: float
    r_squared: float
    points: int

    def to_dict(self) -> Dict[str, Any]:
        return {
            'slope': self.slope, 'intercept': self.intercept,
            'r_squared': self.r_squared, 'points': self.points,
        }


def _fit(xs: Sequence[float], ys: Sequence[float]) -> Optional[FitResult]:
    if len(xs) < 2 or len(set(xs)) < 2:
        return None
    result = sps.linregress(np.asarray(xs, dtype=float), np.asarray(ys, dtype=float))
    r = float(result.rvalue)
    return FitResult(
        slope=float(result.slope),
        intercept=float(result.intercept),
        r_squared=r * r if math.isfinite(r) else math.nan,
        points=len(xs),
    )


def log_linear_fit(xs: Sequence[float], probabilities: Sequence[float]) -> Optional[FitResult]:
    """Fit log p against x over the points with p > 0."""
    pairs = [(x, math.log(p)) for x, p in zip(xs, probabilities) if p > 0]
    return _fit([x for x, _ in pairs], [y for _, y in pairs])


def log_log_fit(xs: Sequence[float], probabilities: Sequence[float]) -> Optional[FitResult]:
    """Fit log p against log x over the points with x > 0 and p > 0."""
    pairs = [(math.log(x), math.log(p)) for x, p in zip(xs, probabilities) if p > 0 and x > 0]
    return _fit([x for x, _ in pairs], [y for _, y in pairs])


# Summability diagnostics

CONVERGING = "converging"
DIVERGING = "diverging"
UNDETERMINED = "undetermined"


@dataclass(frozen=True)
class TrendResult:
    """Increments of nested partial sums and their successive ratios."""
    partial_sums: Tuple[float, ...]
    increments: Tuple[float, ...]
    ratios: Tuple[float, ...]
    trend: str

    def to_dict(self) -> Dict[str, Any]:
        return {
            'partial_sums': list(self.partial_sums),
            'increments': list(self.increments),
            'ratios': list(self.ratios),
            'trend': self.trend,
        }


def increment_trend(partial_sums: Sequence[float], threshold: float = 0.9) -> TrendResult:
    """
    Classify nested partial sums by their increment ratios.

    Increments are differences of consecutive partial sums. Converging when
    every ratio of consecutive increments is at most threshold, diverging
    otherwise; undetermined with fewer than two increments. 0/0 counts as 0.
    """
    sums = tuple(float(s) for s in partial_sums)
    increments = tuple(s - prev for prev, s in zip(sums[:-1], sums[1:]))
    ratios: List[float] = []
    for prev, nxt in zip(increments[:-1], increments[1:]):
        if prev > 0:
            ratios.append(nxt / prev)
        elif nxt <= 0:
            ratios.append(0.0)
        else:
            ratios.append(math.inf)
    if not ratios:
        trend = UNDETERMINED
    elif all(r <= threshold for r in ratios):
        trend = CONVERGING
    else:
        trend = DIVERGING
    return TrendResult(sums, increments, tuple(ratios), trend)
