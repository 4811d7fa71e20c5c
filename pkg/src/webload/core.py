"""Shared domain types, think-time variates and gap statistics."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np


class WebloadError(Exception):
    """Base class for all toolkit errors."""


class InvalidParameterError(WebloadError, ValueError):
    pass


class InsufficientDataError(WebloadError):
    pass


class UndefinedCoVError(WebloadError):
    """Raised when every gap is zero, so the mean is zero."""


class ThinkDistribution(str, enum.Enum):
    EXPONENTIAL = "exponential"
    UNIFORM = "uniform"
    CONSTANT = "constant"


def make_rng(seed: int | None) -> np.random.Generator:
    return np.random.default_rng(seed)


@dataclass(frozen=True)
class WorkloadPoint:
    """One driver configuration: N generators thinking for Z seconds on average."""

    n_generators: int
    think_time_mean: float
    think_distribution: ThinkDistribution = ThinkDistribution.EXPONENTIAL
    label: str = ""

    def __post_init__(self):
        if int(self.n_generators) != self.n_generators or self.n_generators < 1:
            raise InvalidParameterError(f"n_generators must be a positive integer, got {self.n_generators}")
        if not self.think_time_mean >= 0:
            raise InvalidParameterError(f"think_time_mean must be >= 0, got {self.think_time_mean}")
        object.__setattr__(self, "think_distribution", ThinkDistribution(self.think_distribution))

    @property
    def ratio(self) -> float:
        """N/Z, the asymptotic request rate the driver asks for."""
        if self.think_time_mean == 0:
            return math.inf
        return self.n_generators / self.think_time_mean


@dataclass(frozen=True)
class QueueMetrics:
    arrival_rate: float
    throughput: float
    residence_time: float
    waiting_time: float
    service_time: float
    concurrency: float
    round_trip_time: float


@dataclass(frozen=True)
class Bounds:
    s_max: float
    lambda_sat: float
    lambda_rat: float

    @property
    def feasible(self) -> bool:
        return self.lambda_rat <= self.lambda_sat


@dataclass(frozen=True)
class MeasurementWindow:
    start: float
    end: float
    arrival_count: int
    completion_count: int

    def __post_init__(self):
        if not self.end > self.start:
            raise InvalidParameterError(f"window must have positive duration, got [{self.start}, {self.end}]")
        if self.arrival_count < 0 or self.completion_count < 0:
            raise InvalidParameterError("counts must be nonnegative")

    @property
    def duration(self) -> float:
        return self.end - self.start

    def imbalance(self) -> float:
        return abs(self.arrival_count - self.completion_count) / max(self.arrival_count, 1)

    def is_steady(self, tolerance: float = 0.02) -> bool:
        return self.imbalance() < tolerance


@dataclass(frozen=True)
class InterArrivalStats:
    sample_count: int
    mean: float
    std_dev: float
    cov: float


def draw_think_time(dist: ThinkDistribution | str, mean: float, rng: np.random.Generator) -> float:
    """Draw one think-time variate in seconds.

    Uniform variates lie on [0, 2*mean] so that their mean is ``mean``.
    """
    if not mean >= 0:
        raise InvalidParameterError(f"think-time mean must be >= 0, got {mean}")
    dist = ThinkDistribution(dist)
    if mean == 0:
        return 0.0
    if dist is ThinkDistribution.CONSTANT:
        return float(mean)
    if dist is ThinkDistribution.UNIFORM:
        return float(rng.uniform(0.0, 2.0 * mean))
    return float(rng.exponential(mean))


def draw_think_times(dist: ThinkDistribution | str, mean: float, rng: np.random.Generator, size: int) -> np.ndarray:
    """Vectorised form of :func:`draw_think_time`."""
    if not mean >= 0:
        raise InvalidParameterError(f"think-time mean must be >= 0, got {mean}")
    dist = ThinkDistribution(dist)
    if mean == 0 or dist is ThinkDistribution.CONSTANT:
        return np.full(size, float(mean))
    if dist is ThinkDistribution.UNIFORM:
        return rng.uniform(0.0, 2.0 * mean, size)
    return rng.exponential(mean, size)


def summarize_gaps(gaps: Sequence[float] | np.ndarray) -> InterArrivalStats:
    g = np.asarray(gaps, dtype=float)
    if g.size == 0:
        raise InsufficientDataError("no gaps to summarize")
    if np.any(g < 0):
        raise InvalidParameterError("gaps must be nonnegative")
    mean = float(g.mean())
    if mean == 0:
        raise UndefinedCoVError("all gaps are zero; CoV is undefined")
    sd = float(g.std(ddof=1)) if g.size > 1 else 0.0
    return InterArrivalStats(sample_count=int(g.size), mean=mean, std_dev=sd, cov=sd / mean)


# Appendix-style reference distributions. Sampling only; nothing else depends on them.

def draw_geometric(p: float, rng: np.random.Generator, size: int | None = None):
    """Number of Bernoulli(p) trials up to and including the first success."""
    if not 0 < p <= 1:
        raise InvalidParameterError(f"p must be in (0, 1], got {p}")
    return rng.geometric(p, size)


def draw_binomial(n: int, p: float, rng: np.random.Generator, size: int | None = None):
    if n < 0 or not 0 <= p <= 1:
        raise InvalidParameterError(f"invalid binomial parameters n={n}, p={p}")
    return rng.binomial(n, p, size)


def draw_poisson(mean: float, rng: np.random.Generator, size: int | None = None):
    if mean < 0:
        raise InvalidParameterError(f"mean must be >= 0, got {mean}")
    return rng.poisson(mean, size)
