"""Discrete-event simulation of the closed (virtual-user) and open (Poisson) single-queue systems.

The server is one FIFO queue, so a request's departure is fixed by the Lindley
recursion the moment it arrives. The closed loop therefore only needs a heap of
the next arrival instant per generator.
"""

from __future__ import annotations

import enum
import heapq
import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .core import (
    InsufficientDataError,
    InvalidParameterError,
    MeasurementWindow,
    QueueMetrics,
    ThinkDistribution,
    WorkloadPoint,
    draw_think_times,
)
from .logfmt import ArrivalLog

_BATCH = 1 << 14


class Mode(str, enum.Enum):
    CLOSED = "closed"
    OPEN = "open"


class ServiceDistribution(str, enum.Enum):
    EXPONENTIAL = "exponential"
    CONSTANT = "constant"


class ZPolicy(str, enum.Enum):
    FIXED_Z = "fixed_z"
    SCALED_Z = "scaled_z"


@dataclass(frozen=True)
class SimConfig:
    workload: WorkloadPoint
    service_time_mean: float
    horizon: float
    seed: int
    service_distribution: ServiceDistribution = ServiceDistribution.EXPONENTIAL
    mode: Mode = Mode.CLOSED
    open_arrival_rate: float = 0.0
    trim_head_fraction: float = 0.05
    label: str = "req"
    epoch_ms: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode(self.mode))
        object.__setattr__(self, "service_distribution", ServiceDistribution(self.service_distribution))
        if not self.horizon > 0:
            raise InvalidParameterError(f"horizon must be > 0, got {self.horizon}")
        if not self.service_time_mean > 0:
            raise InvalidParameterError(f"service_time_mean must be > 0, got {self.service_time_mean}")
        if not 0 <= self.trim_head_fraction < 1:
            raise InvalidParameterError("trim_head_fraction must be in [0, 1)")
        if self.mode is Mode.OPEN and not self.open_arrival_rate > 0:
            raise InvalidParameterError("open mode needs open_arrival_rate > 0")


@dataclass
class SimResult:
    log: ArrivalLog
    measured: QueueMetrics  # over the trimmed window
    window: MeasurementWindow
    full: QueueMetrics  # over [0, horizon]
    arrivals: np.ndarray  # seconds, in arrival order
    departures: np.ndarray
    generators: np.ndarray

    @property
    def in_window(self) -> np.ndarray:
        return (self.arrivals >= self.window.start) & (self.arrivals < self.window.end)

    def gaps(self) -> np.ndarray:
        """Inter-arrival gaps (seconds) of the arrivals inside the window."""
        return np.diff(self.arrivals[self.in_window])


@dataclass(frozen=True)
class LoadLinePoint:
    n: int
    z: float
    concurrency: float  # time-averaged Q
    arrival_rate: float  # A/T
    slope: float  # d(lambda)/dq of the state-conditional line
    lambda_intercept: float
    q_intercept: float


class _Variates:
    """Batched variate stream; the draw order depends only on the seed."""

    def __init__(self, draw):
        self._draw = draw
        self._buf = np.empty(0)
        self._i = 0

    def next(self) -> float:
        if self._i >= self._buf.size:
            self._buf = self._draw(_BATCH)
            self._i = 0
        v = self._buf[self._i]
        self._i += 1
        return float(v)


def _service_sampler(cfg: SimConfig, rng: np.random.Generator):
    s = cfg.service_time_mean
    if cfg.service_distribution is ServiceDistribution.CONSTANT:
        return lambda k: np.full(k, s)
    return lambda k: rng.exponential(s, k)


def _simulate_closed(cfg: SimConfig):
    wp = cfg.workload
    think_rng, service_rng = (np.random.default_rng(s) for s in np.random.SeedSequence(cfg.seed).spawn(2))
    think = _Variates(lambda k: draw_think_times(wp.think_distribution, wp.think_time_mean, think_rng, k))
    service = _Variates(_service_sampler(cfg, service_rng))

    heap = [(think.next(), g) for g in range(wp.n_generators)]
    heapq.heapify(heap)
    arr, dep, gen = [], [], []
    last_dep = 0.0
    horizon = cfg.horizon
    while heap:
        t, g = heapq.heappop(heap)
        if t >= horizon:
            break
        d = (t if t > last_dep else last_dep) + service.next()
        last_dep = d
        arr.append(t)
        dep.append(d)
        gen.append(g)
        heapq.heappush(heap, (d + think.next(), g))
    return np.array(arr), np.array(dep), np.array(gen, dtype=np.int64)


def _simulate_open(cfg: SimConfig):
    arrival_rng, service_rng = (np.random.default_rng(s) for s in np.random.SeedSequence(cfg.seed).spawn(2))
    mean_gap = 1.0 / cfg.open_arrival_rate
    chunks = []
    t = 0.0
    while True:
        c = t + np.cumsum(arrival_rng.exponential(mean_gap, _BATCH))
        if c[-1] >= cfg.horizon:
            chunks.append(c[c < cfg.horizon])
            break
        chunks.append(c)
        t = c[-1]
    arr = np.concatenate(chunks)
    svc = _service_sampler(cfg, service_rng)(arr.size)
    dep = np.empty_like(arr)
    last = 0.0
    for k, (a, s) in enumerate(zip(arr.tolist(), svc.tolist())):
        last = (a if a > last else last) + s
        dep[k] = last
    return arr, dep, np.zeros(arr.size, dtype=np.int64)


def _step_integral(arr: np.ndarray, dep: np.ndarray, start: float, end: float) -> float:
    """Integral of the number-in-system step function over [start, end]."""
    times = np.concatenate([arr, dep])
    steps = np.concatenate([np.ones(arr.size), -np.ones(dep.size)])
    order = np.argsort(times, kind="stable")
    times, steps = times[order], steps[order]
    level = np.cumsum(steps)
    # level[i] holds on [times[i], times[i+1])
    seg_start = np.clip(times, start, end)
    seg_end = np.clip(np.append(times[1:], end), start, end)
    return float(np.sum(level * (seg_end - seg_start)))


def _metrics(arr, dep, start, end, think_mean) -> tuple[QueueMetrics, MeasurementWindow]:
    inside = (arr >= start) & (arr < end)
    a = int(inside.sum())
    c = int(((dep >= start) & (dep < end)).sum())
    window = MeasurementWindow(start=start, end=end, arrival_count=a, completion_count=c)
    t = window.duration
    resid = dep[inside] - arr[inside]
    # service time of each request: departure minus max(arrival, previous departure)
    prev_dep = np.concatenate([[0.0], dep[:-1]])
    svc = (dep - np.maximum(arr, prev_dep))[inside]
    r = float(resid.mean()) if a else math.nan
    s = float(svc.mean()) if a else math.nan
    m = QueueMetrics(
        arrival_rate=a / t,
        throughput=c / t,
        residence_time=r,
        waiting_time=r - s,
        service_time=s,
        concurrency=_step_integral(arr, dep, start, end) / t,
        round_trip_time=r + think_mean,
    )
    return m, window


def simulate(config: SimConfig) -> SimResult:
    if config.mode is Mode.CLOSED:
        arr, dep, gen = _simulate_closed(config)
        think_mean = config.workload.think_time_mean
    else:
        arr, dep, gen = _simulate_open(config)
        think_mean = 0.0
    start = config.trim_head_fraction * config.horizon
    n_window = int(((arr >= start) & (arr < config.horizon)).sum())
    if arr.size < 2 or n_window < 2:
        raise InsufficientDataError(
            f"horizon {config.horizon} s produced {n_window} arrivals in the measurement window; need >= 2"
        )
    measured, window = _metrics(arr, dep, start, config.horizon, think_mean)
    full, _ = _metrics(arr, dep, 0.0, config.horizon, think_mean)
    log = ArrivalLog(
        config.epoch_ms + arr * 1000.0,
        config.label,
        (dep - arr) * 1000.0,
        gen,
        source_label=config.workload.label or config.mode.value,
    )
    return SimResult(log=log, measured=measured, window=window, full=full, arrivals=arr, departures=dep, generators=gen)


def state_arrival_rates(result: SimResult) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Arrival rate conditioned on the instantaneous number in system.

    Returns ``(q, rate, time_in_state)`` for every state visited inside the
    window. For exponential think times the closed system gives (N - q)/Z.
    """
    arr, dep = result.arrivals, result.departures
    start, end = result.window.start, result.window.end
    times = np.concatenate([arr, dep])
    steps = np.concatenate([np.ones(arr.size, dtype=np.int64), -np.ones(dep.size, dtype=np.int64)])
    order = np.argsort(times, kind="stable")
    times, steps = times[order], steps[order]
    level = np.cumsum(steps)
    before = level - steps
    seg_start = np.clip(times, start, end)
    seg_end = np.clip(np.append(times[1:], end), start, end)
    dur = seg_end - seg_start
    top = int(level.max()) + 1
    time_in = np.bincount(level, weights=dur, minlength=top)
    is_arrival = (steps > 0) & (times >= start) & (times < end)
    counts = np.bincount(before[is_arrival], minlength=top)
    visited = time_in > 0
    q = np.nonzero(visited)[0]
    return q, counts[visited] / time_in[visited], time_in[visited]


def fit_state_line(q: np.ndarray, rate: np.ndarray, weight: np.ndarray) -> tuple[float, float, float]:
    """Weighted least-squares line through state-conditional rates: (slope, lambda-intercept, q-intercept)."""
    w = weight / weight.sum()
    qm = float(np.sum(w * q))
    rm = float(np.sum(w * rate))
    var = float(np.sum(w * (q - qm) ** 2))
    if var == 0:
        return 0.0, rm, math.inf
    slope = float(np.sum(w * (q - qm) * (rate - rm))) / var
    intercept = rm - slope * qm
    q_int = -intercept / slope if slope != 0 else math.inf
    return slope, intercept, q_int


def load_line(
    template: SimConfig,
    n_values: Sequence[int],
    z_policy: ZPolicy | str,
    lambda_rat: float | None = None,
) -> list[LoadLinePoint]:
    """One simulated point per N.

    ``fixed_z`` keeps the template's Z; ``scaled_z`` sets Z = N/lambda_rat
    (lambda_rat defaults to the template's N/Z). Each point carries the
    time-averaged (Q, lambda) of its run plus the fitted state-conditional
    line lambda(q), whose slope is -1/Z.
    """
    if not n_values:
        raise InvalidParameterError("n_values must be nonempty")
    z_policy = ZPolicy(z_policy)
    wp = template.workload
    if z_policy is ZPolicy.SCALED_Z and lambda_rat is None:
        lambda_rat = wp.ratio
    out = []
    for n in n_values:
        z = wp.think_time_mean if z_policy is ZPolicy.FIXED_Z else n / lambda_rat
        cfg = replace(template, workload=replace(wp, n_generators=int(n), think_time_mean=z), mode=Mode.CLOSED)
        res = simulate(cfg)
        slope, lam0, q0 = fit_state_line(*state_arrival_rates(res))
        out.append(LoadLinePoint(
            n=int(n), z=z, concurrency=res.measured.concurrency, arrival_rate=res.measured.arrival_rate,
            slope=slope, lambda_intercept=lam0, q_intercept=q0,
        ))
    return out


def closed_config(n: int, z: float, s: float, horizon: float, seed: int,
                  think: ThinkDistribution | str = ThinkDistribution.EXPONENTIAL,
                  service: ServiceDistribution | str = ServiceDistribution.EXPONENTIAL) -> SimConfig:
    return SimConfig(
        workload=WorkloadPoint(n, z, ThinkDistribution(think)),
        service_time_mean=s, horizon=horizon, seed=seed, service_distribution=ServiceDistribution(service),
    )
