"""Analytic solvers: the closed repairman queue (exact MVA) and the open M/M/1 queue."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Iterable, Sequence

from .core import Bounds, InvalidParameterError, QueueMetrics, WebloadError, WorkloadPoint


class InfeasibleStateError(WebloadError, ValueError):
    """The requested state would imply a negative arrival rate."""


class SaturationError(WebloadError, ValueError):
    """Offered load is at or beyond the server's capacity."""


SATURATION_MARGIN = 1e-9
SWEEP_COLUMNS = ("N", "Z", "lambda", "R", "Q", "lambda_rat", "lambda_sat")


@dataclass(frozen=True)
class ClosedModel:
    service_demand: float
    workload: WorkloadPoint

    def __post_init__(self):
        if not self.service_demand > 0:
            raise InvalidParameterError(f"service_demand must be > 0, got {self.service_demand}")


@dataclass
class SweepResult:
    points: list[tuple[WorkloadPoint, QueueMetrics]]
    bounds: Bounds

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(SWEEP_COLUMNS)
        for wp, m in self.points:
            lam_rat = wp.ratio
            w.writerow([
                wp.n_generators, _fmt(wp.think_time_mean), _fmt(m.arrival_rate), _fmt(m.residence_time),
                _fmt(m.concurrency), _fmt(lam_rat), _fmt(self.bounds.lambda_sat),
            ])
        return buf.getvalue()


def _fmt(x: float) -> str:
    return f"{x:.6f}"


def _mva(n: int, s: float, z: float) -> tuple[float, float, float]:
    """Exact MVA for one queueing centre plus a delay centre; returns (X, R, Q) at population n."""
    q = 0.0
    x = r = 0.0
    for k in range(1, n + 1):
        r = s * (1.0 + q)
        x = k / (r + z)
        q = x * r
    return x, r, q


def solve_closed(model: ClosedModel) -> QueueMetrics:
    n = model.workload.n_generators
    z = model.workload.think_time_mean
    s = model.service_demand
    x, r, q = _mva(n, s, z)
    return QueueMetrics(
        arrival_rate=x,
        throughput=x,
        residence_time=r,
        waiting_time=r - s,
        service_time=s,
        concurrency=q,
        round_trip_time=r + z,
    )


def arrival_rate_identity(n: float, z: float, q: float) -> float:
    """Arrival rate implied by N users thinking Z on average with Q resident: (N - Q)/Z."""
    if not z > 0:
        raise InvalidParameterError(f"z must be > 0, got {z}")
    if q < 0:
        raise InvalidParameterError(f"q must be >= 0, got {q}")
    if q > n:
        raise InfeasibleStateError(f"Q={q} exceeds N={n}; arrival rate would be negative")
    return n / z - q / z


def bounds(s_max: float, n: float, z: float) -> Bounds:
    if not s_max > 0:
        raise InvalidParameterError(f"s_max must be > 0, got {s_max}")
    if not z > 0:
        raise InvalidParameterError(f"z must be > 0, got {z}")
    return Bounds(s_max=s_max, lambda_sat=1.0 / s_max, lambda_rat=n / z)


def solve_open(arrival_rate: float, service_time: float) -> QueueMetrics:
    if arrival_rate < 0 or not service_time > 0:
        raise InvalidParameterError("arrival_rate must be >= 0 and service_time > 0")
    rho = arrival_rate * service_time
    if rho > 1.0 - SATURATION_MARGIN:
        raise SaturationError(f"utilization {rho:.6g} is at or beyond saturation")
    r = service_time / (1.0 - rho)
    return QueueMetrics(
        arrival_rate=arrival_rate,
        throughput=arrival_rate,
        residence_time=r,
        waiting_time=r - service_time,
        service_time=service_time,
        concurrency=arrival_rate * r,
        round_trip_time=r,
    )


def response_curve(model: ClosedModel, n_values: Iterable[int]) -> list[tuple[int, float]]:
    """R(N) = N/X(N) - Z for each requested population.

    One MVA pass up to max(N) serves every point.
    """
    ns = sorted(set(int(n) for n in n_values))
    if not ns:
        return []
    if ns[0] < 1:
        raise InvalidParameterError("all n values must be >= 1")
    s = model.service_demand
    z = model.workload.think_time_mean
    wanted = set(ns)
    out: dict[int, float] = {}
    q = 0.0
    for k in range(1, ns[-1] + 1):
        r = s * (1.0 + q)
        x = k / (r + z)
        q = x * r
        if k in wanted:
            out[k] = k / x - z
    return [(n, out[int(n)]) for n in n_values]


def response_asymptote(n: float, s_max: float, z: float) -> float:
    if not s_max > 0:
        raise InvalidParameterError(f"s_max must be > 0, got {s_max}")
    return n * s_max - z


def sweep(service_demand: float, workloads: Sequence[WorkloadPoint]) -> SweepResult:
    """Solve each workload point; bounds use the last point's N/Z."""
    if not workloads:
        raise InvalidParameterError("no workload points to sweep")
    points = [(wp, solve_closed(ClosedModel(service_demand, wp))) for wp in workloads]
    last = workloads[-1]
    b = Bounds(s_max=service_demand, lambda_sat=1.0 / service_demand, lambda_rat=last.ratio)
    return SweepResult(points=points, bounds=b)
