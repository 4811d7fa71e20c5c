"""Closed-loop load testing that emulates open web traffic.

Scale each generator's think time with the number of generators so N/Z stays
fixed, then confirm the arrivals look Poisson (inter-arrival CoV near 1).
"""

from .analytic import (
    ClosedModel,
    arrival_rate_identity,
    bounds,
    response_asymptote,
    response_curve,
    solve_closed,
    solve_open,
)
from .core import (
    Bounds,
    InterArrivalStats,
    MeasurementWindow,
    QueueMetrics,
    ThinkDistribution,
    WorkloadPoint,
    draw_think_time,
    summarize_gaps,
)
from .logfmt import ArrivalLog, RunRecord

__version__ = "0.1.0"

__all__ = [
    "ArrivalLog",
    "Bounds",
    "ClosedModel",
    "InterArrivalStats",
    "MeasurementWindow",
    "QueueMetrics",
    "RunRecord",
    "ThinkDistribution",
    "WorkloadPoint",
    "arrival_rate_identity",
    "bounds",
    "draw_think_time",
    "response_asymptote",
    "response_curve",
    "solve_closed",
    "solve_open",
    "summarize_gaps",
]
