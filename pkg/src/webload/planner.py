"""Test-plan construction: constant-N/Z schedules and fixed-N, shrinking-Z schedules."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from decimal import Decimal
from pathlib import Path
from typing import Sequence


from .analytic import ClosedModel, solve_closed
from .core import InvalidParameterError, ThinkDistribution, WorkloadPoint

RATIO_TOLERANCE = 1e-9
DEFAULT_Q_RATIO_THRESHOLD = 0.1


@dataclass(frozen=True)
class PlannedRun:
    workload: WorkloadPoint
    duration: float
    trim_head: float
    trim_tail: float
    run_label: str

    def __post_init__(self):
        if not self.duration > self.trim_head + self.trim_tail:
            raise InvalidParameterError(
                f"run {self.run_label!r}: duration {self.duration} s must exceed trims "
                f"{self.trim_head} + {self.trim_tail} s"
            )
        if self.trim_head < 0 or self.trim_tail < 0:
            raise InvalidParameterError("trims must be nonnegative")

    @property
    def measured_window(self) -> float:
        return self.duration - self.trim_head - self.trim_tail


@dataclass(frozen=True)
class TestPlan:
    __test__ = False  # not a pytest class

    runs: tuple[PlannedRun, ...]
    target_mix: str | None = None
    declared_lambda_rat: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "runs", tuple(self.runs))
        if not self.runs:
            raise InvalidParameterError("a plan needs at least one run")
        lam = self.declared_lambda_rat
        if lam is not None:
            for run in self.runs:
                ratio = run.workload.ratio
                if abs(ratio - lam) / lam >= RATIO_TOLERANCE:
                    raise InvalidParameterError(
                        f"run {run.run_label!r} has N/Z={ratio}, not the declared {lam}"
                    )


@dataclass(frozen=True)
class PlanWarning:
    run_label: str
    kind: str  # "lambda_rat" or "concurrency"
    message: str

    def __str__(self) -> str:
        return f"[{self.run_label}] {self.message}"


def _labels(count: int, schedule_start: str | None, schedule_step: float) -> list[str]:
    if schedule_start is None:
        return [f"run-{i + 1:02d}" for i in range(count)]
    hh, mm = (int(p) for p in schedule_start.split(":"))
    start = hh * 60 + mm
    step = int(round(schedule_step / 60))
    out = []
    for i in range(count):
        minutes = (start + i * step) % (24 * 60)
        out.append(f"{minutes // 60:02d}{minutes % 60:02d}")
    return out


def plan_scaled_z(
    lambda_rat: float,
    n_values: Sequence[int],
    run_duration: float,
    trims: tuple[float, float],
    think_distribution: ThinkDistribution | str = ThinkDistribution.EXPONENTIAL,
    target_mix: str | None = None,
    schedule_start: str | None = None,
    schedule_step: float = 1800.0,
) -> TestPlan:
    """Hold N/Z at ``lambda_rat`` by setting Z = N/lambda_rat for every N."""
    if not lambda_rat > 0:
        raise InvalidParameterError(f"lambda_rat must be > 0, got {lambda_rat}")
    ns = [int(n) for n in n_values]
    if not ns or any(b <= a for a, b in zip(ns, ns[1:])):
        raise InvalidParameterError("n_values must be nonempty and strictly increasing")
    labels = _labels(len(ns), schedule_start, schedule_step)
    runs = [
        PlannedRun(WorkloadPoint(n, n / lambda_rat, think_distribution, label), run_duration, trims[0], trims[1], label)
        for n, label in zip(ns, labels)
    ]
    return TestPlan(runs=tuple(runs), target_mix=target_mix, declared_lambda_rat=float(lambda_rat))


def plan_fixed_n(
    n: int,
    z_values: Sequence[float],
    run_duration: float,
    trims: tuple[float, float],
    think_distribution: ThinkDistribution | str = ThinkDistribution.UNIFORM,
    target_mix: str | None = None,
    schedule_start: str | None = None,
    schedule_step: float = 1800.0,
) -> TestPlan:
    """Raise the load from run to run by shortening Z with N held fixed."""
    zs = [float(z) for z in z_values]
    if not zs or any(z <= 0 for z in zs) or any(b >= a for a, b in zip(zs, zs[1:])):
        raise InvalidParameterError("z_values must be nonempty, positive and strictly decreasing")
    labels = _labels(len(zs), schedule_start, schedule_step)
    runs = [
        PlannedRun(WorkloadPoint(n, z, think_distribution, label), run_duration, trims[0], trims[1], label)
        for z, label in zip(zs, labels)
    ]
    return TestPlan(runs=tuple(runs), target_mix=target_mix, declared_lambda_rat=None)


def validate_plan(plan: TestPlan, s_max: float, q_ratio_threshold: float = DEFAULT_Q_RATIO_THRESHOLD) -> list[PlanWarning]:
    """Warn, never raise, about runs that ask for more than the SUT can give or that crowd it."""
    if not s_max > 0:
        raise InvalidParameterError(f"s_max must be > 0, got {s_max}")
    lambda_sat = 1.0 / s_max
    warnings = []
    for run in plan.runs:
        wp = run.workload
        ratio = wp.ratio
        if ratio > lambda_sat * (1 + RATIO_TOLERANCE):
            warnings.append(PlanWarning(
                run.run_label, "lambda_rat",
                f"N/Z = {ratio:.4g}/s exceeds the saturation rate 1/S_max = {lambda_sat:.4g}/s",
            ))
        q = solve_closed(ClosedModel(s_max, wp)).concurrency
        if q / wp.n_generators > q_ratio_threshold:
            warnings.append(PlanWarning(
                run.run_label, "concurrency",
                f"predicted Q/N = {q / wp.n_generators:.3f} (Q = {q:.2f}) is above {q_ratio_threshold}; "
                "requests are no longer independent of N",
            ))
    return warnings


def _to_ms(seconds: float) -> Decimal:
    # exact decimal shift of the shortest repr, so reading it back yields the same float
    return Decimal(repr(float(seconds))).scaleb(3).normalize()


def _from_ms(ms) -> float:
    if not isinstance(ms, Decimal):
        ms = Decimal(repr(float(ms)) if isinstance(ms, float) else str(ms))
    return float(ms.scaleb(-3))


def plan_to_dict(plan: TestPlan) -> dict:
    return {
        "declared_lambda_rat": plan.declared_lambda_rat,
        "target_mix": plan.target_mix,
        "runs": [
            {
                "run_label": r.run_label,
                "n_generators": r.workload.n_generators,
                "think_time_ms": _to_ms(r.workload.think_time_mean),
                "think_distribution": r.workload.think_distribution.value,
                "duration_s": r.duration,
                "trim_head_s": r.trim_head,
                "trim_tail_s": r.trim_tail,
            }
            for r in plan.runs
        ],
    }


def plan_from_dict(doc: dict) -> TestPlan:
    try:
        runs = [
            PlannedRun(
                WorkloadPoint(
                    int(r["n_generators"]), _from_ms(r["think_time_ms"]),
                    ThinkDistribution(r.get("think_distribution", "exponential")), r["run_label"],
                ),
                float(r["duration_s"]), float(r.get("trim_head_s", 0.0)), float(r.get("trim_tail_s", 0.0)),
                r["run_label"],
            )
            for r in doc["runs"]
        ]
    except (KeyError, TypeError) as exc:
        raise InvalidParameterError(f"malformed plan document: {exc}") from exc
    lam = doc.get("declared_lambda_rat")
    return TestPlan(runs=tuple(runs), target_mix=doc.get("target_mix"),
                    declared_lambda_rat=None if lam is None else float(lam))


def plan_to_json(plan: TestPlan) -> str:
    """JSON text with millisecond think times written as exact decimals."""
    raw: dict[str, str] = {}

    def number(obj):
        if isinstance(obj, Decimal):
            key = f"@dec{len(raw)}@"
            raw[key] = format(obj, "f")
            return key
        raise TypeError(f"cannot serialize {type(obj).__name__}")

    text = json.dumps(plan_to_dict(plan), indent=2, default=number)
    for key, value in raw.items():
        text = text.replace(f'"{key}"', value)
    return text + "\n"


def save_plan(plan: TestPlan, path: str | Path) -> None:
    Path(path).write_text(plan_to_json(plan))


def load_plan(path: str | Path) -> TestPlan:
    return plan_from_dict(json.loads(Path(path).read_text(), parse_float=Decimal))
