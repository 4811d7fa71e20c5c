"""Log analysis: inter-arrival CoV, Little's-law metrics, page conversion and Internet-user estimates.

Times inside logs are milliseconds; rates are per second; windows are seconds.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .core import (
    InsufficientDataError,
    InterArrivalStats,
    InvalidParameterError,
    MeasurementWindow,
    WebloadError,
    summarize_gaps,
)
from .logfmt import ArrivalLog, parse_success, parse_thread_id
from .mix import ObjectMix

log = logging.getLogger(__name__)

DEFAULT_BAND = (0.9, 1.1)
MAX_BAD_ROW_FRACTION = 0.01
TABLE3_COLUMNS = ("Run", "N", "Z(ms)", "lambda(obj/s)", "R(ms)", "Q(obj)", "N(obj)",
                  "Mean(ms)", "StdDev(ms)", "CoV")
DEFAULT_Z_PRIMES = (10_000.0, 20_000.0, 30_000.0, 40_000.0, 50_000.0)


class LogFormatError(WebloadError):
    pass


@dataclass
class IngestResult:
    log: ArrivalLog
    window: MeasurementWindow
    warnings: list[str] = field(default_factory=list)


@dataclass(frozen=True)
class RunAnalysis:
    window: MeasurementWindow
    lambda_obj: float  # objects/s
    mean_r: float  # ms
    q: float  # objects
    n_check: float  # objects
    interarrival: InterArrivalStats
    z: float = 0.0  # ms
    n_threads: int = 0
    percentile: float = 95.0
    r_percentile: float = math.nan  # ms
    run_label: str = ""

    def table_row(self) -> list[str]:
        ia = self.interarrival
        return [
            self.run_label, str(self.n_threads), f"{self.z:g}", f"{self.lambda_obj:.2f}", f"{self.mean_r:.2f}",
            f"{self.q:.2f}", f"{self.n_check:.2f}", f"{ia.mean:.2f}", f"{ia.std_dev:.2f}", f"{ia.cov:.2f}",
        ]

    def to_dict(self) -> dict:
        d = asdict(self)
        d["window"]["duration"] = self.window.duration
        d["verdict"] = cov_verdict(self.interarrival)
        return d


@dataclass(frozen=True)
class InternetEstimate:
    lambda_pages: float  # pages/s
    q_pages: float
    z_prime: float  # ms
    n_prime: float


# ---------------------------------------------------------------- ingestion

def read_log(path: str | Path, max_bad_fraction: float = MAX_BAD_ROW_FRACTION) -> tuple[ArrivalLog, list[str]]:
    """Parse the shared CSV layout or any JMeter JTL CSV that contains its columns."""
    warnings: list[str] = []
    ts, labels, elapsed, threads, success = [], [], [], [], []
    registry: dict[str, int] = {}
    rows = 0
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        need = {"timeStamp", "elapsed", "label", "threadName"}
        missing = need - set(reader.fieldnames or ())
        if missing:
            raise LogFormatError(f"{path}: missing columns {sorted(missing)}")
        for row in reader:
            rows += 1
            try:
                t = float(row["timeStamp"])
                e = float(row["elapsed"])
                if not (math.isfinite(t) and math.isfinite(e)) or e < 0:
                    raise ValueError("non-finite or negative value")
                ok = parse_success(row["success"]) if row.get("success") not in (None, "") else True
                tid = parse_thread_id(row["threadName"] or "", registry)
            except (TypeError, ValueError) as exc:
                warnings.append(f"line {reader.line_num}: {exc}")
                continue
            ts.append(t)
            labels.append(row["label"])
            elapsed.append(e)
            threads.append(tid)
            success.append(ok)
    for w in warnings:
        log.warning("%s: %s", path, w)
    if rows and len(warnings) / rows > max_bad_fraction:
        raise LogFormatError(f"{path}: {len(warnings)} of {rows} rows unparseable")
    return ArrivalLog(ts, labels, elapsed, threads, success, source_label=Path(path).stem), warnings


def trim(alog: ArrivalLog, trim_head: float, trim_tail: float) -> tuple[ArrivalLog, MeasurementWindow]:
    """Keep records sent within [first + head, last - tail] and sort them globally."""
    if trim_head < 0 or trim_tail < 0:
        raise InvalidParameterError("trims must be nonnegative")
    if len(alog) == 0:
        raise InsufficientDataError("log is empty")
    first = float(alog.timestamps.min()) / 1000.0
    last = float(alog.timestamps.max()) / 1000.0
    start, end = first + trim_head, last - trim_tail
    if not end > start:
        raise InsufficientDataError(f"trims ({trim_head} s, {trim_tail} s) leave no window in a {last - first:.3f} s log")
    ts_s = alog.timestamps / 1000.0
    keep = (ts_s >= start) & (ts_s <= end)
    kept = alog.take(keep).sorted()
    if len(kept) == 0:
        raise InsufficientDataError("no records left after trimming")
    done = (kept.timestamps + kept.elapsed) / 1000.0
    window = MeasurementWindow(start=start, end=end, arrival_count=len(kept),
                               completion_count=int(((done >= start) & (done <= end)).sum()))
    return kept, window


def ingest(path: str | Path, trim_head: float = 0.0, trim_tail: float = 0.0,
           max_bad_fraction: float = MAX_BAD_ROW_FRACTION) -> IngestResult:
    raw, warnings = read_log(path, max_bad_fraction)
    kept, window = trim(raw, trim_head, trim_tail)
    return IngestResult(kept, window, warnings)


# ------------------------------------------------------------- statistics

def interarrival_gaps(alog: ArrivalLog) -> np.ndarray:
    ts = alog.timestamps if alog.is_sorted() else alog.sorted().timestamps
    return np.diff(ts)


def principle_b(alog: ArrivalLog) -> InterArrivalStats:
    """Inter-arrival statistics (ms) of the send timestamps, failed requests included."""
    if len(alog) < 2:
        raise InsufficientDataError("need at least two records for an inter-arrival gap")
    return summarize_gaps(interarrival_gaps(alog))


def cov_verdict(stats: InterArrivalStats, band: tuple[float, float] = DEFAULT_BAND) -> str:
    lo, hi = band
    if stats.cov < lo:
        return "warn-hypo"
    if stats.cov > hi:
        return "warn-hyper"
    return "pass"


def little_metrics(lambda_obj: float, mean_r: float, z: float) -> tuple[float, float]:
    """(Q, N) from a rate per second and R, Z in milliseconds: Q = lambda R, N = lambda (R + Z)."""
    if z < 0:
        raise InvalidParameterError(f"z must be >= 0, got {z}")
    q = lambda_obj * mean_r / 1000.0
    return q, lambda_obj * (mean_r + z) / 1000.0


def derive_metrics(alog: ArrivalLog, window: MeasurementWindow, z: float,
                   percentile: float = 95.0, run_label: str = "") -> RunAnalysis:
    if window.duration <= 0:
        raise InvalidParameterError("window duration must be positive")
    lam = window.arrival_count / window.duration
    ok = alog.elapsed[alog.success]
    if ok.size == 0:
        raise InsufficientDataError("no successful requests in the window")
    mean_r = float(ok.mean())
    q, n = little_metrics(lam, mean_r, z)
    return RunAnalysis(
        window=window, lambda_obj=lam, mean_r=mean_r, q=q, n_check=n,
        interarrival=principle_b(alog), z=z, n_threads=alog.thread_count(),
        percentile=percentile, r_percentile=float(np.percentile(ok, percentile)),
        run_label=run_label or alog.source_label,
    )


def time_averaged_concurrency(alog: ArrivalLog, window: MeasurementWindow) -> float:
    """Mean number of requests in flight over the window, by integrating [send, send + elapsed]."""
    start, end = window.start * 1000.0, window.end * 1000.0
    s = np.clip(alog.timestamps, start, end)
    e = np.clip(alog.timestamps + alog.elapsed, start, end)
    return float(np.sum(e - s) / (end - start))


def cov_by_thread_count(alog: ArrivalLog, thread_subset_sizes: Sequence[int]) -> list[tuple[int, float]]:
    """CoV of the merged arrivals of the first k thread ids (ascending), for each k.

    Ids are ordered numerically so the subsets do not depend on record order.
    """
    ids = np.unique(alog.thread_ids)
    out = []
    for k in thread_subset_sizes:
        if k < 1 or k > ids.size:
            raise InvalidParameterError(f"k={k} outside 1..{ids.size} available threads")
        sub = alog.take(np.isin(alog.thread_ids, ids[:k]))
        out.append((int(k), principle_b(sub).cov))
    return out


# ------------------------------------------------------ Internet users

def pages_rate(lambda_obj: float, mix: ObjectMix) -> float:
    objects = mix.object_instance_count
    pages = mix.page_count
    if objects <= 0 or pages <= 0:
        raise InvalidParameterError("mix must have positive page and object counts")
    return lambda_obj * pages / objects


def estimate_internet_users(lambda_pages: float, mean_r: float, z_prime: float) -> InternetEstimate:
    """N' = lambda (R + Z'), with R and Z' in milliseconds."""
    if z_prime < 0:
        raise InvalidParameterError(f"z_prime must be >= 0, got {z_prime}")
    q_pages = lambda_pages * mean_r / 1000.0
    return InternetEstimate(lambda_pages=lambda_pages, q_pages=q_pages, z_prime=z_prime,
                            n_prime=lambda_pages * (mean_r + z_prime) / 1000.0)


@dataclass(frozen=True)
class InternetRow:
    run_label: str
    lambda_obj: float
    mean_r: float
    q_obj: float
    lambda_pages: float
    q_pages: float
    n_primes: tuple[float, ...]


def internet_matrix(runs: Sequence[tuple[str, float, float]], mix: ObjectMix,
                    z_primes: Sequence[float] = DEFAULT_Z_PRIMES) -> list[InternetRow]:
    """One row per (run label, lambda obj/s, R ms) with N' for each nominal think time Z' (ms)."""
    rows = []
    for label, lam, r in runs:
        lp = pages_rate(lam, mix)
        ests = [estimate_internet_users(lp, r, zp) for zp in z_primes]
        rows.append(InternetRow(label, lam, r, lam * r / 1000.0, lp, lp * r / 1000.0,
                                tuple(e.n_prime for e in ests)))
    return rows


def internet_matrix_csv(rows: Sequence[InternetRow], z_primes: Sequence[float] = DEFAULT_Z_PRIMES) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["Run", "lambda(obj/s)", "R(ms)", "Q(obj)", "lambda(pgs/s)", "Q(pgs)"]
               + [f"N'@Z'={zp:g}ms" for zp in z_primes])
    for r in rows:
        w.writerow([r.run_label, f"{r.lambda_obj:.2f}", f"{r.mean_r:.2f}", f"{r.q_obj:.2f}",
                    f"{r.lambda_pages:.4f}", f"{r.q_pages:.2f}"] + [f"{n:.2f}" for n in r.n_primes])
    return buf.getvalue()


def table3_csv(analyses: Sequence[RunAnalysis]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TABLE3_COLUMNS)
    for a in analyses:
        w.writerow(a.table_row())
    return buf.getvalue()


def analysis_json(analysis: RunAnalysis) -> str:
    return json.dumps(analysis.to_dict(), indent=2, sort_keys=True)
