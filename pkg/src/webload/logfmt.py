"""Per-request arrival logs and the shared CSV layout.

The CSV header is ``timeStamp,label,elapsed,threadName,success``, a subset of
JMeter's JTL CSV columns. Timestamps and elapsed times are integer milliseconds.
"""

from __future__ import annotations

import csv
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

LOG_COLUMNS = ("timeStamp", "label", "elapsed", "threadName", "success")
THREAD_PREFIX = "vu-"
_TRAILING_INT = re.compile(r"(\d+)\s*$")


@dataclass(frozen=True)
class RunRecord:
    timestamp: float  # ms since epoch, request send time
    label: str
    elapsed: float  # ms
    thread_id: int
    success: bool = True


class ArrivalLog:
    """Column-oriented request log.

    Kept as numpy columns because simulated runs reach 10^6 records.
    """

    def __init__(self, timestamps, labels, elapsed, thread_ids, success=None, source_label: str = ""):
        self.timestamps = np.asarray(timestamps, dtype=float)
        n = self.timestamps.size
        if isinstance(labels, str):
            labels = [labels] * n
        self.labels = np.asarray(labels, dtype=object)
        self.elapsed = np.asarray(elapsed, dtype=float)
        self.thread_ids = np.asarray(thread_ids, dtype=np.int64)
        self.success = np.ones(n, dtype=bool) if success is None else np.asarray(success, dtype=bool)
        self.source_label = source_label
        for name in ("labels", "elapsed", "thread_ids", "success"):
            if getattr(self, name).shape != (n,):
                raise ValueError(f"column {name} has length {getattr(self, name).size}, expected {n}")
        if np.any(self.elapsed < 0):
            raise ValueError("elapsed times must be nonnegative")

    @classmethod
    def from_records(cls, records: Iterable[RunRecord], source_label: str = "") -> "ArrivalLog":
        recs = list(records)
        return cls(
            [r.timestamp for r in recs],
            [r.label for r in recs],
            [r.elapsed for r in recs],
            [r.thread_id for r in recs],
            [r.success for r in recs],
            source_label=source_label,
        )

    def __len__(self) -> int:
        return int(self.timestamps.size)

    def __iter__(self) -> Iterator[RunRecord]:
        return self.records()

    def records(self) -> Iterator[RunRecord]:
        for i in range(len(self)):
            yield RunRecord(
                float(self.timestamps[i]), str(self.labels[i]), float(self.elapsed[i]),
                int(self.thread_ids[i]), bool(self.success[i]),
            )

    def take(self, idx) -> "ArrivalLog":
        return ArrivalLog(
            self.timestamps[idx], self.labels[idx], self.elapsed[idx], self.thread_ids[idx],
            self.success[idx], source_label=self.source_label,
        )

    def sorted(self) -> "ArrivalLog":
        """Global temporal order; equal timestamps ordered by thread id."""
        order = np.lexsort((self.thread_ids, self.timestamps))
        return self.take(order)

    def is_sorted(self) -> bool:
        ts = self.timestamps
        if ts.size < 2:
            return True
        d = np.diff(ts)
        if np.any(d < 0):
            return False
        ties = d == 0
        return not np.any(np.diff(self.thread_ids)[ties] < 0)

    def concat(self, other: "ArrivalLog") -> "ArrivalLog":
        return ArrivalLog(
            np.concatenate([self.timestamps, other.timestamps]),
            np.concatenate([self.labels, other.labels]),
            np.concatenate([self.elapsed, other.elapsed]),
            np.concatenate([self.thread_ids, other.thread_ids]),
            np.concatenate([self.success, other.success]),
            source_label=self.source_label or other.source_label,
        )

    def thread_count(self) -> int:
        return int(np.unique(self.thread_ids).size)

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            write_rows(fh, self.records())


def thread_name(thread_id: int) -> str:
    return f"{THREAD_PREFIX}{thread_id}"


def format_row(rec: RunRecord) -> list:
    return [
        int(round(rec.timestamp)), rec.label, int(round(rec.elapsed)),
        thread_name(rec.thread_id), "true" if rec.success else "false",
    ]


def write_rows(fh, records: Iterable[RunRecord]) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(LOG_COLUMNS)
    for rec in records:
        w.writerow(format_row(rec))


def parse_thread_id(name: str, registry: dict[str, int]) -> int:
    """Numeric id from a thread name.

    JMeter names threads like ``Thread Group 1-17``; the trailing integer is
    used. Names without one get negative ids -1, -2, ... in order of first
    appearance.
    """
    m = _TRAILING_INT.search(name)
    if m:
        return int(m.group(1))
    if name not in registry:
        registry[name] = -(len(registry) + 1)
    return registry[name]


def parse_success(value: str) -> bool:
    v = value.strip().lower()
    if v in ("true", "1", "yes", "ok"):
        return True
    if v in ("false", "0", "no"):
        return False
    raise ValueError(f"unrecognised success flag {value!r}")
