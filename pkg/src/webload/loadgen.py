"""Closed-loop HTTP load generator.

Each virtual user repeats: pick an object by weight, GET it, log the result,
think. A user never has more than one request outstanding.
"""

from __future__ import annotations

import asyncio
import logging
import queue
import threading
import time
from dataclasses import dataclass
from pathlib import Path

import httpx
import numpy as np

from .core import WebloadError, WorkloadPoint, draw_think_time
from .logfmt import RunRecord, write_rows
from .mix import ObjectMix
from .planner import PlannedRun, TestPlan

log = logging.getLogger(__name__)

DEFAULT_FAILURE_CEILING = 0.10
DEFAULT_THREAD_CAP = 64
MIN_REQUESTS_FOR_ABORT = 20


class RunAborted(WebloadError):
    """Too many failed requests."""


@dataclass
class _Shared:
    end: float  # monotonic deadline
    sink: "queue.Queue[RunRecord | None]"
    ceiling: float
    abort: threading.Event
    lock: threading.Lock
    total: int = 0
    failed: int = 0

    def account(self, ok: bool) -> None:
        with self.lock:
            self.total += 1
            if not ok:
                self.failed += 1
            if self.total >= MIN_REQUESTS_FOR_ABORT and self.failed / self.total > self.ceiling:
                self.abort.set()


class _Appender(threading.Thread):
    """Single writer for a run's log file."""

    def __init__(self, path: Path, sink: queue.Queue):
        super().__init__(name=f"appender-{path.name}", daemon=True)
        self.path = path
        self.sink = sink
        self.count = 0

    def _drain(self):
        while True:
            rec = self.sink.get()
            if rec is None:
                return
            self.count += 1
            yield rec

    def run(self):
        with open(self.path, "w", newline="") as fh:
            write_rows(fh, self._drain())


def _user_rngs(seed: int, run_index: int, n: int) -> list[np.random.Generator]:
    return [np.random.default_rng(s) for s in np.random.SeedSequence([seed, run_index]).spawn(n)]


def _start_offset(user: int, wp: WorkloadPoint) -> float:
    # stagger starts evenly over one mean think time
    return user * wp.think_time_mean / wp.n_generators


def _thread_user(user: int, wp: WorkloadPoint, mix: ObjectMix, base_url: str, rng: np.random.Generator,
                 shared: _Shared, t0: float, timeout: float) -> None:
    with httpx.Client(base_url=base_url, timeout=timeout) as client:
        wake = t0 + _start_offset(user, wp)
        while True:
            now = time.monotonic()
            if wake > now:
                if shared.abort.wait(min(wake, shared.end) - now):
                    return
            if time.monotonic() >= shared.end or shared.abort.is_set():
                return
            entry = mix.select(rng)
            stamp = time.time() * 1000.0
            started = time.perf_counter()
            try:
                resp = client.get(entry.path)
                ok = resp.status_code < 400
            except httpx.HTTPError:
                ok = False
            elapsed = (time.perf_counter() - started) * 1000.0
            shared.sink.put(RunRecord(stamp, entry.object_name, elapsed, user, ok))
            shared.account(ok)
            wake = time.monotonic() + draw_think_time(wp.think_distribution, wp.think_time_mean, rng)


async def _async_user(user: int, wp: WorkloadPoint, mix: ObjectMix, client: httpx.AsyncClient,
                      rng: np.random.Generator, shared: _Shared, t0: float) -> None:
    wake = t0 + _start_offset(user, wp)
    while True:
        now = time.monotonic()
        if wake > now:
            await asyncio.sleep(min(wake, shared.end) - now)
        if time.monotonic() >= shared.end or shared.abort.is_set():
            return
        entry = mix.select(rng)
        stamp = time.time() * 1000.0
        started = time.perf_counter()
        try:
            resp = await client.get(entry.path)
            ok = resp.status_code < 400
        except httpx.HTTPError:
            ok = False
        elapsed = (time.perf_counter() - started) * 1000.0
        shared.sink.put(RunRecord(stamp, entry.object_name, elapsed, user, ok))
        shared.account(ok)
        wake = time.monotonic() + draw_think_time(wp.think_distribution, wp.think_time_mean, rng)


async def _run_async(wp, mix, base_url, rngs, shared, t0, timeout):
    limits = httpx.Limits(max_connections=wp.n_generators, max_keepalive_connections=wp.n_generators)
    async with httpx.AsyncClient(base_url=base_url, timeout=timeout, limits=limits) as client:
        await asyncio.gather(*(
            _async_user(i, wp, mix, client, rngs[i], shared, t0) for i in range(wp.n_generators)
        ))


def execute_run(run: PlannedRun, mix: ObjectMix, base_url: str, seed: int, out_path: str | Path,
                run_index: int = 0, failure_ceiling: float = DEFAULT_FAILURE_CEILING,
                thread_cap: int = DEFAULT_THREAD_CAP, timeout: float = 10.0) -> Path:
    """Drive one run for ``run.duration`` seconds and write its log to ``out_path``."""
    wp = run.workload
    out_path = Path(out_path)
    rngs = _user_rngs(seed, run_index, wp.n_generators)
    t0 = time.monotonic()
    shared = _Shared(end=t0 + run.duration, sink=queue.Queue(), ceiling=failure_ceiling,
                     abort=threading.Event(), lock=threading.Lock())
    appender = _Appender(out_path, shared.sink)
    appender.start()
    try:
        if wp.n_generators <= thread_cap:
            users = [
                threading.Thread(target=_thread_user, name=f"vu-{i}", daemon=True,
                                 args=(i, wp, mix, base_url, rngs[i], shared, t0, timeout))
                for i in range(wp.n_generators)
            ]
            for t in users:
                t.start()
            for t in users:
                t.join()
        else:
            asyncio.run(_run_async(wp, mix, base_url, rngs, shared, t0, timeout))
    finally:
        shared.sink.put(None)
        appender.join()
    log.info("run %s: %d requests, %d failed", run.run_label, shared.total, shared.failed)
    if shared.abort.is_set():
        raise RunAborted(
            f"run {run.run_label}: {shared.failed}/{shared.total} requests failed, above ceiling {failure_ceiling:.0%}"
        )
    return out_path


def run_test(plan: TestPlan, mix: ObjectMix, base_url: str, seed: int, out_dir: str | Path = ".",
             failure_ceiling: float = DEFAULT_FAILURE_CEILING, thread_cap: int = DEFAULT_THREAD_CAP,
             timeout: float = 10.0) -> list[Path]:
    """Execute every run of ``plan`` in order; one ``<run_label>.csv`` log per run."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for i, run in enumerate(plan.runs):
        paths.append(execute_run(run, mix, base_url, seed, out_dir / f"{run.run_label}.csv", run_index=i,
                                 failure_ceiling=failure_ceiling, thread_cap=thread_cap, timeout=timeout))
    return paths
