import numpy as np
import pytest

from conftest import gaps_with_moments
from reference_data import TABLE3, TABLE4, Z_PRIMES
from webload.analyzer import (
    LogFormatError,
    cov_by_thread_count,
    cov_verdict,
    derive_metrics,
    estimate_internet_users,
    ingest,
    internet_matrix,
    internet_matrix_csv,
    little_metrics,
    pages_rate,
    principle_b,
    read_log,
    table3_csv,
    time_averaged_concurrency,
    trim,
)
from webload.core import InsufficientDataError, InvalidParameterError, MeasurementWindow
from webload.logfmt import ArrivalLog
from webload.mix import single_object_mix, webgov_mix
from webload.simulator import closed_config, simulate

EPOCH = 1_700_000_000_000.0


def log_from_gaps(gaps_ms, elapsed=50.0, threads=200, seed=0):
    ts = EPOCH + np.concatenate([[0.0], np.cumsum(gaps_ms)])
    tid = np.random.default_rng(seed).integers(0, threads, ts.size)
    return ArrivalLog(ts, "obj", np.full(ts.size, elapsed), tid)


@pytest.fixture(scope="module")
def sim200():
    res = simulate(closed_config(200, 10.0, 0.05, 4000.0, seed=21, service="constant"))
    return res.log


# ------------------------------------------------------------- ingestion

def test_trim_gives_twenty_minute_window(tmp_path):
    ts = EPOCH + np.linspace(0, 1_500_000, 3001)
    ArrivalLog(ts, "home", np.full(ts.size, 40.0), np.arange(ts.size) % 7).write_csv(tmp_path / "run.csv")
    res = ingest(tmp_path / "run.csv", 120, 180)
    assert res.window.duration == pytest.approx(1200.0)
    assert res.log.timestamps.min() >= EPOCH + 120_000
    assert res.log.timestamps.max() <= EPOCH + 1_320_000
    full = ingest(tmp_path / "run.csv")
    assert len(full.log) == 3001


def test_ingest_sorts_interleaved_threads(tmp_path):
    path = tmp_path / "three.csv"
    rows = ["timeStamp,label,elapsed,threadName,success"]
    for tid, start in ((0, 0), (1, 7), (2, 3)):
        for k in range(20):
            rows.append(f"{int(EPOCH) + start + 10 * k},home,5,vu-{tid},true")
    # per-thread blocks, so the file itself is not globally ordered
    path.write_text("\n".join(rows) + "\n")
    res = ingest(path)
    assert res.log.is_sorted()
    assert (np.diff(res.log.timestamps) >= 0).all()
    assert principle_b(res.log).sample_count == 59


def test_jmeter_superset(tmp_path):
    path = tmp_path / "jmeter.jtl"
    header = ("timeStamp,elapsed,label,responseCode,responseMessage,threadName,dataType,success,"
              "failureMessage,bytes,sentBytes,grpThreads,allThreads,URL,Latency,IdleTime,Connect")
    lines = [header]
    for k in range(30):
        ok = "false" if k == 4 else "true"
        lines.append(f"{int(EPOCH) + 100 * k},{50 + k},010_Home,200,OK,Thread Group 1-{k % 3 + 1},text,{ok},,"
                     f"1024,120,3,3,http://h/010_Home,{40 + k},0,1")
    path.write_text("\n".join(lines) + "\n")
    alog, warnings = read_log(path)
    assert not warnings
    assert len(alog) == 30
    assert sorted(np.unique(alog.thread_ids)) == [1, 2, 3]
    assert alog.success.sum() == 29
    assert alog.elapsed[5] == 55


def test_bad_rows_warn_then_reject(tmp_path):
    good = [f"{int(EPOCH) + 10 * k},home,5,vu-{k % 2},true" for k in range(199)]
    path = tmp_path / "one_bad.csv"
    path.write_text("\n".join(["timeStamp,label,elapsed,threadName,success", *good[:50], "oops,home,x,vu-0,true",
                               *good[50:]]) + "\n")
    alog, warnings = read_log(path)
    assert len(alog) == 199
    assert len(warnings) == 1 and warnings[0].startswith("line 52")

    path = tmp_path / "many_bad.csv"
    path.write_text("\n".join(["timeStamp,label,elapsed,threadName,success", *good,
                               *["1,home,-5,vu-0,true"] * 5]) + "\n")
    with pytest.raises(LogFormatError):
        read_log(path)


def test_missing_columns_rejected(tmp_path):
    path = tmp_path / "x.csv"
    path.write_text("time,label\n1,a\n")
    with pytest.raises(LogFormatError):
        read_log(path)


def test_trim_leaving_nothing():
    alog = log_from_gaps(np.full(10, 1000.0))
    with pytest.raises(InsufficientDataError):
        trim(alog, 6, 6)


# ---------------------------------------------------------- Principle B

def test_row_1830_gap_statistics():
    alog = log_from_gaps(gaps_with_moments(31.52, 31.59))
    stats = principle_b(alog)
    assert (round(stats.mean, 2), round(stats.std_dev, 2), round(stats.cov, 2)) == (31.52, 31.59, 1.00)
    assert cov_verdict(stats) == "pass"


def test_row_2100_is_hyper():
    stats = principle_b(log_from_gaps(gaps_with_moments(6.28, 7.37)))
    assert round(stats.cov, 2) == 1.17
    assert cov_verdict(stats) == "warn-hyper"
    assert cov_verdict(stats, band=(0.8, 1.2)) == "pass"


def test_periodic_log_is_hypo():
    stats = principle_b(log_from_gaps(np.full(100, 20.0)))
    assert stats.cov == 0
    assert cov_verdict(stats) == "warn-hypo"


def test_principle_b_needs_two_records():
    with pytest.raises(InsufficientDataError):
        principle_b(log_from_gaps(np.array([])))


# ---------------------------------------------------------- Little's law

def _log_with_rate(lam, r_ms, seconds=100.0):
    n = int(round(lam * seconds))
    ts = EPOCH + np.arange(n) * (seconds * 1000.0 / n)
    alog = ArrivalLog(ts, "obj", np.full(n, r_ms), np.arange(n) % 200)
    return alog, MeasurementWindow(EPOCH / 1000, EPOCH / 1000 + seconds, n, n)


@pytest.mark.parametrize("row", [TABLE3[0], TABLE3[6]], ids=["1800", "2100"])
def test_derive_metrics_rows(row):
    label, _, z, lam, r, q, n = row[:7]
    alog, window = _log_with_rate(lam, r)
    a = derive_metrics(alog, window, z, run_label=label)
    assert a.lambda_obj == pytest.approx(lam)
    assert a.mean_r == pytest.approx(r)
    assert round(a.q, 2) == q
    assert round(a.n_check, 2) == n
    assert a.table_row()[0] == label


def test_zero_think_collapses_to_q():
    alog, window = _log_with_rate(20, 80)
    a = derive_metrics(alog, window, 0)
    assert a.n_check == a.q


def test_zero_duration_window_rejected():
    alog, _ = _log_with_rate(20, 80)
    with pytest.raises(InvalidParameterError):
        derive_metrics(alog, MeasurementWindow(5.0, 5.0, 1, 1), 0)


def test_failed_requests_excluded_from_r_only():
    alog = ArrivalLog(EPOCH + np.arange(4) * 100.0, "obj", [10, 10, 1000, 10], [0, 1, 2, 3],
                      [True, True, False, True])
    window = MeasurementWindow(EPOCH / 1000, EPOCH / 1000 + 0.4, 4, 4)
    a = derive_metrics(alog, window, 0)
    assert a.mean_r == 10
    assert a.interarrival.sample_count == 3


def test_table3_derived_cells():
    for label, _, z, lam, r, q, n, *_ in TABLE3:
        got_q, got_n = little_metrics(lam, r, z)
        assert got_q == pytest.approx(q, rel=0.005, abs=0.005), label
        assert got_n == pytest.approx(n, rel=0.005), label


def test_simulated_log_is_steady(sim200):
    alog, window = trim(sim200, 200, 50)
    assert window.is_steady()
    a = derive_metrics(alog, window, 10_000)
    assert a.n_check == pytest.approx(200, rel=0.02)
    assert time_averaged_concurrency(alog, window) == pytest.approx(a.q, rel=0.02)


def test_merge_invariance(sim200):
    even = sim200.take(sim200.thread_ids % 2 == 0)
    odd = sim200.take(sim200.thread_ids % 2 == 1)
    merged = odd.concat(even)
    a, wa = trim(sim200, 100, 100)
    b, wb = trim(merged, 100, 100)
    assert wa == wb
    ra, rb = derive_metrics(a, wa, 10_000), derive_metrics(b, wb, 10_000)
    assert ra.interarrival == rb.interarrival
    assert ra.q == rb.q and ra.lambda_obj == rb.lambda_obj


# ------------------------------------------------------------ Fig. 8

def test_cov_by_thread_count_profile(sim200):
    profile = dict(cov_by_thread_count(sim200, [1, 50, 200]))
    assert profile[1] < 1
    assert 0.9 <= profile[50] <= 1.1
    assert 0.95 <= profile[200] <= 1.05


def test_cov_by_thread_count_bounds(sim200):
    with pytest.raises(InvalidParameterError):
        cov_by_thread_count(sim200, [201])


def test_cov_by_thread_count_ignores_record_order(sim200):
    shuffled = sim200.take(np.random.default_rng(0).permutation(len(sim200)))
    assert cov_by_thread_count(shuffled, [10]) == cov_by_thread_count(sim200, [10])


# ---------------------------------------------------------- Internet users

def test_pages_rate_examples():
    mix = webgov_mix()
    assert pages_rate(159.16, mix) == pytest.approx(95.4960, abs=1e-4)
    assert pages_rate(15.91, mix) == pytest.approx(9.5460, abs=1e-4)
    assert pages_rate(42.0, single_object_mix()) == 42.0


def test_internet_examples():
    assert estimate_internet_users(95.4960, 253.38, 30000).n_prime == pytest.approx(2889.08, abs=0.01)
    assert estimate_internet_users(36.1560, 59.64, 40000).n_prime == pytest.approx(1448.40, abs=0.01)
    e = estimate_internet_users(12.0, 80.0, 0)
    assert e.n_prime == e.q_pages
    with pytest.raises(InvalidParameterError):
        estimate_internet_users(1.0, 1.0, -1)


def test_table4_cells():
    rows = internet_matrix([(r[0], r[1], r[2]) for r in TABLE4], webgov_mix(), Z_PRIMES)
    for got, (label, lam, r, q, lp, qp, nps) in zip(rows, TABLE4):
        assert got.lambda_pages == pytest.approx(lp, abs=1e-3), label
        assert round(got.q_pages, 2) == pytest.approx(qp, abs=0.011), label
        assert got.n_primes == pytest.approx(nps, abs=0.05), label
    csv_text = internet_matrix_csv(rows, Z_PRIMES)
    assert csv_text.splitlines()[-1].endswith("979.16,1934.12,2889.08,3844.04,4799.00")


def test_table3_csv_layout():
    alog, window = _log_with_rate(15.91, 53.17)
    text = table3_csv([derive_metrics(alog, window, 12500, run_label="1800")])
    header, row = text.splitlines()
    assert header == "Run,N,Z(ms),lambda(obj/s),R(ms),Q(obj),N(obj),Mean(ms),StdDev(ms),CoV"
    assert row.startswith("1800,200,12500,15.91,53.17,0.85,199.72,")
