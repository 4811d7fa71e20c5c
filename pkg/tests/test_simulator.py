import numpy as np
import pytest
from dataclasses import replace

from webload.analytic import ClosedModel, solve_closed, solve_open
from webload.core import InsufficientDataError, WorkloadPoint, summarize_gaps
from webload.simulator import (
    Mode,
    SimConfig,
    closed_config,
    fit_state_line,
    load_line,
    simulate,
    state_arrival_rates,
)


@pytest.fixture(scope="module")
def n200():
    return simulate(closed_config(200, 10.0, 0.05, 1e5, seed=1))


def test_closed_converges_to_exact_solution(n200):
    exact = solve_closed(ClosedModel(0.05, WorkloadPoint(200, 10.0)))
    assert n200.measured.arrival_rate == pytest.approx(exact.arrival_rate, rel=0.02)
    assert n200.measured.concurrency == pytest.approx(exact.concurrency, rel=0.05)


def test_arrival_rate_is_count_over_window(n200):
    w = n200.window
    assert abs(n200.measured.arrival_rate - w.arrival_count / w.duration) < 1e-9 * n200.measured.arrival_rate
    assert len(n200.log) == n200.arrivals.size


def test_littles_law_in_simulation(n200):
    m = n200.measured
    inside = n200.in_window
    mean_elapsed = float(np.mean(n200.departures[inside] - n200.arrivals[inside]))
    assert m.concurrency == pytest.approx(m.arrival_rate * mean_elapsed, rel=0.01)


def test_population_identity_in_simulation(n200):
    m = n200.measured
    assert m.concurrency + m.arrival_rate * 10.0 == pytest.approx(200, rel=0.02)


def test_deterministic_single_customer_cycle():
    cfg = SimConfig(WorkloadPoint(1, 10.0, "constant"), 0.05, horizon=1005.0, seed=3,
                    service_distribution="constant", trim_head_fraction=0.0)
    res = simulate(cfg)
    assert np.allclose(np.diff(res.arrivals), 10.05, rtol=0, atol=1e-9)
    assert abs(res.measured.arrival_rate - 1 / 10.05) <= 1 / res.window.duration
    assert np.allclose(res.log.elapsed, 50.0)


def test_open_mode_matches_mm1():
    cfg = SimConfig(WorkloadPoint(1, 0.0), 0.05, horizon=1e5, seed=2, mode=Mode.OPEN, open_arrival_rate=10.0)
    res = simulate(cfg)
    assert res.measured.concurrency == pytest.approx(solve_open(10.0, 0.05).concurrency, rel=0.05)
    assert res.measured.arrival_rate == pytest.approx(10.0, rel=0.01)


def test_bit_identical_reruns():
    cfg = closed_config(30, 2.0, 0.05, 500.0, seed=11, think="uniform")
    a, b = simulate(cfg), simulate(cfg)
    for col in ("timestamps", "elapsed", "thread_ids"):
        assert np.array_equal(getattr(a.log, col), getattr(b.log, col))
    c = simulate(replace(cfg, seed=12))
    assert not np.array_equal(a.log.timestamps[:50], c.log.timestamps[:50])


def test_horizon_too_short():
    with pytest.raises(InsufficientDataError):
        simulate(closed_config(1, 100.0, 0.05, 1.0, seed=0, think="constant"))


def test_log_shape_matches_shared_format(n200):
    alog = n200.log
    assert alog.thread_count() == 200
    assert (alog.elapsed >= 0).all()
    for g in (0, 17, 199):
        ts = alog.timestamps[alog.thread_ids == g]
        assert (np.diff(ts) > 0).all()


def test_scaled_z_cov_near_one():
    res = simulate(closed_config(200, 6.25, 0.05, 3200.0, seed=5))
    assert 0.95 <= summarize_gaps(res.gaps()).cov <= 1.05


def test_saturated_closed_is_hypoexponential():
    res = simulate(closed_config(200, 0.1, 0.05, 3000.0, seed=5, service="constant"))
    assert summarize_gaps(res.gaps()).cov < 0.9


def test_superposition_of_exponential_generators():
    res = simulate(closed_config(50, 10.0, 1e-6, 2e4, seed=7))
    assert abs(summarize_gaps(res.gaps()).cov - 1) < 0.05


def test_palm_khintchine_uniform_generators():
    res = simulate(closed_config(200, 50.0, 0.05, 25000.0, seed=8, think="uniform"))
    assert abs(summarize_gaps(res.gaps()).cov - 1) < 0.05


def test_fixed_z_load_line_intercepts():
    template = closed_config(130, 1.3, 0.01, 2000.0, seed=4)
    (pt,) = load_line(template, [130], "fixed_z")
    assert pt.lambda_intercept == pytest.approx(100, rel=0.05)
    assert pt.q_intercept == pytest.approx(130, rel=0.05)
    assert pt.slope == pytest.approx(-1 / 1.3, rel=0.05)


def test_scaled_z_flattens_load_line():
    template = closed_config(100, 5.0, 0.05, 3000.0, seed=1)
    scaled = load_line(template, [100, 200, 400, 600, 800, 1000], "scaled_z", lambda_rat=20)
    (fixed,) = load_line(closed_config(20, 1.0, 0.05, 3000.0, seed=1), [20], "fixed_z")
    assert abs(scaled[-1].slope) < 0.1 * abs(fixed.slope)
    slopes = [abs(p.slope) for p in scaled]
    assert all(b < a for a, b in zip(slopes, slopes[1:]))
    rates = [p.arrival_rate for p in scaled]
    assert max(rates) / min(rates) < 1.06


def test_single_point_load_line():
    pts = load_line(closed_config(50, 2.5, 0.05, 500.0, seed=0), [50], "scaled_z")
    assert len(pts) == 1 and pts[0].z == 2.5


def test_state_line_recovers_exact_line():
    q = np.arange(10.0)
    rate = (10 - q) / 2.0
    slope, lam0, q0 = fit_state_line(q, rate, np.ones_like(q))
    assert (slope, lam0, q0) == pytest.approx((-0.5, 5.0, 10.0))


def test_state_rates_follow_free_generators():
    res = simulate(closed_config(40, 4.0, 0.05, 4000.0, seed=9))
    q, rate, occ = state_arrival_rates(res)
    busy = occ > 0.01 * occ.sum()
    assert np.allclose(rate[busy], (40 - q[busy]) / 4.0, rtol=0.1)


def test_cov_nondecreasing_at_top_of_fixed_n_schedule():
    covs, ses = [], []
    for z in (2.5, 1.563, 1.0):
        g = simulate(closed_config(200, z, 0.005, 3000.0, seed=0, think="uniform")).gaps()
        stats = summarize_gaps(g)
        covs.append(stats.cov)
        ses.append(stats.cov / np.sqrt(g.size))
    for (a, b), se in zip(zip(covs, covs[1:]), ses[1:]):
        assert b >= a - 3 * se
