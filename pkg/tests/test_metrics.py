from __future__ import annotations

import math

import numpy as np
import pytest

from warehouse_twin import metrics as M
from warehouse_twin import world as W

from conftest import mini_layout, mini_scenario


def test_person_safety_examples():
    cfg = M.SafetyConfig(d_th=4.0)
    assert M.person_safety(2.0, cfg) == pytest.approx(0.5, abs=1e-12)
    assert M.person_safety(6.0, cfg) == pytest.approx(1.0, abs=1e-12)
    assert M.person_safety(0.0, cfg) == 0.0
    assert M.person_safety(math.inf, cfg) == 1.0


def test_safety_aggregates():
    assert M.safety_mean([0.5, 1.0, 0.75]) == pytest.approx(0.75)
    assert M.safety_min([0.5, 1.0, 0.75]) == 0.5
    assert M.safety_mean([1.0] * 4) == 1.0
    assert M.safety_min([0.0] + [1.0] * 8) == 0.0
    with pytest.raises(M.EmptyPopulation):
        M.safety_mean([])
    with pytest.raises(M.EmptyPopulation):
        M.safety_min([])


def test_avg_service_time_window():
    hist = [(10.0, 100.0), (20.0, 200.0)]
    assert M.avg_service_time(hist, 2) == pytest.approx(150.0)
    hist3 = [(10.0, 100.0), (20.0, 200.0), (30.0, 300.0)]
    assert M.avg_service_time(hist3, 2) == pytest.approx(250.0)
    assert M.avg_service_time([(5.0, 400.0)], 20) == pytest.approx(400.0)
    with pytest.raises(M.NoCompletedOrders):
        M.avg_service_time([], 5)


def test_productivity_examples():
    cfg = M.ProductivityConfig(window_n=20, t_th=400.0)
    assert M.productivity(200.0, cfg) == pytest.approx(0.5, abs=1e-12)
    assert M.productivity(400.0, cfg) == pytest.approx(0.0, abs=1e-12)
    assert M.productivity(800.0, cfg) == pytest.approx(0.0, abs=1e-12)


def test_overall_examples():
    assert M.overall(0.8, 0.6, M.Preference(0.5, 0.5)) == pytest.approx(0.7)
    assert M.overall(0.33, 0.9, M.Preference(1.0, 0.0)) == pytest.approx(0.33)
    assert M.overall(1.0, 1.0, M.Preference(0.25, 0.75)) == pytest.approx(1.0)


def test_preference_validation():
    M.Preference(0.5, 0.5).validate()
    M.Preference(1.0, 0.0).validate()
    with pytest.raises(ValueError):
        M.Preference(0.7, 0.2).validate()
    with pytest.raises(ValueError):
        M.Preference(-0.1, 1.1).validate()


def test_person_distance_cases():
    world = W.build_world(mini_scenario(amr_count=2, worker_count=1), layout=mini_layout())
    wk = world.workers[0]
    wk.x, wk.y = 8.0, 5.0
    a0, a1 = world.amrs
    # all stationary -> infinite
    assert M.person_distance(world, 0) == math.inf
    # one robot 3 m away moving straight at the person
    a0.x, a0.y = 5.0, 5.0
    a0.vx, a0.vy = 1.0, 0.0
    assert M.person_distance(world, 0) == pytest.approx(3.0, abs=1e-12)
    # derived case: a 2 m robot moving away and a 5 m robot moving toward;
    # only the mover-toward counts, so the answer is 5
    a0.x, a0.y = 6.0, 5.0
    a0.vx, a0.vy = -1.0, 0.0     # 2 m away, receding
    a1.x, a1.y = 13.0, 5.0
    a1.vx, a1.vy = -1.0, 0.0     # 5 m away, approaching
    assert M.person_distance(world, 0) == pytest.approx(5.0, abs=1e-12)
    with pytest.raises(M.UnknownPerson):
        M.person_distance(world, 99)


def test_step_report_distances_agree_with_person_distance_op():
    world = W.build_world(mini_scenario(interarrival=12.0, seed=4), layout=mini_layout())
    for _ in range(1200):
        report = W.step(world)
        expected = tuple(M.person_distance(world, k.worker_id) for k in world.workers)
        for got, want in zip(report.person_distances, expected):
            if math.isinf(want):
                assert math.isinf(got)
            else:
                assert got == pytest.approx(want, abs=1e-9)


def test_histogram_binning():
    series = M.MetricsSeries()
    M.record_histogram(series, 1.0)
    M.record_histogram(series, 1.0)
    M.record_histogram(series, 1.0)
    assert sum(series.hist_counts) == 0
    assert series.hist_saturated == 3
    M.record_histogram(series, 0.52)
    assert series.hist_counts[10] == 1       # [0.50, 0.55)
    M.record_histogram(series, 0.0)
    assert series.hist_counts[0] == 1        # [0.00, 0.05)


def test_series_recording_and_averages():
    series = M.MetricsSeries()
    series.record_tick(0.1, [2.0, math.inf])
    series.record_tick(0.2, [6.0, 8.0])
    assert series.safety_min_series == [pytest.approx(0.5), pytest.approx(1.0)]
    assert series.safety_mean_series[0] == pytest.approx(0.75)
    assert series.time_averaged_safety_min() == pytest.approx(0.75)
    series.record_completion(5.0, [(5.0, 100.0)])
    assert series.last_avg_service == pytest.approx(100.0)
    assert series.last_productivity == pytest.approx(0.75)


# randomized property checks (the full 1e5-sample suite runs in acceptance)


def test_metric_properties_randomized():
    rng = np.random.default_rng(77)
    d_th = 4.0
    d = rng.uniform(0, 20, size=20000)
    s = d / np.maximum(d, d_th)
    assert np.all((0 <= s) & (s <= 1))
    # non-decreasing in distance
    order = np.argsort(d)
    assert np.all(np.diff(s[order]) >= -1e-15)
    assert np.all(s[d >= d_th] == 1.0)
    # min <= mean for random populations
    pops = rng.uniform(0, 1, size=(500, 9))
    assert np.all(pops.min(axis=1) <= pops.mean(axis=1) + 1e-15)
    # productivity in [0,1], non-increasing, 0 beyond the threshold
    avg = np.sort(rng.uniform(0, 1200, size=20000))
    p = 1 - avg / np.maximum(400.0, avg)
    assert np.all((0 <= p) & (p <= 1))
    assert np.all(np.diff(p) <= 1e-15)
    assert np.all(p[avg >= 400.0] == 0.0)
    # overall symmetric under swapping the pairs
    s_v = rng.uniform(0, 1, 2000)
    p_v = rng.uniform(0, 1, 2000)
    w = rng.uniform(0, 1, 2000)
    a = w * s_v + (1 - w) * p_v
    b = (1 - w) * p_v + w * s_v
    assert np.allclose(a, b, atol=1e-12)
