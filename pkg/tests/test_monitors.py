import math

import numpy as np
import pytest

from errors import InsufficientData
from experiments import L1Tracker, preset_kk_overcompressive, preset_kk_singular, run_preset
from monitors import (MonitorObserver, MonitorReport, assumption_verdict, format_monitor_table, loglog_slope,
                      monitor_observe, monitor_table, new_report)
from scheme import SchemeParams, StateField, discretize_riemann, run_simulation
from systems import RiemannData

FIRST_TABLE = [
    (0.04, 0.300, 0.6289, 14.97, 3.62),
    (0.02, 0.240, 0.5830, 14.97, 2.84),
    (0.01, 0.170, 0.5309, 14.96, 2.26),
    (0.005, 0.132, 0.5271, 14.93, 1.84),
    (0.0025, 0.095, 0.5178, 14.90, 1.53),
    (0.00125, 0.065, 0.5021, 14.87, 1.29),
    (0.000625, 0.040, 0.4326, 14.85, 1.10),
    (0.0003125, 0.025, 0.4024, 14.83, 0.96)
]

SECOND_TABLE_R = [(0.002, 0.18), (0.001, 0.13), (0.0005, 0.09), (0.00025, 0.06), (0.000125, 0.043)]


def _reports(rows):
    return [MonitorReport(h=h, r=r, q27=q27, q28=q28, q29=q29) for h, r, q27, q28, q29 in rows]


def test_zero_state_gives_zero_monitors(small_grid, kk):
    state = StateField(small_grid, np.zeros(40), np.zeros(40))
    params = SchemeParams(r=0.5, beta=0.5, gamma=0.4)
    report = monitor_observe(state, kk, params, new_report(small_grid, params, 0.5))
    assert report.q27 == report.q28 == report.q29 == 0.0


def test_monitor_values_on_constant_state(small_grid, kk):
    state = StateField(small_grid, np.full(40, 2.0), np.full(40, -1.0))
    params = SchemeParams(r=0.25, beta=0.5, gamma=0.0)
    report = monitor_observe(state, kk, params, new_report(small_grid, params, 0.25))
    h = small_grid.h
    assert report.q27 == pytest.approx(math.sqrt(h) * 2.0)
    assert report.q28 == pytest.approx(4.0)
    # |B| = |v u - u^3/3 + u| = |-2 - 8/3 + 2|
    assert report.q29 == pytest.approx(40 * (8.0 / 3.0) * h)
    assert report.peak_v == 1.0
    assert report.h_over_r == pytest.approx(h / 0.25)


def test_first_table_verdict_is_bounded_and_decreasing():
    verdict = assumption_verdict(_reports(FIRST_TABLE))
    assert verdict['h_over_r_decreasing']
    assert verdict['bounded']
    assert verdict['max_q28'] == pytest.approx(14.97)


def test_second_table_h_over_r_scales_like_sqrt_h():
    reports = [MonitorReport(h=h, r=r, q27=0.2, q28=1.9, q29=0.1) for h, r in SECOND_TABLE_R]
    verdict = assumption_verdict(reports)
    assert verdict['h_over_r_decreasing']
    assert 0.35 <= verdict['h_over_r_slope'] <= 0.65


def test_identical_reports_are_not_decreasing():
    report = MonitorReport(h=0.01, r=0.1, q27=1.0, q28=1.0, q29=1.0)
    verdict = assumption_verdict([report, report, report])
    assert not verdict['h_over_r_decreasing']
    assert verdict['bounded']


def test_growing_last_value_is_flagged():
    rows = [(0.04, 0.3, 1.0, 1.0, 1.0), (0.02, 0.2, 1.0, 1.0, 1.0), (0.01, 0.1, 1.0, 2.0, 1.0)]
    verdict = assumption_verdict(_reports(rows))
    assert verdict['possibly_unbounded']['q28']
    assert not verdict['bounded']


def test_verdict_needs_three_reports():
    with pytest.raises(InsufficientData):
        assumption_verdict(_reports(FIRST_TABLE[:2]))


def test_loglog_slope():
    h = np.array([1e-2, 5e-3, 2.5e-3])
    assert loglog_slope(h, h ** 2) == pytest.approx(2.0)
    assert math.isnan(loglog_slope([0.1, 0.1], [1.0, 2.0]))


def test_monitor_table_layout():
    reports = _reports(FIRST_TABLE[:1])
    table = monitor_table(reports)
    assert list(table.columns) == ['h', 'r', 'h_over_r', 'q27', 'q28', 'q29', 'peak_v', 'steps']
    assert "0.1333" in format_monitor_table(reports)
    assert format_monitor_table([]) == "(no rows)"


def test_cfl_max_stays_below_one(small_grid, kk):
    ic = discretize_riemann(RiemannData(1.5, 0.0, -1.725862, 1.276293), small_grid)
    monitor = MonitorObserver()
    run_simulation(ic, kk, SchemeParams(r=0.45, T=0.5), [monitor])
    assert 0.0 < monitor.report.cfl_max <= 1.0
    assert monitor.report.steps > 0


def test_korchinski_q28_never_grows(small_grid, korchinski, rng):
    u = np.zeros(40)
    v = np.zeros(40)
    u[10:30] = rng.uniform(-1.0, 1.0, 20)
    v[10:30] = rng.uniform(-1.0, 1.0, 20)
    ic = StateField(small_grid, u, v)
    r = 0.5 / np.max(np.abs(u))
    tracker = L1Tracker()
    run_simulation(ic, korchinski, SchemeParams(r=r, alpha=0.0, T=100 * r * small_grid.h), [tracker])
    norms = np.array(tracker.history)
    assert len(norms) == 101
    assert np.all(np.diff(norms[:, 0]) <= 1e-12)
    assert np.all(np.diff(norms[:, 1]) <= 1e-12)
    assert tracker.passed


def test_adaptive_report_uses_smallest_r(small_grid, korchinski):
    ic = discretize_riemann(RiemannData(1.0, 0.0, 0.0, 0.0), small_grid)
    monitor = MonitorObserver()
    result = run_simulation(ic, korchinski, SchemeParams(r_mode='adaptive', T=0.2), [monitor])
    assert monitor.report.r == result.r_min
    assert monitor.report.h_over_r == pytest.approx(small_grid.h / result.r_min)


@pytest.mark.slow
def test_overcompressive_rows_are_h_independent():
    preset = preset_kk_overcompressive()
    reports = [run_preset(preset, h)[1] for h in (0.001, 0.0005)]
    coarse, fine = reports
    assert fine.q27 == pytest.approx(1.9205, rel=0.01)
    assert coarse.q27 == pytest.approx(fine.q27, rel=1e-3)
    assert coarse.q28 == pytest.approx(fine.q28, rel=0.02)
    assert coarse.q29 == pytest.approx(fine.q29, rel=0.02)


@pytest.mark.slow
def test_first_table_coarse_rows():
    preset = preset_kk_singular()
    for (h, r, q27, q28, q29) in FIRST_TABLE[:2]:
        _, report = run_preset(preset, h, r)
        assert report.h_over_r == pytest.approx(h / r)
        assert report.q28 == pytest.approx(q28, rel=0.03)
        assert report.q29 == pytest.approx(q29, rel=0.15)
        assert report.q27 == pytest.approx(q27, rel=0.25)
