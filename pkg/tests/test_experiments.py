import numpy as np
import pytest

from errors import ConfigurationError, InsufficientData
from experiments import (PRESETS, ExperimentPreset, MassTracker, MaxPrincipleChecker, get_preset,
                         measure_mass_growth, measure_shock_position, oracle_burgers_shock,
                         oracle_delta_mass_rate, preset_kk_classic, preset_kk_overcompressive,
                         preset_kk_singular, preset_korchinski_delta, preset_korchinski_shock, run_preset,
                         run_property_suites, run_table, window_mass)
from output import peak_ratio
from scheme import GridSpec, StateField, discretize_riemann
from systems import RiemannData


@pytest.mark.parametrize("name", sorted(PRESETS))
def test_builtin_presets_are_valid(name):
    preset = get_preset(name)
    assert preset.name == name
    for h in preset.grids:
        assert GridSpec.from_h(*preset.domain, h).n_cells >= 16


def test_kk_singular_sweeps():
    wide = preset_kk_singular()
    assert wide.rows()[:2] == [(0.04, 0.3), (0.02, 0.24)]
    assert wide.domain == (-4.0, 4.0) and wide.T == 5.0
    assert (wide.alpha, wide.beta, wide.gamma) == (0.2, 0.5, 0.4)

    small = preset_kk_singular(small=True)
    assert small.rows()[-1] == (0.0000125, 0.012)
    assert small.domain == (-0.5, 0.5) and small.T == 1.0
    assert small.alpha == 0.2


def test_overcompressive_preset_uses_fixed_r():
    preset = preset_kk_overcompressive()
    assert all(r == 0.45 for _, r in preset.rows())
    assert preset.beta == preset.gamma == 0.0
    assert preset.rows()[0][0] == 0.005


def test_preset_dict_round_trip():
    preset = preset_korchinski_delta()
    restored = ExperimentPreset.from_dict(preset.to_dict())
    assert restored.to_dict() == preset.to_dict()


def test_preset_rejects_coarse_grid():
    data = preset_korchinski_shock().to_dict()
    data.update(grids=[0.25], r_values=[0.45])
    with pytest.raises(ConfigurationError):
        ExperimentPreset.from_dict(data)


def test_preset_rejects_mismatched_r_values():
    data = preset_korchinski_shock().to_dict()
    data.update(r_values=[0.45])
    with pytest.raises(ConfigurationError):
        ExperimentPreset.from_dict(data)


def test_preset_rejects_unknown_fields():
    data = preset_korchinski_shock().to_dict()
    data['colour'] = 'red'
    with pytest.raises(ConfigurationError):
        ExperimentPreset.from_dict(data)


def test_unknown_preset_name():
    with pytest.raises(ConfigurationError):
        get_preset('kk-unknown')


@pytest.mark.parametrize("u_l, u_r, expected", [(1.0, 0.0, 1.0), (1.0, -1.0, 0.0), (0.5, 0.5, 1.0)])
def test_burgers_shock_oracle(u_l, u_r, expected):
    assert oracle_burgers_shock(u_l, u_r) == expected


def test_delta_mass_rate_oracle():
    assert oracle_delta_mass_rate(1.0, 1.0, -1.0, 1.0) == 2.0
    assert oracle_delta_mass_rate(1.0, 0.0, 0.0, 0.0) == 0.0


def test_shock_position_of_exact_step():
    grid = GridSpec.from_h(-1.0, 1.0, 0.05)
    state = discretize_riemann(RiemannData(1.0, 0.0, 0.0, 0.0, jump_x=0.3), grid)
    assert abs(measure_shock_position(state) - 0.3) <= grid.h / 2


def test_shock_position_of_ramp():
    grid = GridSpec.from_h(0.0, 1.0, 0.1)
    centers = grid.centers()
    state = StateField(grid, 1.0 - centers, np.zeros(grid.n_cells))
    assert measure_shock_position(state, level=0.5) == pytest.approx(0.5)


def test_shock_position_without_crossing():
    grid = GridSpec.from_h(0.0, 1.0, 0.1)
    state = StateField(grid, np.ones(10), np.zeros(10))
    with pytest.raises(ConfigurationError):
        measure_shock_position(state, level=2.0)


@pytest.mark.parametrize("h", [0.01, 0.005])
def test_burgers_shock_travels_at_oracle_speed(h):
    preset = preset_korchinski_shock()
    result, _ = run_preset(preset, h)
    expected = preset.riemann.jump_x + oracle_burgers_shock(1.0, 0.0) * 0.5
    assert abs(measure_shock_position(result.final) - expected) <= 2 * h


def test_mass_growth_fit():
    times = np.linspace(0.0, 0.5, 51)
    assert measure_mass_growth(times, 0.2 + 2.0 * times) == pytest.approx(2.0)
    with pytest.raises(InsufficientData):
        measure_mass_growth([0.0, 0.05], [1.0, 2.0])


def test_window_mass_weights_cut_cells():
    grid = GridSpec.from_h(-1.0, 1.0, 0.5)
    state = StateField(grid, np.zeros(4), np.ones(4))
    assert window_mass(state, (-0.25, 0.25)) == pytest.approx(0.5)


def test_delta_shock_mass_grows_at_oracle_rate():
    preset = preset_korchinski_delta()
    tracker = MassTracker(window=preset.mass_window)
    checker = MaxPrincipleChecker()
    result, _ = run_preset(preset, 0.002, observers=[tracker, checker])
    rate = oracle_delta_mass_rate(1.0, 1.0, -1.0, 1.0)
    assert tracker.growth_rate((0.1, 0.5)) == pytest.approx(rate, rel=0.05)

    assert checker.passed, checker.first_violation
    assert np.all(np.abs(result.final.u) <= 1.0 + 1e-12)

    # Totals change only by the inflow u*v through both boundaries
    totals = np.array(tracker.totals)
    times = np.array(tracker.times)
    np.testing.assert_allclose(totals[:, 1] - totals[0, 1], 2.0 * times, atol=1e-10)


def test_run_table_with_no_rows():
    data = preset_korchinski_shock().to_dict()
    data.update(grids=[], r_values=[])
    result = run_table(ExperimentPreset.from_dict(data), workers=1)
    assert result.table().empty
    assert 'insufficient_data' in result.verdict


def test_run_table_single_row_has_no_verdict():
    data = preset_korchinski_shock().to_dict()
    data.update(grids=[0.05], r_values=[0.45], T=0.1)
    result = run_table(ExperimentPreset.from_dict(data), workers=1)
    assert len(result.reports) == 1
    assert 'insufficient_data' in result.verdict


def test_run_table_continues_after_failed_row():
    data = preset_korchinski_shock().to_dict()
    data.update(grids=[0.1, 0.05, 0.025], r_values=[0.45, 3.0, 0.45], T=0.2)
    result = run_table(ExperimentPreset.from_dict(data), workers=1)
    assert len(result.failures) == 1
    assert result.failures[0]['h'] == 0.05
    assert result.failures[0]['error'] == 'CflViolation'
    assert [report.h for report in result.reports] == [0.1, 0.025]


def test_property_suites_pass_on_a_short_budget():
    results = run_property_suites(seed=7, fields=20, steps=60)
    failed = {name: outcome['message'] for name, outcome in results.items() if not outcome['passed']}
    assert not failed


def test_peak_ratio_of_spike():
    grid = GridSpec.from_h(-1.0, 1.0, 0.05)
    v = np.ones(grid.n_cells)
    v[20] = 40.0
    assert peak_ratio(StateField(grid, np.zeros(grid.n_cells), v)) == pytest.approx(40.0)


@pytest.mark.slow
def test_singular_peak_grows_under_refinement():
    preset = preset_kk_singular()
    runs = [run_preset(preset, h, r) for h, r in [(0.005, 0.132), (0.0025, 0.095), (0.00125, 0.065)]]
    peaks = [report.peak_v for _, report in runs]
    assert peaks[0] < peaks[1] < peaks[2]
    finest, _ = runs[-1]
    assert peak_ratio(finest.final) > 10


@pytest.mark.slow
def test_classical_peaks_stay_bounded():
    result = run_table(preset_kk_classic(), workers=1)
    assert not result.failures
    assert result.verdict['bounded']
    peaks = [report.peak_v for report in result.reports]
    assert abs(peaks[-1] - peaks[-2]) <= 0.01 * peaks[-1]
