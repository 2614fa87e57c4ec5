import json

import pytest

from cli import _parse, main, parse_cli
from database import get_runs
from systems import RiemannData

SHOCK_RUN = ['run', '--system', 'korchinski', '--ic', '1,0,0,0', '--domain', '-1,1', '--n-cells', '40',
             '--r', '0.45', '--T', '0.2']


def test_parse_run_flags():
    run_config = parse_cli(['run', '--system', 'korchinski', '--ic', '1,1,-1,1', '--domain', '-1,1',
                            '--h', '0.002', '--r', '0.45', '--T', '0.5'])
    assert run_config.command == 'run'
    assert run_config.system == 'korchinski'
    assert run_config.ic == RiemannData(1.0, 1.0, -1.0, 1.0)
    assert run_config.domain == (-1.0, 1.0)
    assert run_config.grid().n_cells == 1000
    assert run_config.r == 0.45 and run_config.r_mode == 'fixed'


def test_list_values_may_start_with_a_minus_sign():
    run_config = parse_cli(['run', '--ic', '-1,1,1,1', '--domain', '-1,1', '--n-cells', '40', '--r', '0.4',
                            '--snapshots', '0.1'])
    assert run_config.ic == RiemannData(-1.0, 1.0, 1.0, 1.0)
    assert run_config.domain == (-1.0, 1.0)
    assert run_config.snapshots == [0.1]

    run_config = parse_cli(['run', '--ic=-2,0,1,0', '--domain=-3,-1', '--jump-x', '-2', '--n-cells', '40',
                            '--r', '0.2'])
    assert run_config.ic == RiemannData(-2.0, 0.0, 1.0, 0.0)
    assert run_config.domain == (-3.0, -1.0)


def test_parse_auto_r_needs_no_r():
    run_config = parse_cli(['run', '--ic', '1,0,0,0', '--n-cells', '50', '--auto-r'])
    assert run_config.r_mode == 'auto'
    assert run_config.r is None
    assert run_config.grid().h == pytest.approx(0.04)


def test_preset_values_are_defaults_for_flags():
    run_config = parse_cli(['table', '--preset', 'kk-singular', '--beta', '0.3'])
    assert run_config.preset == 'kk-singular'
    assert run_config.alpha == 0.2
    assert run_config.gamma == 0.4
    assert run_config.beta == 0.3
    assert run_config.domain == (-4.0, 4.0)


@pytest.mark.parametrize("argv", [
    ['run', '--ic', '1,0,0,0', '--h', '0', '--r', '0.4'],
    ['run', '--ic', '1,0,0,0', '--h', '0.1', '--bogus'],
    ['run', '--ic', '1,0,0,0', '--h', '0.1', '--n-cells', '7', '--r', '0.4'],
    ['run', '--ic', '1,0,0,0', '--h', '0.1'],
    ['run', '--ic', '1,0,0', '--h', '0.1', '--r', '0.4'],
    ['run', '--ic', '1,0,0,0', '--h', '0.1', '--auto-r', '--adaptive-r'],
    ['table'],
    ['table', '--preset', 'no-such-preset']
])
def test_invalid_input_exits_with_status_2(argv):
    with pytest.raises(SystemExit) as excinfo:
        parse_cli(argv)
    assert excinfo.value.code == 2


def test_config_file_is_overridden_by_flags(tmp_path):
    path = tmp_path / 'run.json'
    path.write_text(json.dumps({'ic': '1,0,0,0', 'h': 0.01, 'r': 0.3, 'T': 2.0, 'colour': 'red'}))
    run_config = parse_cli(['run', '--config', str(path), '--r', '0.4'])
    assert run_config.r == 0.4
    assert run_config.h == 0.01
    assert run_config.T == 2.0
    assert run_config.ic == RiemannData(1.0, 0.0, 0.0, 0.0)


def test_run_writes_profiles_script_and_residuals(tmp_path, capsys):
    out = tmp_path / 'shock'
    code = main(SHOCK_RUN + ['--out', str(out), '--snapshots', '0.1', '--residual'])
    assert code == 0
    for suffix in ('_final.csv', '.gp', '_monitor.csv', '_residual.csv'):
        assert (tmp_path / f'shock{suffix}').exists(), suffix
    assert len(list(tmp_path.glob('shock_t*.csv'))) == 1

    final_lines = (tmp_path / 'shock_final.csv').read_text().splitlines()
    assert final_lines[0] == 'x,u,v'
    assert len(final_lines) == 41

    script = (tmp_path / 'shock.gp').read_text()
    assert script.count('using 1:2') == 2
    assert 'q28' in capsys.readouterr().out


def test_run_reports_cfl_violation_as_failure(tmp_path):
    argv = ['run', '--system', 'korchinski', '--ic', '1,0,0,0', '--n-cells', '40', '--r', '3', '--T', '0.2',
            '--out', str(tmp_path / 'bad')]
    assert main(argv) == 1


def test_run_with_missing_custom_system_is_a_configuration_error(tmp_path):
    argv = ['run', '--system', f'custom:{tmp_path / "missing.json"}', '--ic', '1,0,0,0', '--n-cells', '40',
            '--r', '0.4', '--out', str(tmp_path / 'x')]
    assert main(argv) == 2


def test_table_records_rows_and_history_lists_them(tmp_path, capsys):
    db = str(tmp_path / 'results.db')
    out = str(tmp_path / 'sweep')
    assert main(['table', '--preset', 'korchinski-shock', '--db', db, '--out', out, '--workers', '1']) == 0
    assert (tmp_path / 'sweep_korchinski-shock_table.csv').exists()

    runs = get_runs('korchinski-shock', db_path=db)
    assert list(runs['h']) == [0.01, 0.005]
    assert set(runs['status']) == {'completed'}

    capsys.readouterr()
    assert main(['history', '--preset', 'korchinski-shock', '--db', db]) == 0
    assert 'korchinski-shock' in capsys.readouterr().out


def test_verify_reports_every_suite(capsys):
    assert main(['verify', '--seed', '7', '--fields', '20', '--steps', '60']) == 0
    lines = capsys.readouterr().out.splitlines()
    reported = {line.split()[1].rstrip(':') for line in lines if line.startswith(('PASS', 'FAIL'))}
    assert reported == {'overlap_partition', 'max_principle', 'l1_stability', 'mass_conservation',
                        'recombination'}


def test_config_file_overrides_preset_values(tmp_path):
    path = tmp_path / 'run.json'
    path.write_text(json.dumps({'alpha': 0.1, 'T': 2.0}))
    run_config = parse_cli(['table', '--preset', 'kk-singular', '--config', str(path), '--T', '3'])
    assert run_config.alpha == 0.1
    assert run_config.T == 3.0
    assert run_config.gamma == 0.4


def test_table_overrides_reach_the_preset():
    _, run_config, preset = _parse(['table', '--preset', 'kk-singular', '--beta', '0.3', '--T', '1'])
    assert preset.beta == 0.3
    assert preset.T == 1.0
    assert preset.alpha == 0.2
    assert preset.grids[0] == pytest.approx(0.04)

    _, _, preset = _parse(['residual', '--preset', 'korchinski-shock', '--system', 'kk'])
    assert preset.system == 'kk'


def test_run_without_monitor_table(tmp_path):
    out = tmp_path / 'shock'
    assert main(SHOCK_RUN + ['--out', str(out), '--no-monitor']) == 0
    assert (tmp_path / 'shock_final.csv').exists()
    assert not (tmp_path / 'shock_monitor.csv').exists()
