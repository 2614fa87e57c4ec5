"""
Command-line entry point.

    python cli.py run --system korchinski --ic 1,1,-1,1 --domain -1,1 --h 0.002 --r 0.45 --T 0.5
    python cli.py table --preset kk-singular-small --db data/results.db
    python cli.py residual --preset korchinski-rarefaction
    python cli.py verify --seed 7
    python cli.py history --preset kk-singular

Exit codes: 0 success, 1 run failure, 2 usage or configuration error.
"""
import argparse
import dataclasses
import json
import logging
import sys

import config
from errors import Blowup, ConfigurationError, SchemeError
from experiments import preset_system, run_property_suites, run_residual_study, run_table
from loaders import CUSTOM_PREFIX, load_flux_table, resolve_preset, resolve_system
from monitors import MonitorObserver, format_monitor_table, monitor_table
from output import ProfileSnapshotter, emit_plot_script, write_frame, write_profile_csv
from residual import ResidualAccumulator, ResidualReport, default_test_functions, order_table
from scheme import discretize_riemann, run_simulation
from settings import build_run_config, scheme_params

logger = logging.getLogger(__name__)


def _common_arguments():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--system', help="kk | korchinski | custom:<flux table .json>")
    common.add_argument('--ic', help="Riemann data u_l,v_l,u_r,v_r")
    common.add_argument('--jump-x', dest='jump_x', type=float, help="Jump location (default 0)")
    common.add_argument('--preset', help="Built-in preset name or preset .json file")
    common.add_argument('--domain', help="x_min,x_max")
    common.add_argument('--h', type=float, help="Cell width")
    common.add_argument('--n-cells', dest='n_cells', type=int, help="Number of cells (alternative to --h)")
    common.add_argument('--r', type=float, help="Ratio dt/h")
    mode = common.add_mutually_exclusive_group()
    mode.add_argument('--auto-r', dest='r_mode', action='store_const', const='auto',
                      help="Pick r from the initial data, halve it on CFL violations")
    mode.add_argument('--adaptive-r', dest='r_mode', action='store_const', const='adaptive',
                      help="Recompute r before every step")
    common.add_argument('--cfl-target', dest='cfl_target', type=float)
    common.add_argument('--alpha', type=float)
    common.add_argument('--beta', type=float)
    common.add_argument('--gamma', type=float)
    common.add_argument('--T', type=float, help="Final time")
    common.add_argument('--out', help="Output path prefix")
    common.add_argument('--snapshots', help="Comma-separated snapshot times")
    common.add_argument('--residual', action='store_const', const=True, help="Accumulate weak residuals")
    common.add_argument('--no-monitor', dest='monitor', action='store_const', const=False,
                        help="Skip the monitor table of a single run")
    common.add_argument('--config', help="JSON run config; flags override its values")
    common.add_argument('--seed', type=int)
    common.add_argument('--db', help="sqlite results store")
    common.add_argument('--png', action='store_const', const=True, help="Also render PNG figures")
    common.add_argument('--workers', type=int, help=f"Parallel rows (default SINGSHOCK_THREADS or {config.DEFAULT_THREADS})")
    common.add_argument('--verbose', '-v', action='store_true')
    return common


def build_parser():
    parser = argparse.ArgumentParser(
        prog='singshock',
        description="Splitting scheme for singular and delta shocks in 2x2 conservation laws"
    )
    common = _common_arguments()
    subparsers = parser.add_subparsers(dest='command', required=True)
    subparsers.add_parser('run', parents=[common], help="Single simulation")
    subparsers.add_parser('table', parents=[common], help="Monitor table of a preset sweep")
    subparsers.add_parser('residual', parents=[common], help="Weak-residual convergence study")
    verify = subparsers.add_parser('verify', parents=[common], help="Randomized property suites")
    verify.add_argument('--fields', type=int, default=200, help="Random initial fields for the Korchinski suites")
    verify.add_argument('--steps', type=int, default=500, help="Steps per random field")
    subparsers.add_parser('history', parents=[common], help="Rows stored in the results database")
    return parser


def _preset_base(preset):
    base = {
        'system': preset.system,
        'ic': preset.riemann,
        'jump_x': preset.riemann.jump_x,
        'domain': preset.domain,
        'T': preset.T,
        'alpha': preset.alpha,
        'beta': preset.beta,
        'gamma': preset.gamma,
        'r_mode': preset.r_mode,
        'residual': preset.residual
    }
    if preset.grids:
        base['h'] = preset.grids[0]
        if preset.r_values:
            base['r'] = preset.r_values[0]
    return base


# Comma lists may start with '-', which argparse would take for a flag
LIST_FLAGS = ('--ic', '--domain', '--snapshots')


def _join_list_values(argv):
    joined = []
    tokens = iter(argv)
    for token in tokens:
        if token in LIST_FLAGS:
            value = next(tokens, None)
            joined.append(token if value is None else f"{token}={value}")
        else:
            joined.append(token)
    return joined


def _parse(argv):
    parser = build_parser()
    args = parser.parse_args(_join_list_values(argv))
    flags = {key: value for key, value in vars(args).items()
             if key not in ('command', 'config', 'verbose', 'fields', 'steps')}

    preset = None
    try:
        if args.command in ('table', 'residual') and not args.preset:
            raise ConfigurationError(f"'{args.command}' needs --preset", field='preset')
        if args.preset and args.command != 'history':
            preset = resolve_preset(args.preset)
            base = _preset_base(preset)
        else:
            base = None
        run_config = build_run_config(args.command, flags, args.config, base=base)
        if preset is not None and args.command in ('table', 'residual'):
            preset = _preset_with_overrides(preset, run_config)
    except ConfigurationError as e:
        parser.error(str(e))
    return args, run_config, preset


def _preset_with_overrides(preset, run_config):
    """
    The preset sweep with the scheme parameters, data and domain of the
    merged run config. Grid and r lists always come from the preset.
    """
    riemann = dataclasses.replace(run_config.ic, jump_x=run_config.jump_x)
    changes = dict(riemann=riemann, domain=run_config.domain, T=run_config.T, alpha=run_config.alpha,
                   beta=run_config.beta, gamma=run_config.gamma, r_mode=run_config.r_mode)
    if run_config.r_mode != 'fixed':
        changes['r_values'] = None
    if run_config.system != preset.system:
        system = run_config.system
        if system.startswith(CUSTOM_PREFIX):
            table = load_flux_table(system[len(CUSTOM_PREFIX):])
            changes.update(system=table.get('name', 'custom'), system_table=table)
        else:
            changes.update(system=system, system_table=None)
    return dataclasses.replace(preset, **changes)


def parse_cli(argv):
    """
    argv to RunConfig. Invalid input exits with status 2.
    """
    _, run_config, _ = _parse(argv)
    return run_config


def _configure_logging(verbose):
    level = logging.DEBUG if verbose else config.LOG_LEVEL
    logging.basicConfig(level=level, format=config.LOG_FORMAT)


def _command_run(run_config, preset):
    if run_config.ic is None:
        raise ConfigurationError("'run' needs --ic or --preset", field='ic')
    if preset is not None and preset.system_table is not None and run_config.system == preset.system:
        system = preset_system(preset)
    else:
        system = resolve_system(run_config.system)

    grid = run_config.grid()
    riemann = dataclasses.replace(run_config.ic, jump_x=run_config.jump_x)
    ic = discretize_riemann(riemann, grid)
    params = scheme_params(run_config)

    monitor = MonitorObserver()
    observers = [monitor]
    snapshotter = None
    if run_config.snapshots:
        snapshotter = ProfileSnapshotter(run_config.out, run_config.snapshots)
        observers.append(snapshotter)
    accumulator = None
    if run_config.residual:
        shock_speed = preset.shock_speed if preset is not None else 0.0
        accumulator = ResidualAccumulator(default_test_functions(grid, params.T, riemann.jump_x, shock_speed))
        observers.append(accumulator)

    try:
        result = run_simulation(ic, system, params, observers)
    except Blowup as e:
        if e.last_state is not None:
            path = write_profile_csv(e.last_state, f"{run_config.out}_last_valid.csv")
            print(f"Blow-up: {e}. Last valid state saved to {path}")
        else:
            print(f"Blow-up: {e}")
        return 1

    report = monitor.report
    report.restarts = result.restarts
    final_path = write_profile_csv(result.final, f"{run_config.out}_final.csv")
    profiles = (snapshotter.paths if snapshotter else []) + [final_path]
    emit_plot_script(profiles, f"{run_config.out}.gp", title=f"{system.name} t={result.final.t:.6g}")
    if run_config.monitor:
        write_frame(monitor_table([report]), f"{run_config.out}_monitor.csv")
        print(format_monitor_table([report]))
    print(f"t={result.final.t:.6g} steps={result.steps} r={result.r:.6g} restarts={result.restarts} "
          f"cfl_max={report.cfl_max:.6g}")
    if result.boundary_polluted:
        print("Warning: a wave reached the boundary; monitor values may be polluted")

    if accumulator is not None:
        residuals = ResidualReport()
        residuals.add_run(grid.h, accumulator)
        frame = residuals.to_frame()
        write_frame(frame, f"{run_config.out}_residual.csv")
        print(frame.to_string(index=False))

    if run_config.png:
        from plots import plot_profiles, save_figure
        save_figure(plot_profiles([result.final], title=system.name), f"{run_config.out}.png")
    return 0


def _command_table(run_config, preset):
    result = run_table(preset, workers=run_config.workers, db_path=run_config.db)
    write_frame(result.table(), f"{run_config.out}_{preset.name}_table.csv")

    print(result.formatted())
    for row in result.failures:
        print(f"Row h={row['h']:g} r={row['r']} failed: {row['message']}")
    print(json.dumps(result.verdict, indent=2, sort_keys=True))

    if run_config.png and result.reports:
        from plots import plot_h_over_r, save_figure
        save_figure(plot_h_over_r(result.reports, title=preset.name), f"{run_config.out}_{preset.name}_h_over_r.png")
    return 1 if result.failures else 0


def _command_residual(run_config, preset):
    study = run_residual_study(preset, workers=run_config.workers, db_path=run_config.db)
    frame = study.report.to_frame()
    write_frame(frame, f"{run_config.out}_{preset.name}_residual.csv")
    print(frame.to_string(index=False))

    if study.orders is None:
        print(f"Order not estimated: {study.message}")
        return 0
    orders = order_table(study.orders)
    write_frame(orders, f"{run_config.out}_{preset.name}_order.csv")
    print(orders.to_string(index=False))
    return 0


def _command_verify(run_config, args):
    results = run_property_suites(seed=run_config.seed, fields=args.fields, steps=args.steps)
    for name, outcome in results.items():
        status = "PASS" if outcome["passed"] else "FAIL"
        print(f"{status} {name}: {outcome['message']}")
    return 0 if all(outcome["passed"] for outcome in results.values()) else 1


def _command_history(run_config):
    from database import get_runs
    runs = get_runs(run_config.preset, db_path=run_config.db)
    if runs.empty:
        print("No stored runs")
    else:
        print(runs.to_string(index=False))
    return 0


def main(argv=None):
    args, run_config, preset = _parse(sys.argv[1:] if argv is None else argv)
    _configure_logging(args.verbose)

    try:
        if args.command == 'run':
            return _command_run(run_config, preset)
        if args.command == 'table':
            return _command_table(run_config, preset)
        if args.command == 'residual':
            return _command_residual(run_config, preset)
        if args.command == 'verify':
            return _command_verify(run_config, args)
        return _command_history(run_config)
    except ConfigurationError as e:
        print(f"Configuration error: {e}", file=sys.stderr)
        return 2
    except (SchemeError, OSError) as e:
        print(f"Run failed: {e}", file=sys.stderr)
        return 1


if __name__ == '__main__':
    sys.exit(main())
