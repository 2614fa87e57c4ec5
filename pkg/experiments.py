"""
Riemann-problem presets, monitor-table sweeps, residual convergence studies,
analytic oracles and the randomized property suites.
"""
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

import config
from errors import ConfigurationError, InsufficientData, SchemeError
from monitors import MonitorObserver, assumption_verdict, format_monitor_table, monitor_table
from residual import ResidualAccumulator, ResidualReport, default_test_functions, order_estimate
from scheme import (ConstantExtension, GridSpec, Observer, SchemeParams, StateField, averaging_step,
                    centered_step, compute_velocity, discretize_riemann, full_step, overlap_length,
                    run_simulation, transport_step)
from systems import (RiemannData, get_builtin_system, recombination_error, system_custom,
                     system_keyfitz_kranzer, system_korchinski)

logger = logging.getLogger(__name__)


@dataclass
class ExperimentPreset:
    name: str
    system: str
    riemann: RiemannData
    domain: Tuple[float, float]
    T: float
    alpha: float = config.DEFAULT_PARAMS['alpha']
    beta: float = config.DEFAULT_PARAMS['beta']
    gamma: float = config.DEFAULT_PARAMS['gamma']
    grids: List[float] = field(default_factory=list)
    # One r per grid in fixed mode; None lets auto/adaptive pick r
    r_values: Optional[List[float]] = None
    r_mode: str = 'fixed'
    monitor: bool = True
    residual: bool = False
    residual_grids: Optional[List[float]] = None
    shock_speed: float = 0.0
    mass_window: Optional[Tuple[float, float]] = None
    system_table: Optional[dict] = None
    description: str = ""

    def __post_init__(self):
        self.domain = (float(self.domain[0]), float(self.domain[1]))
        self.grids = [float(h) for h in self.grids]
        if self.r_values is not None:
            self.r_values = [float(r) for r in self.r_values]
        if self.residual_grids is not None:
            self.residual_grids = [float(h) for h in self.residual_grids]
        if self.mass_window is not None:
            self.mass_window = (float(self.mass_window[0]), float(self.mass_window[1]))
        self.validate()

    def validate(self):
        x_min, x_max = self.domain
        if not x_max > x_min:
            raise ConfigurationError(f"Preset '{self.name}': empty domain {self.domain}", field='domain')
        if not x_min < self.riemann.jump_x < x_max:
            raise ConfigurationError(f"Preset '{self.name}': jump outside the domain", field='riemann')
        if self.r_mode not in config.R_MODES:
            raise ConfigurationError(f"Preset '{self.name}': unknown r_mode {self.r_mode!r}", field='r_mode')
        if self.r_mode == 'fixed' and self.grids and self.r_values is None:
            raise ConfigurationError(f"Preset '{self.name}': fixed r mode needs r_values", field='r_values')
        if self.r_values is not None and len(self.r_values) != len(self.grids):
            raise ConfigurationError(
                f"Preset '{self.name}': {len(self.r_values)} r values for {len(self.grids)} grids",
                field='r_values'
            )
        for h in self.grids + (self.residual_grids or []):
            grid = GridSpec.from_h(x_min, x_max, h)
            if grid.n_cells < config.MIN_CELLS_PER_PRESET_GRID:
                raise ConfigurationError(
                    f"Preset '{self.name}': h={h:g} gives {grid.n_cells} cells, "
                    f"need at least {config.MIN_CELLS_PER_PRESET_GRID}",
                    field='grids'
                )
        if self.residual_grids and self.r_mode == 'fixed':
            missing = [h for h in self.residual_grids if self.r_for(h) is None]
            if missing:
                raise ConfigurationError(
                    f"Preset '{self.name}': residual grids {missing} have no r value", field='residual_grids'
                )

    def rows(self):
        """
        (h, r) pairs of the table sweep; r is None outside fixed mode.
        """
        if self.r_values is None:
            return [(h, None) for h in self.grids]
        return list(zip(self.grids, self.r_values))

    def r_for(self, h):
        for grid_h, r in self.rows():
            if abs(grid_h - h) <= 1e-12 * h:
                return r
        return None

    def study_grids(self):
        return list(self.residual_grids) if self.residual_grids else self.grids[:4]

    def to_dict(self):
        return {
            'name': self.name,
            'system': self.system,
            'riemann': self.riemann.to_dict(),
            'domain': list(self.domain),
            'T': self.T,
            'alpha': self.alpha,
            'beta': self.beta,
            'gamma': self.gamma,
            'grids': list(self.grids),
            'r_values': None if self.r_values is None else list(self.r_values),
            'r_mode': self.r_mode,
            'monitor': self.monitor,
            'residual': self.residual,
            'residual_grids': None if self.residual_grids is None else list(self.residual_grids),
            'shock_speed': self.shock_speed,
            'mass_window': None if self.mass_window is None else list(self.mass_window),
            'system_table': self.system_table,
            'description': self.description
        }

    @classmethod
    def from_dict(cls, data):
        required = {'name', 'system', 'riemann', 'domain', 'T'}
        missing = required - set(data)
        if missing:
            raise ConfigurationError(f"Preset is missing required fields: {', '.join(sorted(missing))}")
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ConfigurationError(f"Unknown preset fields: {', '.join(sorted(unknown))}")
        values = dict(data)
        values['riemann'] = RiemannData.from_dict(data['riemann'])
        try:
            values['T'] = float(data['T'])
            values['domain'] = tuple(float(x) for x in data['domain'])
        except (TypeError, ValueError) as e:
            raise ConfigurationError(f"Invalid preset field: {e}")
        if len(values['domain']) != 2:
            raise ConfigurationError("Preset domain needs two values [x_min, x_max]", field='domain')
        return cls(**values)


# Built-in presets

KK_SINGULAR_DATA = RiemannData(1.5, 0.0, -2.065426, 1.410639)
KK_OVERCOMPRESSIVE_DATA = RiemannData(1.5, 0.0, -1.895644, 1.343466)
KK_CLASSIC_DATA = RiemannData(1.5, 0.0, -1.725862, 1.276293)

# Rankine-Hugoniot speed of the first equation across the singular-shock states
KK_SINGULAR_SPEED = -0.17

KK_SINGULAR_GRIDS = [0.04, 0.02, 0.01, 0.005, 0.0025, 0.00125, 0.000625, 0.0003125]
KK_SINGULAR_R = [0.300, 0.240, 0.170, 0.132, 0.095, 0.065, 0.040, 0.025]

KK_SINGULAR_SMALL_GRIDS = [0.002, 0.001, 0.0005, 0.00025, 0.000125, 1.0 / 12000, 0.0000625,
                           0.00005, 1.0 / 30000, 0.000025, 1.0 / 60000, 0.0000125]
KK_SINGULAR_SMALL_R = [0.18, 0.13, 0.09, 0.06, 0.043, 0.035, 0.030, 0.026, 0.021, 0.019, 0.015, 0.012]

KK_OVERCOMPRESSIVE_GRIDS = [0.005, 0.001, 0.0005, 0.00025, 0.000125, 0.0000625]


def preset_kk_singular(small=False):
    """
    Singular-shock Riemann problem for Keyfitz-Kranzer.

    small=False: domain [-4, 4], T = 5, coarse sweep.
    small=True: domain [-0.5, 0.5], T = 1, fine sweep down to h = 1.25e-5.
    """
    if small:
        return ExperimentPreset(
            name='kk-singular-small',
            system='kk',
            riemann=KK_SINGULAR_DATA,
            domain=(-0.5, 0.5),
            T=1.0,
            alpha=0.2, beta=0.5, gamma=0.4,
            grids=list(KK_SINGULAR_SMALL_GRIDS),
            r_values=list(KK_SINGULAR_SMALL_R),
            residual=True,
            residual_grids=[0.002, 0.001, 0.0005, 0.00025],
            shock_speed=KK_SINGULAR_SPEED,
            description="Singular shock on the narrow domain, fine grids"
        )
    return ExperimentPreset(
        name='kk-singular',
        system='kk',
        riemann=KK_SINGULAR_DATA,
        domain=(-4.0, 4.0),
        T=5.0,
        alpha=0.2, beta=0.5, gamma=0.4,
        grids=list(KK_SINGULAR_GRIDS),
        r_values=list(KK_SINGULAR_R),
        shock_speed=KK_SINGULAR_SPEED,
        description="Singular shock on the wide domain"
    )


def preset_kk_overcompressive():
    # Domain and T of this sweep are assumed: [-0.5, 0.5] and T = 1
    return ExperimentPreset(
        name='kk-overcompressive',
        system='kk',
        riemann=KK_OVERCOMPRESSIVE_DATA,
        domain=(-0.5, 0.5),
        T=1.0,
        alpha=0.2, beta=0.0, gamma=0.0,
        grids=list(KK_OVERCOMPRESSIVE_GRIDS),
        r_values=[0.45] * len(KK_OVERCOMPRESSIVE_GRIDS),
        description="Limit overcompressive shock, bounded velocity"
    )


def preset_kk_classic():
    # Wider than the overcompressive domain: these waves leave [-0.5, 0.5] before T = 1
    grids = [0.02, 0.01, 0.005, 0.0025]
    return ExperimentPreset(
        name='kk-classic',
        system='kk',
        riemann=KK_CLASSIC_DATA,
        domain=(-4.0, 4.0),
        T=1.0,
        alpha=0.2, beta=0.0, gamma=0.0,
        grids=grids,
        r_values=[0.45] * len(grids),
        residual=True,
        description="Classical Lax shocks, no singular shock"
    )


def preset_korchinski_delta(u_l=1.0, v_l=1.0, u_r=-1.0, v_r=1.0):
    """
    Delta shock in v. r = 0.45 keeps r*max|u0| <= 1/2 for the default data.
    """
    grids = [0.004, 0.002, 0.001]
    return ExperimentPreset(
        name='korchinski-delta',
        system='korchinski',
        riemann=RiemannData(u_l, v_l, u_r, v_r),
        domain=(-1.0, 1.0),
        T=0.5,
        alpha=0.0, beta=0.0, gamma=0.0,
        grids=grids,
        r_values=[0.45] * len(grids),
        shock_speed=oracle_burgers_shock(u_l, u_r),
        mass_window=(-0.1, 0.1),
        description="Delta shock: v mass concentrates on the stationary u shock"
    )


def preset_korchinski_shock():
    grids = [0.01, 0.005]
    return ExperimentPreset(
        name='korchinski-shock',
        system='korchinski',
        riemann=RiemannData(1.0, 0.0, 0.0, 0.0),
        domain=(-1.0, 1.0),
        T=0.5,
        alpha=0.0, beta=0.0, gamma=0.0,
        grids=grids,
        r_values=[0.45] * len(grids),
        shock_speed=oracle_burgers_shock(1.0, 0.0),
        description="Classical Burgers shock moving at speed 1"
    )


def preset_korchinski_rarefaction():
    grids = [0.02, 0.01, 0.005, 0.0025]
    return ExperimentPreset(
        name='korchinski-rarefaction',
        system='korchinski',
        riemann=RiemannData(-1.0, 1.0, 1.0, 1.0),
        domain=(-2.0, 2.0),
        T=0.5,
        alpha=0.0, beta=0.0, gamma=0.0,
        grids=grids,
        r_values=[0.45] * len(grids),
        residual=True,
        description="Rarefaction fan in u, smooth v"
    )


PRESETS = {
    'kk-singular': preset_kk_singular,
    'kk-singular-small': lambda: preset_kk_singular(small=True),
    'kk-overcompressive': preset_kk_overcompressive,
    'kk-classic': preset_kk_classic,
    'korchinski-delta': preset_korchinski_delta,
    'korchinski-shock': preset_korchinski_shock,
    'korchinski-rarefaction': preset_korchinski_rarefaction
}


def get_preset(name):
    factory = PRESETS.get(name)
    if factory is None:
        raise ConfigurationError(
            f"Unknown preset '{name}'. Options: {', '.join(sorted(PRESETS))} or a .json file",
            field='preset'
        )
    return factory()


# Oracles

def oracle_burgers_shock(u_l, u_r):
    """
    Rankine-Hugoniot speed of u_t + (u^2)_x = 0: (u_l^2 - u_r^2) / (u_l - u_r) = u_l + u_r.
    """
    return float(u_l) + float(u_r)


def oracle_delta_mass_rate(u_l, v_l, u_r, v_r):
    """
    Growth rate of the delta mass on the u shock: s [v] - [u v] with s = u_l + u_r.
    """
    s = oracle_burgers_shock(u_l, u_r)
    return s * (v_r - v_l) - (u_r * v_r - u_l * v_l)


def measure_shock_position(state, level=None):
    """
    x where u crosses level, interpolated linearly between cell centers.

    level defaults to the mean of the two end values. With several
    crossings the steepest one wins.
    """
    u = state.u
    if level is None:
        level = 0.5 * (u[0] + u[-1])
    centers = state.grid.centers()
    shifted = u - level
    crossing = np.flatnonzero((shifted[:-1] * shifted[1:] <= 0.0) & (u[:-1] != u[1:]))
    if crossing.size == 0:
        raise ConfigurationError(f"u never crosses the level {level:g}")
    jumps = np.abs(u[crossing + 1] - u[crossing])
    i = int(crossing[np.argmax(jumps)])
    fraction = (level - u[i]) / (u[i + 1] - u[i])
    return float(centers[i] + fraction * state.grid.h)


def window_mass(state, window, component='v'):
    """
    Integral of the step function over [a, b], cells cut by the window weighted by overlap.
    """
    a, b = window
    edges = state.grid.edges()
    overlap = np.maximum(0.0, np.minimum(edges[1:], b) - np.maximum(edges[:-1], a))
    values = state.v if component == 'v' else state.u
    return float(np.sum(values * overlap))


def measure_mass_growth(times, masses, t_window=(0.1, 0.5)):
    """
    Least-squares slope of mass against time over t_window.
    """
    times = np.asarray(times, dtype=np.float64)
    masses = np.asarray(masses, dtype=np.float64)
    keep = (times >= t_window[0]) & (times <= t_window[1])
    if keep.sum() < 2:
        raise InsufficientData(f"Fewer than two samples inside t in {t_window}")
    slope, _ = np.polyfit(times[keep], masses[keep], 1)
    return float(slope)


# Observers

class MaxPrincipleChecker(Observer):
    """
    Checks min <= u_i^{n+1} <= max over the neighbours of cell i at time n.

    The stencil has radius 1 without averaging and radius 2 with alpha > 0,
    since the averaging mixes three transported values.
    """

    def __init__(self, slack=config.PROPERTY_SLACK):
        self.slack = slack
        self.radius = 1
        self.boundary = None
        self.previous = None
        self.violations = 0
        self.worst_excess = 0.0
        self.first_violation = None
        self.patterns = set()

    def start(self, state, system, params, r):
        self.radius = 1 if params.alpha == 0.0 else 2
        self.boundary = ConstantExtension.from_state(state)
        self.previous = state
        self.violations = 0
        self.worst_excess = 0.0
        self.first_violation = None
        self.patterns = set()

    def observe(self, state, r):
        k = self.radius
        padded, _ = self.boundary.pad(self.previous.u, self.previous.v, ghosts=k)
        windows = np.lib.stride_tricks.sliding_window_view(padded, 2 * k + 1)
        lower = windows.min(axis=1)
        upper = windows.max(axis=1)

        left, centre, right = windows[:, k - 1], windows[:, k], windows[:, k + 1]
        codes = 4 * (left < 0) + 2 * (centre < 0) + (right < 0)
        self.patterns.update(int(code) for code in np.unique(codes))

        tolerance = self.slack * max(1.0, float(np.max(np.abs(padded))))
        excess = np.maximum(lower - state.u, state.u - upper)
        worst = int(np.argmax(excess))
        if excess[worst] > tolerance:
            self.violations += int(np.sum(excess > tolerance))
            if self.first_violation is None:
                self.first_violation = (state.n, worst)
        self.worst_excess = max(self.worst_excess, float(excess[worst]))
        self.previous = state

    @property
    def passed(self):
        return self.violations == 0


class L1Tracker(Observer):
    def __init__(self, slack=config.PROPERTY_SLACK):
        self.slack = slack
        self.history = []
        self.violations = 0

    @staticmethod
    def _norms(state):
        h = state.grid.h
        return float(np.sum(np.abs(state.u))) * h, float(np.sum(np.abs(state.v))) * h

    def start(self, state, system, params, r):
        self.history = [self._norms(state)]
        self.violations = 0

    def observe(self, state, r):
        norms = self._norms(state)
        previous = self.history[-1]
        if norms[0] > previous[0] + self.slack or norms[1] > previous[1] + self.slack:
            self.violations += 1
        self.history.append(norms)

    @property
    def passed(self):
        return self.violations == 0


class MassTracker(Observer):
    """
    Total masses of u and v plus the v mass inside an optional window, per time level.
    """

    def __init__(self, window=None):
        self.window = window
        self.times = []
        self.totals = []
        self.window_masses = []

    def _record(self, state):
        h = state.grid.h
        self.times.append(state.t)
        self.totals.append((float(np.sum(state.u)) * h, float(np.sum(state.v)) * h))
        if self.window is not None:
            self.window_masses.append(window_mass(state, self.window))

    def start(self, state, system, params, r):
        self.times, self.totals, self.window_masses = [], [], []
        self._record(state)

    def observe(self, state, r):
        self._record(state)

    def growth_rate(self, t_window=(0.1, 0.5)):
        if self.window is None:
            raise ConfigurationError("MassTracker has no window")
        return measure_mass_growth(self.times, self.window_masses, t_window)


# Running presets

def preset_system(preset):
    if preset.system_table is not None:
        return system_custom(preset.system_table, name=preset.system)
    return get_builtin_system(preset.system)


def build_initial_state(preset, h):
    grid = GridSpec.from_h(preset.domain[0], preset.domain[1], h)
    return discretize_riemann(preset.riemann, grid)


def preset_params(preset, r=None, **overrides):
    values = {
        'r': r,
        'alpha': preset.alpha,
        'beta': preset.beta,
        'gamma': preset.gamma,
        'T': preset.T,
        'r_mode': preset.r_mode
    }
    values.update(overrides)
    return SchemeParams(**values)


def run_preset(preset, h, r=None, observers=(), **overrides):
    """
    One run of the preset on grid h. Returns (SimulationResult, MonitorReport).
    """
    if r is None and preset.r_mode == 'fixed' and 'r_mode' not in overrides:
        r = preset.r_for(h)
    system = preset_system(preset)
    ic = build_initial_state(preset, h)
    params = preset_params(preset, r, **overrides)
    monitor = MonitorObserver()
    result = run_simulation(ic, system, params, [monitor, *observers])
    report = monitor.report
    report.restarts = result.restarts
    report.r_mode = result.r_mode
    return result, report


def _run_row(preset, h, r):
    try:
        _, report = run_preset(preset, h, r)
        logger.info("Row h=%g r=%s done: q27=%.4f q28=%.4f q29=%.4f", h, r, report.q27, report.q28, report.q29)
        return {"success": True, "h": h, "r": r, "report": report}
    except SchemeError as e:
        logger.error("Row h=%g r=%s failed: %s", h, r, e)
        return {"success": False, "h": h, "r": r, "message": str(e), "error": type(e).__name__}


def _map_rows(function, jobs, workers):
    if workers <= 1 or len(jobs) <= 1:
        return [function(*job) for job in jobs]
    with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as executor:
        futures = [executor.submit(function, *job) for job in jobs]
        return [future.result() for future in futures]


@dataclass
class TableResult:
    preset: str
    rows: List[dict]
    reports: list
    verdict: Dict

    @property
    def failures(self):
        return [row for row in self.rows if not row["success"]]

    def table(self):
        return monitor_table(self.reports)

    def formatted(self):
        return format_monitor_table(self.reports)


def run_table(preset, workers=None, db_path=None):
    """
    Run every (h, r) row of the preset. Failed rows are recorded and skipped;
    the verdict covers the successful rows in order of decreasing h.
    """
    workers = config.get_thread_cap() if workers is None else max(1, workers)
    jobs = [(preset, h, r) for h, r in preset.rows()]
    logger.info("Table '%s': %d rows, %d workers", preset.name, len(jobs), workers)
    rows = _map_rows(_run_row, jobs, workers)

    reports = sorted((row["report"] for row in rows if row["success"]), key=lambda report: -report.h)
    try:
        verdict = assumption_verdict(reports)
    except InsufficientData as e:
        verdict = {"insufficient_data": str(e)}

    if db_path is not None:
        from database import record_run
        for row in rows:
            record_run(preset.name, preset.system, row, db_path=db_path)

    return TableResult(preset=preset.name, rows=rows, reports=reports, verdict=verdict)


def _run_residual_row(preset, h, r, test_functions):
    accumulator = ResidualAccumulator(test_functions)
    result, report = run_preset(preset, h, r, observers=[accumulator])
    return accumulator, report


@dataclass
class ResidualStudy:
    preset: str
    report: ResidualReport
    orders: Optional[Dict]
    monitor_reports: list
    message: str = ""


def run_residual_study(preset, grids=None, test_functions=None, workers=None, db_path=None):
    """
    Weak residuals of every default (or given) test function on each grid,
    then the fitted decay order per test function.
    """
    grids = sorted(grids or preset.study_grids(), reverse=True)
    if not grids:
        raise ConfigurationError(f"Preset '{preset.name}' has no grids for a residual study", field='grids')
    if test_functions is None:
        grid = GridSpec.from_h(preset.domain[0], preset.domain[1], grids[0])
        test_functions = default_test_functions(grid, preset.T, preset.riemann.jump_x, preset.shock_speed)

    workers = config.get_thread_cap() if workers is None else max(1, workers)
    jobs = [(preset, h, preset.r_for(h) if preset.r_mode == 'fixed' else None, test_functions) for h in grids]
    outcomes = _map_rows(_run_residual_row, jobs, workers)

    report = ResidualReport()
    monitor_reports = []
    for h, (accumulator, monitor_report) in zip(grids, outcomes):
        report.add_run(h, accumulator)
        monitor_reports.append(monitor_report)

    orders, message = None, ""
    try:
        orders = order_estimate(report)
    except InsufficientData as e:
        message = str(e)
        logger.warning("Residual study '%s': %s", preset.name, e)

    if db_path is not None:
        from database import record_residuals
        record_residuals(preset.name, report, db_path=db_path)

    return ResidualStudy(preset=preset.name, report=report, orders=orders,
                         monitor_reports=monitor_reports, message=message)


# Property suites

def _suite_overlap(rng, samples=10000):
    a = rng.uniform(-1.0, 1.0, samples)
    parts = np.stack([overlap_length(-1.0 + a, a), overlap_length(a, 1.0 + a), overlap_length(1.0 + a, 2.0 + a)])
    partition_error = float(np.max(np.abs(parts.sum(axis=0) - 1.0)))
    in_range = bool(np.all((parts >= 0.0) & (parts <= 1.0)))
    passed = partition_error <= 1e-15 and in_range
    return {"passed": passed, "message": f"max partition error {partition_error:.3g}, range ok={in_range}"}


def _random_compact_field(rng, n_cells, support):
    values = np.zeros(n_cells)
    start = (n_cells - support) // 2
    values[start:start + support] = rng.uniform(-1.0, 1.0, support)
    return values


def _suite_korchinski_runs(rng, fields=200, steps=500, n_cells=48):
    system = system_korchinski()
    grid = GridSpec.from_n_cells(-1.0, 1.0, n_cells)
    patterns = set()
    max_violations = 0
    l1_violations = 0
    for _ in range(fields):
        u0 = _random_compact_field(rng, n_cells, n_cells // 2)
        v0 = _random_compact_field(rng, n_cells, n_cells // 2)
        max_u = float(np.max(np.abs(u0))) or 1.0
        r = 0.5 / max_u
        params = SchemeParams(r=r, alpha=0.0, T=steps * r * grid.h)
        checker = MaxPrincipleChecker()
        tracker = L1Tracker()
        run_simulation(StateField(grid, u0, v0), system, params, [checker, tracker])
        patterns |= checker.patterns
        max_violations += checker.violations
        l1_violations += tracker.violations

    max_principle = {
        "passed": max_violations == 0 and len(patterns) == 8,
        "message": f"{max_violations} bound violations, {len(patterns)}/8 sign patterns seen"
    }
    l1 = {"passed": l1_violations == 0, "message": f"{l1_violations} steps with L1 growth"}
    return max_principle, l1


def _suite_mass(rng, n_cells=96, steps=8):
    """
    Per-stage conservation on compactly supported data, both built-in systems.
    """
    grid = GridSpec.from_n_cells(-1.0, 1.0, n_cells)
    worst = 0.0
    failures = []
    for system in (system_keyfitz_kranzer(), system_korchinski()):
        u0 = 0.5 * _random_compact_field(rng, n_cells, n_cells // 4)
        v0 = 0.5 * _random_compact_field(rng, n_cells, n_cells // 4)
        state = StateField(grid, u0, v0)
        scale = max(float(np.sum(np.abs(u0))), float(np.sum(np.abs(v0))), 1.0)
        boundary = ConstantExtension(0.0, 0.0, 0.0, 0.0)
        params = SchemeParams(r=0.4, alpha=0.2, T=1.0)
        for _ in range(steps):
            phi = compute_velocity(state, system)
            u_bar, v_bar = transport_step(state, phi, params.r, boundary)
            u_tld, v_tld = averaging_step(u_bar, v_bar, params.alpha)
            stepped = centered_step(state, u_tld, v_tld, system, params.r, boundary)
            full = full_step(state, system, params, boundary=boundary)
            stages = {
                'transport': (u_bar, v_bar, state.u, state.v),
                'averaging': (u_tld, v_tld, u_bar, v_bar),
                'centered': (stepped.u, stepped.v, u_tld, v_tld),
                'full': (full.u, full.v, state.u, state.v)
            }
            for stage, (u_new, v_new, u_old, v_old) in stages.items():
                drift = max(abs(float(np.sum(u_new)) - float(np.sum(u_old))),
                            abs(float(np.sum(v_new)) - float(np.sum(v_old)))) / scale
                worst = max(worst, drift)
                if drift > config.PROPERTY_SLACK:
                    failures.append(f"{system.name}/{stage}")
            state = full
    return {"passed": not failures, "message": f"worst relative drift {worst:.3g}"
                                               + (f"; failing stages: {sorted(set(failures))}" if failures else "")}


def _suite_recombination(rng, samples=config.RECOMBINATION_SAMPLES):
    box = config.RECOMBINATION_BOX
    u = rng.uniform(-box, box, samples)
    v = rng.uniform(-box, box, samples)
    errors = {system.name: recombination_error(system, u, v)
              for system in (system_keyfitz_kranzer(), system_korchinski())}
    worst = max(errors.values())
    return {"passed": worst <= 1e-12, "message": ", ".join(f"{k}: {e:.3g}" for k, e in errors.items())}


def run_property_suites(seed=config.DEFAULT_SEED, fields=200, steps=500):
    """
    Randomized checks of the scheme's structural properties.
    Returns {suite_name: {"passed": bool, "message": str}}.
    """
    rng = np.random.default_rng(seed)
    results = {"overlap_partition": _suite_overlap(rng)}
    max_principle, l1 = _suite_korchinski_runs(rng, fields=fields, steps=steps)
    results["max_principle"] = max_principle
    results["l1_stability"] = l1
    results["mass_conservation"] = _suite_mass(rng)
    results["recombination"] = _suite_recombination(rng)
    for name, outcome in results.items():
        log = logger.info if outcome["passed"] else logger.error
        log("Suite %s: %s (%s)", name, "passed" if outcome["passed"] else "FAILED", outcome["message"])
    return results
