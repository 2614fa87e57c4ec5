"""
Streaming monitors for the consistency assumptions: CFL margin, h^beta max|phi|,
L1 norms of u and v, and h^(1+gamma)-weighted L1 norms of A and B.
"""
import logging
from dataclasses import asdict, dataclass

import numpy as np
import pandas as pd

import config
from errors import InsufficientData
from scheme import Observer

logger = logging.getLogger(__name__)


@dataclass
class MonitorReport:
    h: float
    r: float
    beta: float = 0.0
    gamma: float = 0.0
    h_over_r: float = 0.0
    cfl_max: float = 0.0
    q27: float = 0.0
    q28: float = 0.0
    q29: float = 0.0
    peak_v: float = 0.0
    steps: int = 0
    max_phi: float = 0.0
    last_max_phi: float = 0.0
    r_mode: str = 'fixed'
    restarts: int = 0

    def __post_init__(self):
        if not self.h_over_r and self.r:
            self.h_over_r = self.h / self.r

    def as_row(self):
        return {key: getattr(self, key) for key in config.MONITOR_COLUMNS}

    def to_dict(self):
        return asdict(self)


def new_report(grid, params, r):
    return MonitorReport(h=grid.h, r=r, beta=params.beta, gamma=params.gamma, r_mode=params.r_mode)


def monitor_observe(state, system, params, report, r=None):
    """
    Fold one time level into the report.

    r is the ratio of the step that produced this state; together with the
    previous level's max|phi| it gives that step's CFL number.
    """
    h = state.grid.h
    u, v = state.u, state.v

    if r is not None and state.n > 0:
        report.cfl_max = max(report.cfl_max, r * report.last_max_phi)

    phi = np.asarray(system.phi(u, v), dtype=np.float64)
    max_phi = float(np.max(np.abs(phi)))
    report.last_max_phi = max_phi
    report.max_phi = max(report.max_phi, max_phi)
    report.q27 = h ** params.beta * report.max_phi

    l1 = max(float(np.sum(np.abs(u))) * h, float(np.sum(np.abs(v))) * h)
    report.q28 = max(report.q28, l1)

    weight = h ** (1.0 + params.gamma)
    a_values = np.broadcast_to(np.asarray(system.a_flux(u, v), dtype=np.float64), u.shape)
    b_values = np.broadcast_to(np.asarray(system.b_flux(u, v), dtype=np.float64), u.shape)
    flux_sum = max(float(np.sum(np.abs(a_values))) * weight, float(np.sum(np.abs(b_values))) * weight)
    report.q29 = max(report.q29, flux_sum)

    report.peak_v = max(report.peak_v, float(np.max(np.abs(v))))
    report.steps = state.n
    return report


class MonitorObserver(Observer):
    """
    Keeps one MonitorReport for a run; a restart starts a fresh report.
    """

    def __init__(self):
        self.report = None
        self.system = None
        self.params = None
        self._r_used = []

    def start(self, state, system, params, r):
        self.system = system
        self.params = params
        self.report = new_report(state.grid, params, r)
        self._r_used = []
        monitor_observe(state, system, params, self.report)

    def observe(self, state, r):
        self._r_used.append(r)
        monitor_observe(state, self.system, self.params, self.report, r=r)

    def finish(self, state):
        # Adaptive runs report their smallest r, the worst case for h/r
        if self._r_used:
            self.report.r = min(self._r_used)
        self.report.h_over_r = self.report.h / self.report.r


def loglog_slope(x, y):
    """
    Least-squares slope of log(y) against log(x); nan when x has no spread.
    """
    log_x = np.log(np.asarray(x, dtype=np.float64))
    log_y = np.log(np.asarray(y, dtype=np.float64))
    if len(log_x) < 2 or np.ptp(log_x) == 0.0:
        return float('nan')
    slope, _ = np.polyfit(log_x, log_y, 1)
    return float(slope)


def _possibly_unbounded(values):
    """
    Last value above the median of the earlier ones by more than UNBOUNDED_MARGIN.
    """
    earlier = np.asarray(values[:-1], dtype=np.float64)
    median = float(np.median(earlier))
    return bool(values[-1] > median * (1.0 + config.UNBOUNDED_MARGIN))


def assumption_verdict(reports):
    """
    Empirical check over a refinement sequence ordered by decreasing h:
    h/r should decrease, q27, q28, q29 should stay bounded.
    """
    if len(reports) < config.MIN_REPORTS_FOR_VERDICT:
        raise InsufficientData(
            f"Assumption verdict needs at least {config.MIN_REPORTS_FOR_VERDICT} reports, got {len(reports)}"
        )

    h = [report.h for report in reports]
    h_over_r = [report.h_over_r for report in reports]
    decreasing = bool(np.all(np.diff(h_over_r) < 0))

    verdict = {
        'h_over_r_decreasing': decreasing,
        'h_over_r_slope': loglog_slope(h, h_over_r),
        'possibly_unbounded': {}
    }
    for key in ('q27', 'q28', 'q29'):
        values = [getattr(report, key) for report in reports]
        verdict[f'max_{key}'] = float(max(values))
        verdict['possibly_unbounded'][key] = _possibly_unbounded(values)

    verdict['bounded'] = not any(verdict['possibly_unbounded'].values())
    return verdict


def monitor_table(reports):
    """
    Monitor reports as a DataFrame, one row per run.
    """
    rows = [report.as_row() for report in reports]
    return pd.DataFrame(rows, columns=config.MONITOR_COLUMNS)


def format_monitor_table(reports):
    """
    Plain-text table, fixed decimals per column.
    """
    table = monitor_table(reports)
    if table.empty:
        return "(no rows)"
    formatted = table.copy()
    for column, decimals in config.TABLE_DECIMALS.items():
        formatted[column] = formatted[column].map(lambda value, d=decimals: f"{value:.{d}f}")
    return formatted.to_string(index=False)
