"""
Weak-form residuals of the numerical solution against smooth bump test functions.

For a step function (u_h, v_h) constant on I_i x ]t_n, t_{n+1}[:

    I_u = sum_{i,n} u_i^n Psi_t(i,n) + (u_i^n phi_i^n - A_i^n) Psi_x(i,n)
    I_v = sum_{i,n} v_i^n Psi_t(i,n) + (v_i^n phi_i^n - B_i^n) Psi_x(i,n)

where Psi_t, Psi_x are the integrals of psi_t, psi_x over the space-time cell.
The bump is a product g(X) g(S), so each cell integral factorizes into a
spatial and a temporal Gauss-Legendre sum.
"""
import logging
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Tuple

import numpy as np
import pandas as pd

import config
from errors import ConfigurationError, InsufficientData, OrderIndeterminate
from monitors import loglog_slope
from scheme import Observer

logger = logging.getLogger(__name__)


def _inside(s):
    s = np.asarray(s, dtype=np.float64)
    inside = np.abs(s) < 1.0
    # Points outside the support are replaced by 0 so the exponent stays finite
    return inside, np.where(inside, s, 0.0)


def _scalar_or_array(values):
    return values if values.ndim else float(values)


def bump(s):
    """
    g(s) = exp(-1 / (1 - s^2)) on |s| < 1, zero elsewhere.
    """
    inside, safe = _inside(s)
    return _scalar_or_array(np.where(inside, np.exp(-1.0 / (1.0 - safe ** 2)), 0.0))


def bump_derivative(s):
    """
    g'(s) = -2 s g(s) / (1 - s^2)^2.
    """
    inside, safe = _inside(s)
    one_minus = 1.0 - safe ** 2
    return _scalar_or_array(np.where(inside, -2.0 * safe * np.exp(-1.0 / one_minus) / one_minus ** 2, 0.0))


@dataclass(frozen=True)
class TestFunction:
    psi_id: str
    x_center: float
    x_width: float
    t_center: float
    t_width: float
    scale: float = 1.0

    __test__ = False

    def __post_init__(self):
        if not self.x_width > 0 or not self.t_width > 0:
            raise ConfigurationError(
                f"Test function '{self.psi_id}' needs positive widths, got {self.x_width}, {self.t_width}"
            )

    def psi(self, x, t):
        return self.scale * bump((x - self.x_center) / self.x_width) * bump((t - self.t_center) / self.t_width)

    def psi_t(self, x, t):
        return (self.scale * bump((x - self.x_center) / self.x_width)
                * bump_derivative((t - self.t_center) / self.t_width) / self.t_width)

    def psi_x(self, x, t):
        return (self.scale * bump_derivative((x - self.x_center) / self.x_width) / self.x_width
                * bump((t - self.t_center) / self.t_width))

    def scaled(self, factor):
        return TestFunction(self.psi_id, self.x_center, self.x_width, self.t_center, self.t_width,
                            self.scale * factor)

    def shifted(self, dx=0.0, dt=0.0):
        return TestFunction(self.psi_id, self.x_center + dx, self.x_width, self.t_center + dt,
                            self.t_width, self.scale)

    def check_support(self, grid, T):
        """
        Support must sit inside the spatial domain and inside ]0, T[.
        """
        if self.x_center - self.x_width < grid.x_min or self.x_center + self.x_width > grid.x_max:
            raise ConfigurationError(
                f"Test function '{self.psi_id}' support "
                f"[{self.x_center - self.x_width:g}, {self.x_center + self.x_width:g}] "
                f"leaves the domain [{grid.x_min:g}, {grid.x_max:g}]"
            )
        if not (self.t_center - self.t_width > 0.0 and self.t_center + self.t_width < T):
            raise ConfigurationError(
                f"Test function '{self.psi_id}' time support "
                f"]{self.t_center - self.t_width:g}, {self.t_center + self.t_width:g}[ is not inside ]0, {T:g}["
            )

    def to_dict(self):
        return asdict(self)


def gauss_interval_sums(lower, upper, center, width, n_points):
    """
    Integrals of g((y - center)/width) and of its y-derivative over each
    interval [lower, upper]: Gauss-Legendre for the first, the exact
    difference g(upper) - g(lower) for the second, so derivative sums
    telescope across adjacent intervals.
    """
    nodes, weights = np.polynomial.legendre.leggauss(n_points)
    lower = np.atleast_1d(np.asarray(lower, dtype=np.float64))
    upper = np.atleast_1d(np.asarray(upper, dtype=np.float64))
    half = 0.5 * (upper - lower)
    mid = 0.5 * (upper + lower)
    points = mid[:, None] + half[:, None] * nodes[None, :]
    values = np.sum(weights[None, :] * bump((points - center) / width), axis=1) * half
    derivatives = bump((upper - center) / width) - bump((lower - center) / width)
    return values, derivatives


class _PsiState:
    """
    Per-test-function precomputed spatial sums restricted to the support cells.
    """

    def __init__(self, psi, grid, n_points):
        self.psi = psi
        edges = grid.edges()
        lo = int(np.searchsorted(edges, psi.x_center - psi.x_width, side='right')) - 1
        hi = int(np.searchsorted(edges, psi.x_center + psi.x_width, side='left'))
        self.lo = max(lo, 0)
        self.hi = min(hi, grid.n_cells)
        g_x, g_prime_x = gauss_interval_sums(
            edges[self.lo:self.hi], edges[self.lo + 1:self.hi + 1], psi.x_center, psi.x_width, n_points
        )
        self.g_x = psi.scale * g_x
        self.g_prime_x = psi.scale * g_prime_x
        self.I_u = 0.0
        self.I_v = 0.0


class ResidualAccumulator(Observer):
    """
    Accumulates I_u, I_v streamingly: each new level closes the slab of the previous one.
    """

    def __init__(self, test_functions, n_points=config.GAUSS_POINTS, check_support=True):
        if not test_functions:
            raise ConfigurationError("Residual accumulator needs at least one test function")
        self.test_functions = list(test_functions)
        self.n_points = n_points
        self.check_support = check_support
        self.system = None
        self._previous = None
        self._states = []

    def start(self, state, system, params, r):
        if self.check_support:
            for psi in self.test_functions:
                psi.check_support(state.grid, params.T)
        self.system = system
        self._previous = state
        self._states = [_PsiState(psi, state.grid, self.n_points) for psi in self.test_functions]

    def observe(self, state, r):
        previous = self._previous
        t0, t1 = previous.t, state.t
        for entry in self._states:
            psi = entry.psi
            if t1 <= psi.t_center - psi.t_width or t0 >= psi.t_center + psi.t_width:
                continue
            if entry.hi <= entry.lo:
                continue
            g_t, g_prime_t = gauss_interval_sums(t0, t1, psi.t_center, psi.t_width, self.n_points)
            g_t, g_prime_t = float(g_t[0]), float(g_prime_t[0])

            u = previous.u[entry.lo:entry.hi]
            v = previous.v[entry.lo:entry.hi]
            phi = np.broadcast_to(np.asarray(self.system.phi(u, v), dtype=np.float64), u.shape)
            a_values = np.broadcast_to(np.asarray(self.system.a_flux(u, v), dtype=np.float64), u.shape)
            b_values = np.broadcast_to(np.asarray(self.system.b_flux(u, v), dtype=np.float64), u.shape)

            # Psi_t(i,n) = g_x[i] g'_t,  Psi_x(i,n) = g'_x[i] g_t
            entry.I_u += (g_prime_t * float(np.sum(u * entry.g_x))
                          + g_t * float(np.sum((u * phi - a_values) * entry.g_prime_x)))
            entry.I_v += (g_prime_t * float(np.sum(v * entry.g_x))
                          + g_t * float(np.sum((v * phi - b_values) * entry.g_prime_x)))
        self._previous = state

    def results(self):
        """
        {psi_id: (I_u, I_v)}.
        """
        return {entry.psi.psi_id: (entry.I_u, entry.I_v) for entry in self._states}


def residual_integrals(trajectory, system, psi, n_points=config.GAUSS_POINTS):
    """
    (I_u, I_v) of a stored trajectory, final time taken from its last level.
    """
    if len(trajectory) < 2:
        raise ConfigurationError("Trajectory needs at least two time levels")
    first = trajectory[0]
    T = trajectory[-1].t
    psi.check_support(first.grid, T)

    accumulator = ResidualAccumulator([psi], n_points=n_points, check_support=False)
    accumulator.system = system
    accumulator._previous = first
    accumulator._states = [_PsiState(psi, first.grid, n_points)]
    for state in trajectory[1:]:
        accumulator.observe(state, None)
    return accumulator.results()[psi.psi_id]


def default_test_functions(grid, T, jump_x=0.0, shock_speed=0.0):
    """
    Three bumps: on the shock path, straddling it, and in the left far field.
    Widths follow the domain length and T so every support fits. The shock
    bump is shifted right by SHOCK_PSI_OFFSET widths; centered on the jump it
    sees nothing of data that is odd about the jump.
    """
    span = grid.x_max - grid.x_min
    t_center = 0.5 * T
    t_width = 0.4 * T
    path_x = jump_x + shock_speed * t_center

    width = min(0.15 * span,
                0.95 * (path_x - grid.x_min),
                0.95 * (grid.x_max - path_x) / 1.5)
    if not width > 0:
        raise ConfigurationError(f"Shock path x={path_x:g} at t={t_center:g} leaves the domain")

    far_width = 0.1 * span
    return [
        TestFunction('shock', path_x + config.SHOCK_PSI_OFFSET * width, width, t_center, t_width),
        TestFunction('straddle', path_x + 0.5 * width, width, t_center, t_width),
        TestFunction('far', grid.x_min + 0.12 * span, far_width, t_center, t_width)
    ]


@dataclass
class ResidualReport:
    entries: Dict[Tuple[float, str], Tuple[float, float]] = field(default_factory=dict)
    test_functions: Dict[float, List[dict]] = field(default_factory=dict)

    def add(self, h, psi_id, I_u, I_v):
        self.entries[(float(h), psi_id)] = (float(I_u), float(I_v))

    def add_run(self, h, accumulator):
        for psi_id, (I_u, I_v) in accumulator.results().items():
            self.add(h, psi_id, I_u, I_v)
        self.test_functions[float(h)] = [psi.to_dict() for psi in accumulator.test_functions]

    def grids(self):
        return sorted({h for h, _ in self.entries}, reverse=True)

    def psi_ids(self):
        ids = []
        for _, psi_id in self.entries:
            if psi_id not in ids:
                ids.append(psi_id)
        return ids

    def to_frame(self):
        rows = [{'h': h, 'psi_id': psi_id, 'I_u': values[0], 'I_v': values[1]}
                for (h, psi_id), values in sorted(self.entries.items(), key=lambda item: (-item[0][0], item[0][1]))]
        return pd.DataFrame(rows, columns=config.RESIDUAL_COLUMNS)


def fit_order(h_values, residuals, noise_floor=config.NOISE_FLOOR):
    """
    Slope of log|I| against log h over the values above the noise floor.
    """
    h_values = np.asarray(h_values, dtype=np.float64)
    magnitudes = np.abs(np.asarray(residuals, dtype=np.float64))
    keep = magnitudes >= noise_floor
    if not keep.any():
        raise OrderIndeterminate("All residuals are below the noise floor")
    if keep.sum() < config.MIN_GRIDS_FOR_ORDER:
        raise OrderIndeterminate(
            f"Only {int(keep.sum())} residuals above the noise floor; need {config.MIN_GRIDS_FOR_ORDER}"
        )
    return loglog_slope(h_values[keep], magnitudes[keep])


def order_estimate(report, noise_floor=config.NOISE_FLOOR):
    """
    Per test function: {'p_u', 'p_v', 'grids_used', 'indeterminate'}.

    Indeterminate components get p = nan and are listed rather than raised.
    """
    grids = report.grids()
    if len(grids) < config.MIN_GRIDS_FOR_ORDER:
        raise InsufficientData(f"Order estimation needs {config.MIN_GRIDS_FOR_ORDER} grids, got {len(grids)}")

    orders = {}
    for psi_id in report.psi_ids():
        h_values = [h for h in grids if (h, psi_id) in report.entries]
        result = {'grids_used': len(h_values), 'indeterminate': []}
        for index, key in ((0, 'p_u'), (1, 'p_v')):
            values = [report.entries[(h, psi_id)][index] for h in h_values]
            try:
                result[key] = fit_order(h_values, values, noise_floor)
            except OrderIndeterminate as e:
                logger.info("Order for %s/%s indeterminate: %s", psi_id, key, e)
                result[key] = float('nan')
                result['indeterminate'].append(key)
        orders[psi_id] = result
    return orders


def order_table(orders):
    rows = [{'psi_id': psi_id, 'p_u': values['p_u'], 'p_v': values['p_v'], 'grids_used': values['grids_used']}
            for psi_id, values in orders.items()]
    return pd.DataFrame(rows, columns=config.ORDER_COLUMNS)
