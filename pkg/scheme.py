"""
Three-stage splitting step on a uniform 1-D grid and the simulation driver.

Each step transports u, v with the numerical velocity phi(u, v), averages the
transported fields with weights (alpha, 1 - 2 alpha, alpha), then adds the
centered differences of A and B evaluated on the time-n values.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

import config
from errors import Blowup, CflExhausted, CflViolation, ConfigurationError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class GridSpec:
    x_min: float
    x_max: float
    h: float
    n_cells: int

    def __post_init__(self):
        if not (self.h > 0) or not math.isfinite(self.h):
            raise ConfigurationError(f"Cell width h must be positive, got {self.h}", field='h')
        if not self.x_max > self.x_min:
            raise ConfigurationError(f"Empty domain [{self.x_min}, {self.x_max}]", field='domain')
        if self.n_cells < 1:
            raise ConfigurationError(f"Grid needs at least one cell, got {self.n_cells}", field='n_cells')
        span = self.x_max - self.x_min
        if abs(self.n_cells * self.h - span) > config.GRID_SPAN_RTOL * span:
            raise ConfigurationError(
                f"h={self.h!r} does not divide [{self.x_min}, {self.x_max}] into a whole number of cells",
                field='h'
            )

    @classmethod
    def from_h(cls, x_min, x_max, h):
        if not (h > 0):
            raise ConfigurationError(f"Cell width h must be positive, got {h}", field='h')
        return cls(float(x_min), float(x_max), float(h), int(round((x_max - x_min) / h)))

    @classmethod
    def from_n_cells(cls, x_min, x_max, n_cells):
        if n_cells < 1:
            raise ConfigurationError(f"Grid needs at least one cell, got {n_cells}", field='n_cells')
        return cls(float(x_min), float(x_max), (x_max - x_min) / n_cells, int(n_cells))

    def edges(self):
        return self.x_min + self.h * np.arange(self.n_cells + 1)

    def centers(self):
        return self.x_min + self.h * (np.arange(self.n_cells) + 0.5)


@dataclass(frozen=True, eq=False)
class StateField:
    grid: GridSpec
    u: np.ndarray
    v: np.ndarray
    t: float = 0.0
    n: int = 0

    def __post_init__(self):
        u = np.array(self.u, dtype=np.float64)
        v = np.array(self.v, dtype=np.float64)
        if u.shape != (self.grid.n_cells,) or v.shape != (self.grid.n_cells,):
            raise ConfigurationError(
                f"State arrays must have length {self.grid.n_cells}, got {u.shape} and {v.shape}"
            )
        u.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, 'u', u)
        object.__setattr__(self, 'v', v)

    def max_abs(self):
        return float(np.max(np.abs(self.u))), float(np.max(np.abs(self.v)))


@dataclass
class SchemeParams:
    r: Optional[float] = None
    alpha: float = config.DEFAULT_PARAMS['alpha']
    beta: float = config.DEFAULT_PARAMS['beta']
    gamma: float = config.DEFAULT_PARAMS['gamma']
    T: float = config.DEFAULT_PARAMS['T']
    cfl_target: float = config.DEFAULT_PARAMS['cfl_target']
    boundary: str = config.DEFAULT_PARAMS['boundary']
    blowup_cap: float = config.DEFAULT_PARAMS['blowup_cap']
    r_mode: str = 'fixed'
    r_max: float = config.DEFAULT_PARAMS['r_max']
    max_restarts: int = config.MAX_RESTARTS

    def __post_init__(self):
        if self.r_mode not in config.R_MODES:
            raise ConfigurationError(f"r_mode must be one of {config.R_MODES}, got {self.r_mode!r}", field='r_mode')
        if self.r_mode == 'fixed' and (self.r is None or not self.r > 0):
            raise ConfigurationError(f"Fixed r mode needs r > 0, got {self.r}", field='r')
        if self.r is not None and not self.r > 0:
            raise ConfigurationError(f"r must be positive, got {self.r}", field='r')
        if not 0.0 <= self.alpha < 0.5:
            raise ConfigurationError(f"alpha must lie in [0, 0.5), got {self.alpha}", field='alpha')
        if not 0.0 <= self.beta < 1.0:
            raise ConfigurationError(f"beta must lie in [0, 1), got {self.beta}", field='beta')
        if not 0.0 <= self.gamma < 1.0:
            raise ConfigurationError(f"gamma must lie in [0, 1), got {self.gamma}", field='gamma')
        # T = 0 is accepted: the run returns the initial state
        if not self.T >= 0 or not math.isfinite(self.T):
            raise ConfigurationError(f"T must be >= 0, got {self.T}", field='T')
        if not 0.0 < self.cfl_target <= 1.0:
            raise ConfigurationError(f"cfl_target must lie in (0, 1], got {self.cfl_target}", field='cfl_target')
        if not self.blowup_cap > 0:
            raise ConfigurationError(f"blowup_cap must be positive, got {self.blowup_cap}", field='blowup_cap')
        if not self.r_max > 0:
            raise ConfigurationError(f"r_max must be positive, got {self.r_max}", field='r_max')
        if self.boundary not in config.BOUNDARY_POLICIES:
            raise ConfigurationError(
                f"boundary must be one of {config.BOUNDARY_POLICIES}, got {self.boundary!r}", field='boundary'
            )


@dataclass
class WorkBuffers:
    phi: Optional[np.ndarray] = None
    u_bar: Optional[np.ndarray] = None
    v_bar: Optional[np.ndarray] = None
    u_tld: Optional[np.ndarray] = None
    v_tld: Optional[np.ndarray] = None


@dataclass(frozen=True)
class ConstantExtension:
    """
    Ghost cells holding fixed far-field states on each side.
    """
    u_left: float
    v_left: float
    u_right: float
    v_right: float

    @classmethod
    def from_state(cls, state):
        return cls(float(state.u[0]), float(state.v[0]), float(state.u[-1]), float(state.v[-1]))

    def pad(self, u, v, ghosts=config.GHOST_CELLS):
        u_padded = np.concatenate((np.full(ghosts, self.u_left), u, np.full(ghosts, self.u_right)))
        v_padded = np.concatenate((np.full(ghosts, self.v_left), v, np.full(ghosts, self.v_right)))
        return u_padded, v_padded


# Initial data descriptors

@dataclass(frozen=True)
class ConstantProfile:
    value: float

    def cell_means(self, grid):
        return np.full(grid.n_cells, float(self.value))


@dataclass(frozen=True)
class RiemannProfile:
    left: float
    right: float
    jump_x: float = 0.0

    def cell_means(self, grid):
        if not grid.x_min < self.jump_x < grid.x_max:
            raise ConfigurationError(
                f"Jump at x={self.jump_x} lies outside the domain ({grid.x_min}, {grid.x_max})",
                field='jump_x'
            )
        left_edges = grid.edges()[:-1]
        fraction = np.clip((self.jump_x - left_edges) / grid.h, 0.0, 1.0)
        fraction[fraction < config.EDGE_SNAP_TOL] = 0.0
        fraction[fraction > 1.0 - config.EDGE_SNAP_TOL] = 1.0
        return fraction * self.left + (1.0 - fraction) * self.right


@dataclass(frozen=True)
class TabulatedProfile:
    """
    Piecewise-linear function through (x, values), constant beyond the table ends.
    """
    x: tuple
    values: tuple

    def __post_init__(self):
        if len(self.x) < 2 or len(self.x) != len(self.values):
            raise ConfigurationError("Tabulated profile needs matching x and values with at least 2 points")
        if np.any(np.diff(np.asarray(self.x, dtype=np.float64)) <= 0):
            raise ConfigurationError("Tabulated profile x must be strictly increasing")

    def _antiderivative(self, points):
        x = np.asarray(self.x, dtype=np.float64)
        y = np.asarray(self.values, dtype=np.float64)
        slopes = np.diff(y) / np.diff(x)
        node_integrals = np.concatenate(([0.0], np.cumsum(0.5 * (y[1:] + y[:-1]) * np.diff(x))))

        result = np.empty_like(points)
        below = points <= x[0]
        above = points >= x[-1]
        inside = ~(below | above)
        result[below] = y[0] * (points[below] - x[0])
        result[above] = node_integrals[-1] + y[-1] * (points[above] - x[-1])

        k = np.searchsorted(x, points[inside], side='right') - 1
        dx = points[inside] - x[k]
        result[inside] = node_integrals[k] + y[k] * dx + 0.5 * slopes[k] * dx ** 2
        return result

    def cell_means(self, grid):
        integrals = self._antiderivative(grid.edges())
        return np.diff(integrals) / grid.h


def _as_profile(descriptor):
    if isinstance(descriptor, (ConstantProfile, RiemannProfile, TabulatedProfile)):
        return descriptor
    if isinstance(descriptor, (int, float)):
        return ConstantProfile(float(descriptor))
    raise ConfigurationError(f"Unsupported initial data descriptor {descriptor!r}")


def discretize_initial(u0, v0, grid):
    """
    Cell means of the initial data on the grid, at t = 0, n = 0.
    """
    u = _as_profile(u0).cell_means(grid)
    v = _as_profile(v0).cell_means(grid)
    return StateField(grid, u, v, 0.0, 0)


def discretize_riemann(data, grid):
    """
    Cell means of Riemann data (u_l, v_l, u_r, v_r) jumping at data.jump_x.
    """
    return discretize_initial(
        RiemannProfile(data.u_l, data.u_r, data.jump_x),
        RiemannProfile(data.v_l, data.v_r, data.jump_x),
        grid
    )


# Scheme stages

def overlap_length(a, b):
    """
    Length of [0, 1] intersected with [a, b], for a < b.
    """
    return np.maximum(0.0, np.minimum(1.0, b) - np.maximum(0.0, a))


def _velocity(u, v, system, step, t, first_cell=0):
    phi = np.asarray(system.phi(u, v), dtype=np.float64)
    phi = np.broadcast_to(phi, np.shape(u)).copy()
    bad = ~np.isfinite(phi)
    if bad.any():
        cell = int(np.argmax(bad)) + first_cell
        raise Blowup(t, float(np.max(np.abs(u))), float(np.max(np.abs(v))),
                     step=step, cell=cell, reason="non-finite numerical velocity")
    return phi


def compute_velocity(state, system):
    """
    phi_i = phi(u_i, v_i) for every cell.
    """
    return _velocity(state.u, state.v, system, state.n, state.t)


def _check_cfl(phi, r, step, first_cell):
    courant = r * np.abs(phi)
    worst = int(np.argmax(courant))
    if courant[worst] > 1.0:
        raise CflViolation(worst + first_cell, step, float(courant[worst]))


def _transport_padded(values, phi, r):
    """
    Transport of a padded field; returns the values for indices 1..len-2.
    """
    a = r * phi
    to_right = overlap_length(-1.0 + a, a)
    stay = overlap_length(a, 1.0 + a)
    to_left = overlap_length(1.0 + a, 2.0 + a)
    return values[:-2] * to_right[:-2] + values[1:-1] * stay[1:-1] + values[2:] * to_left[2:]


def transport_step(state, phi, r, boundary=None):
    """
    Transport u and v with velocity phi during r*h.

    phi may hold n_cells values (ghost velocities copied from the edges) or
    n_cells + 2 values including one ghost on each side.
    """
    n = state.grid.n_cells
    boundary = boundary or ConstantExtension.from_state(state)
    phi = np.asarray(phi, dtype=np.float64)
    if phi.shape == (n,):
        phi = np.concatenate(([phi[0]], phi, [phi[-1]]))
    elif phi.shape != (n + 2,):
        raise ConfigurationError(f"phi must have length {n} or {n + 2}, got {phi.shape}")

    _check_cfl(phi, r, state.n, first_cell=-1)
    u_padded, v_padded = boundary.pad(state.u, state.v, ghosts=1)
    return _transport_padded(u_padded, phi, r), _transport_padded(v_padded, phi, r)


def _average_padded(values, alpha):
    if alpha == 0.0:
        return values[1:-1].copy()
    return alpha * values[:-2] + (1.0 - 2.0 * alpha) * values[1:-1] + alpha * values[2:]


def averaging_step(u_bar, v_bar, alpha):
    """
    Three-point average with weights (alpha, 1 - 2 alpha, alpha); ghost values
    copy the edge cells.
    """
    if not 0.0 <= alpha < 0.5:
        raise ConfigurationError(f"alpha must lie in [0, 0.5), got {alpha}", field='alpha')
    u_bar = np.asarray(u_bar, dtype=np.float64)
    v_bar = np.asarray(v_bar, dtype=np.float64)
    u_padded = np.concatenate(([u_bar[0]], u_bar, [u_bar[-1]]))
    v_padded = np.concatenate(([v_bar[0]], v_bar, [v_bar[-1]]))
    return _average_padded(u_padded, alpha), _average_padded(v_padded, alpha)


def _evaluate_correction(u, v, system, step, t):
    a_values = np.broadcast_to(np.asarray(system.a_flux(u, v), dtype=np.float64), np.shape(u))
    b_values = np.broadcast_to(np.asarray(system.b_flux(u, v), dtype=np.float64), np.shape(u))
    if not (np.all(np.isfinite(a_values)) and np.all(np.isfinite(b_values))):
        raise Blowup(t, float(np.max(np.abs(u))), float(np.max(np.abs(v))),
                     step=step, reason="non-finite A or B")
    return a_values, b_values


def centered_step(state_n, u_tld, v_tld, system, r, boundary=None):
    """
    u^{n+1} = u~ + r/2 [A(time-n state at i+1) - A(time-n state at i-1)], same for v with B.
    """
    boundary = boundary or ConstantExtension.from_state(state_n)
    u_padded, v_padded = boundary.pad(state_n.u, state_n.v, ghosts=1)
    a_values, b_values = _evaluate_correction(u_padded, v_padded, system, state_n.n, state_n.t)
    half_r = 0.5 * r
    u_new = np.asarray(u_tld, dtype=np.float64) + half_r * (a_values[2:] - a_values[:-2])
    v_new = np.asarray(v_tld, dtype=np.float64) + half_r * (b_values[2:] - b_values[:-2])
    return StateField(state_n.grid, u_new, v_new, state_n.t + r * state_n.grid.h, state_n.n + 1)


def _check_state(new_state, previous, cap):
    u_ok = np.isfinite(new_state.u)
    v_ok = np.isfinite(new_state.v)
    if not (u_ok.all() and v_ok.all()):
        cell = int(np.argmin(u_ok & v_ok))
        raise Blowup(new_state.t, *previous.max_abs(), step=new_state.n, cell=cell,
                     reason="non-finite state", last_state=previous)
    max_u, max_v = new_state.max_abs()
    if max_u > cap or max_v > cap:
        raise Blowup(new_state.t, max_u, max_v, step=new_state.n,
                     reason=f"exceeds blow-up cap {cap:g}", last_state=previous)


def _step(state, system, r, alpha, boundary, phi_padded=None, buffers=None):
    g = config.GHOST_CELLS
    u_padded, v_padded = boundary.pad(state.u, state.v, ghosts=g)
    if phi_padded is None:
        phi_padded = _velocity(u_padded, v_padded, system, state.n, state.t, first_cell=-g)

    # Transport yields cells -1..n_cells, the averaging consumes them
    _check_cfl(phi_padded[1:-1], r, state.n, first_cell=-(g - 1))
    u_bar = _transport_padded(u_padded, phi_padded, r)
    v_bar = _transport_padded(v_padded, phi_padded, r)
    u_tld = _average_padded(u_bar, alpha)
    v_tld = _average_padded(v_bar, alpha)

    a_values, b_values = _evaluate_correction(u_padded[1:-1], v_padded[1:-1], system, state.n, state.t)
    half_r = 0.5 * r
    u_new = u_tld + half_r * (a_values[2:] - a_values[:-2])
    v_new = v_tld + half_r * (b_values[2:] - b_values[:-2])

    if buffers is not None:
        buffers.phi = phi_padded[g:-g].copy()
        buffers.u_bar = u_bar[1:-1].copy()
        buffers.v_bar = v_bar[1:-1].copy()
        buffers.u_tld = u_tld
        buffers.v_tld = v_tld
    return StateField(state.grid, u_new, v_new, state.t + r * state.grid.h, state.n + 1)


def full_step(state, system, params, r=None, boundary=None, buffers=None):
    """
    One time step: velocity, transport, averaging, centered correction.
    """
    r = params.r if r is None else r
    if r is None:
        raise ConfigurationError("full_step needs an explicit r when params.r is unset", field='r')
    boundary = boundary or ConstantExtension.from_state(state)
    new_state = _step(state, system, r, params.alpha, boundary, buffers=buffers)
    _check_state(new_state, state, params.blowup_cap)
    return new_state


# Simulation driver

class Observer:
    """
    Step callback. start() sees the initial state, observe() every new state
    together with the r that produced it, finish() the final state.
    """

    def start(self, state, system, params, r):
        pass

    def observe(self, state, r):
        pass

    def finish(self, state):
        pass


@dataclass
class SimulationResult:
    final: StateField
    r: float
    r_mode: str
    restarts: int
    steps: int
    r_min: float
    r_max: float
    boundary_polluted: bool = False
    observers: List[Observer] = field(default_factory=list)


def step_count(T, r, h):
    """
    ceil(T / (r h)), treating values within STEP_COUNT_RTOL of an integer as that integer.
    """
    if T <= 0:
        return 0
    ratio = T / (r * h)
    nearest = round(ratio)
    if abs(ratio - nearest) <= config.STEP_COUNT_RTOL * max(1.0, ratio):
        return int(nearest)
    return int(math.ceil(ratio))


def initial_ratio(state, system, params):
    """
    r0 = cfl_target / max|phi(u0, v0)|, capped at r_max.
    """
    max_phi = float(np.max(np.abs(compute_velocity(state, system))))
    if max_phi == 0.0:
        return params.r_max
    return min(params.r_max, params.cfl_target / max_phi)


class _BoundaryWatch:
    def __init__(self, ic):
        k = min(config.BOUNDARY_WATCH_CELLS, ic.grid.n_cells)
        self.k = k
        self.left = (ic.u[:k].copy(), ic.v[:k].copy())
        self.right = (ic.u[-k:].copy(), ic.v[-k:].copy())
        self.polluted = False

    @staticmethod
    def _changed(current, reference):
        return np.any(np.abs(current - reference) > config.BOUNDARY_CHANGE_TOL * np.maximum(1.0, np.abs(reference)))

    def check(self, state):
        if self.polluted:
            return
        k = self.k
        if (self._changed(state.u[:k], self.left[0]) or self._changed(state.v[:k], self.left[1])
                or self._changed(state.u[-k:], self.right[0]) or self._changed(state.v[-k:], self.right[1])):
            self.polluted = True
            logger.warning(
                "Wave reached the boundary at t=%.6g (step %d); monitor values may be polluted",
                state.t, state.n
            )


def _advance(ic, system, params, r, boundary, observers):
    watch = _BoundaryWatch(ic)
    for observer in observers:
        observer.start(ic, system, params, r)

    state = ic
    r_min = r_max = r
    g = config.GHOST_CELLS
    if params.r_mode == 'adaptive':
        used = []
        while state.t < params.T * (1.0 - config.STEP_COUNT_RTOL):
            u_padded, v_padded = boundary.pad(state.u, state.v, ghosts=g)
            phi_padded = _velocity(u_padded, v_padded, system, state.n, state.t, first_cell=-g)
            max_phi = float(np.max(np.abs(phi_padded[1:-1])))
            r_n = params.r_max if max_phi == 0.0 else min(params.r_max, params.cfl_target / max_phi)
            used.append(r_n)
            new_state = _step(state, system, r_n, params.alpha, boundary, phi_padded=phi_padded)
            _check_state(new_state, state, params.blowup_cap)
            watch.check(new_state)
            for observer in observers:
                observer.observe(new_state, r_n)
            state = new_state
        if used:
            r_min, r_max = min(used), max(used)
    else:
        for _ in range(step_count(params.T, r, ic.grid.h)):
            new_state = _step(state, system, r, params.alpha, boundary)
            _check_state(new_state, state, params.blowup_cap)
            watch.check(new_state)
            for observer in observers:
                observer.observe(new_state, r)
            state = new_state

    for observer in observers:
        observer.finish(state)
    return state, r_min, r_max, watch.polluted


def run_simulation(ic, system, params, observers=()):
    """
    Step from ic until t >= T with constant r (or per-step r in adaptive mode).

    In auto mode a CFL violation restarts the whole run with r halved, at most
    params.max_restarts times. Observers are restarted along with the run.
    """
    observers = list(observers)
    boundary = ConstantExtension.from_state(ic)
    if params.r_mode == 'fixed':
        r = params.r
    elif params.r_mode == 'auto' and params.r is not None:
        # An explicit r seeds the restart sequence
        r = params.r
    else:
        r = initial_ratio(ic, system, params)

    logger.info(
        "Run start: system=%s h=%g cells=%d r=%.6g mode=%s T=%g",
        system.name, ic.grid.h, ic.grid.n_cells, r, params.r_mode, params.T
    )

    restarts = 0
    while True:
        try:
            final, r_min, r_max, polluted = _advance(ic, system, params, r, boundary, observers)
            break
        except CflViolation as e:
            if params.r_mode != 'auto':
                raise
            if restarts >= params.max_restarts:
                raise CflExhausted(restarts, r) from e
            restarts += 1
            r *= 0.5
            logger.warning("%s; restarting with r=%.6g (restart %d)", e, r, restarts)
        except Blowup as e:
            logger.error("%s", e)
            raise

    logger.info("Run done: t=%.6g steps=%d restarts=%d", final.t, final.n, restarts)
    return SimulationResult(
        final=final,
        r=r,
        r_mode=params.r_mode,
        restarts=restarts,
        steps=final.n,
        r_min=r_min,
        r_max=r_max,
        boundary_polluted=polluted,
        observers=observers
    )


def collect_trajectory(ic, system, params):
    """
    Every time level of a run. Only for small grids; long runs use observers.
    """
    recorder = TrajectoryRecorder()
    run_simulation(ic, system, params, [recorder])
    return recorder.states


class TrajectoryRecorder(Observer):
    def __init__(self):
        self.states: List[StateField] = []

    def start(self, state, system, params, r):
        self.states = [state]

    def observe(self, state, r):
        self.states.append(state)


def total_mass(state: StateField) -> Sequence[float]:
    """
    (sum u h, sum v h).
    """
    h = state.grid.h
    return float(np.sum(state.u)) * h, float(np.sum(state.v)) * h
