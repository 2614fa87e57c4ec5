import logging
import math
import os
from dataclasses import dataclass, field, fields
from typing import List, Optional, Tuple

import config
from errors import ConfigurationError
from loaders import load_config_file
from scheme import GridSpec, SchemeParams
from systems import RiemannData

logger = logging.getLogger(__name__)

VALID_KEYS = [
    'system', 'ic', 'preset', 'domain', 'h', 'n_cells', 'r', 'r_mode', 'cfl_target',
    'alpha', 'beta', 'gamma', 'T', 'out', 'snapshots', 'residual', 'monitor', 'seed',
    'db', 'png', 'jump_x', 'workers'
]


@dataclass
class RunConfig:
    command: str = 'run'
    system: str = 'kk'
    ic: Optional[RiemannData] = None
    preset: Optional[str] = None
    domain: Tuple[float, float] = (-1.0, 1.0)
    h: Optional[float] = None
    n_cells: Optional[int] = None
    r: Optional[float] = None
    r_mode: str = 'fixed'
    cfl_target: float = config.DEFAULT_PARAMS['cfl_target']
    alpha: float = config.DEFAULT_PARAMS['alpha']
    beta: float = config.DEFAULT_PARAMS['beta']
    gamma: float = config.DEFAULT_PARAMS['gamma']
    T: float = config.DEFAULT_PARAMS['T']
    out: str = os.path.join(config.OUTPUT_DIR, 'run')
    snapshots: List[float] = field(default_factory=list)
    residual: bool = False
    monitor: bool = True
    seed: int = config.DEFAULT_SEED
    db: Optional[str] = None
    png: bool = False
    jump_x: float = 0.0
    workers: Optional[int] = None

    def grid(self):
        x_min, x_max = self.domain
        if self.h is not None:
            return GridSpec.from_h(x_min, x_max, self.h)
        if self.n_cells is not None:
            return GridSpec.from_n_cells(x_min, x_max, self.n_cells)
        raise ConfigurationError("Either h or n_cells is required", field='h')


def initialize_default_settings():
    """
    Defaults as a plain dictionary, keyed like VALID_KEYS.
    """
    defaults = RunConfig()
    return {key: getattr(defaults, key) for key in VALID_KEYS}


def _coerce(key, value):
    if value is None:
        return None
    try:
        if key in ('h', 'r', 'cfl_target', 'alpha', 'beta', 'gamma', 'T', 'jump_x'):
            return float(value)
        if key in ('n_cells', 'seed', 'workers'):
            if isinstance(value, float) and not value.is_integer():
                raise ValueError(f"expected an integer, got {value}")
            return int(value)
        if key == 'domain':
            if isinstance(value, str):
                value = value.split(',')
            domain = tuple(float(x) for x in value)
            if len(domain) != 2:
                raise ValueError("expected two values x_min,x_max")
            return domain
        if key == 'snapshots':
            if isinstance(value, str):
                value = [x for x in value.split(',') if x.strip()]
            return sorted(float(x) for x in value)
        if key == 'ic':
            if isinstance(value, RiemannData):
                return value
            if isinstance(value, dict):
                return RiemannData.from_dict(value)
            if isinstance(value, (list, tuple)):
                value = ','.join(str(x) for x in value)
            return RiemannData.parse(value)
        if key in ('residual', 'monitor', 'png'):
            return bool(value)
    except (TypeError, ValueError) as e:
        raise ConfigurationError(f"Invalid value for '{key}': {value!r} ({e})", field=key)
    return value


def _check(run_config):
    for key in ('h', 'r', 'T', 'alpha', 'beta', 'gamma', 'cfl_target'):
        value = getattr(run_config, key)
        if value is not None and not math.isfinite(value):
            raise ConfigurationError(f"'{key}' must be finite, got {value}", field=key)
    if run_config.h is not None and run_config.h <= 0:
        raise ConfigurationError(f"h must be positive, got {run_config.h}", field='h')
    if run_config.n_cells is not None and run_config.n_cells < 1:
        raise ConfigurationError(f"n_cells must be >= 1, got {run_config.n_cells}", field='n_cells')
    if run_config.h is not None and run_config.n_cells is not None:
        x_min, x_max = run_config.domain
        implied = (x_max - x_min) / run_config.n_cells
        if abs(implied - run_config.h) > config.GRID_SPAN_RTOL * run_config.h:
            raise ConfigurationError(
                f"Conflicting h={run_config.h:g} and n_cells={run_config.n_cells} "
                f"for domain [{x_min:g}, {x_max:g}]",
                field='h'
            )
    if run_config.r_mode not in config.R_MODES:
        raise ConfigurationError(f"r_mode must be one of {config.R_MODES}", field='r_mode')
    if run_config.r_mode == 'fixed' and run_config.r is None and run_config.preset is None:
        if run_config.command == 'run':
            raise ConfigurationError("Fixed r mode needs --r (or use --auto-r / --adaptive-r)", field='r')
    if any(t < 0 for t in run_config.snapshots):
        raise ConfigurationError("Snapshot times must be >= 0", field='snapshots')
    if run_config.workers is not None and run_config.workers < 1:
        raise ConfigurationError("workers must be >= 1", field='workers')


def build_run_config(command, flags, config_path=None, base=None):
    """
    Defaults, then the preset base, then the JSON config file, then flags.
    Flags set to None are treated as absent so file values survive.
    """
    later = {}
    if config_path:
        file_values = load_config_file(config_path)
        ignored = sorted(set(file_values) - set(VALID_KEYS))
        if ignored:
            logger.warning("Ignoring unknown config keys in %s: %s", config_path, ", ".join(ignored))
        later.update({k: v for k, v in file_values.items() if k in VALID_KEYS and v is not None})
    later.update({k: v for k, v in flags.items() if k in VALID_KEYS and v is not None})

    merged = initialize_default_settings()
    if base:
        # A cell count given later replaces the preset's first grid
        if 'n_cells' in later and 'h' not in later:
            base = {k: v for k, v in base.items() if k != 'h'}
        merged.update(base)
    merged.update(later)

    values = {key: _coerce(key, value) for key, value in merged.items()}
    if values.get('snapshots') is None:
        values['snapshots'] = []
    run_config = RunConfig(command=command, **values)
    _check(run_config)
    return run_config


def scheme_params(run_config, **overrides):
    values = {
        'r': run_config.r,
        'alpha': run_config.alpha,
        'beta': run_config.beta,
        'gamma': run_config.gamma,
        'T': run_config.T,
        'cfl_target': run_config.cfl_target,
        'r_mode': run_config.r_mode
    }
    values.update(overrides)
    return SchemeParams(**values)


def run_config_to_dict(run_config):
    data = {}
    for item in fields(run_config):
        value = getattr(run_config, item.name)
        if isinstance(value, RiemannData):
            value = value.to_dict()
        elif isinstance(value, tuple):
            value = list(value)
        data[item.name] = value
    return data
