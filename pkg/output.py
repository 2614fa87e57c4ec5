"""
Profile CSVs, table CSVs, gnuplot scripts and the snapshot observer.
"""
import logging
import os

import numpy as np
import pandas as pd

import config
from errors import ConfigurationError
from scheme import Observer, StateField

logger = logging.getLogger(__name__)


def _ensure_parent(path):
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)


def write_frame(frame, path):
    """
    Write a DataFrame as CSV with 17 significant digits and '\\n' line endings.
    """
    try:
        _ensure_parent(path)
        frame.to_csv(path, index=False, float_format=config.CSV_FLOAT_FORMAT, lineterminator="\n")
    except OSError as e:
        raise OSError(f"Cannot write {path}: {e.strerror or e}") from e
    logger.info("Wrote %s", path)
    return path


def profile_frame(state):
    return pd.DataFrame({'x': state.grid.centers(), 'u': state.u, 'v': state.v}, columns=['x', 'u', 'v'])


def write_profile_csv(state, path):
    """
    Header x,u,v then one row per cell center in ascending x.
    """
    return write_frame(profile_frame(state), path)


def read_profile_csv(path):
    """
    DataFrame with columns x, u, v, parsed back to the exact doubles.
    """
    if not os.path.exists(path):
        raise ConfigurationError(f"Profile file does not exist: {path}")
    frame = pd.read_csv(path, float_precision='round_trip')
    if list(frame.columns) != ['x', 'u', 'v']:
        raise ConfigurationError(f"{path}: expected header x,u,v, got {','.join(frame.columns)}")
    return frame


def profile_to_state(frame, grid, t=0.0, n=0):
    if len(frame) != grid.n_cells:
        raise ConfigurationError(f"Profile has {len(frame)} rows, grid has {grid.n_cells} cells")
    return StateField(grid, frame['u'].to_numpy(), frame['v'].to_numpy(), t, n)


def emit_plot_script(profile_paths, output_path, title=None):
    """
    gnuplot script drawing u and v against x for every profile CSV, one
    panel per variable. The script is written, never executed.
    """
    if not profile_paths:
        raise ConfigurationError("emit_plot_script needs at least one profile path")

    script_dir = os.path.dirname(os.path.abspath(output_path))
    relative = [os.path.relpath(os.path.abspath(p), script_dir) for p in profile_paths]
    image = os.path.splitext(os.path.basename(output_path))[0] + ".png"

    lines = [
        "# gnuplot script; run from this directory: gnuplot " + os.path.basename(output_path),
        'set datafile separator ","',
        "set terminal pngcairo size 1000,800",
        f'set output "{image}"',
        f'set multiplot layout 2,1 title "{title or "profiles"}"',
        'set xlabel "x"',
        "set grid"
    ]
    for column, label in ((2, 'u'), (3, 'v')):
        curves = [f'"{path}" skip 1 using 1:{column} with lines title "{label} {os.path.basename(path)}"'
                  for path in relative]
        lines.append(f'set ylabel "{label}"')
        lines.append("plot " + ", \\\n     ".join(curves))
    lines.append("unset multiplot")

    _ensure_parent(output_path)
    try:
        with open(output_path, 'w', newline="\n") as f:
            f.write("\n".join(lines) + "\n")
    except OSError as e:
        raise OSError(f"Cannot write {output_path}: {e.strerror or e}") from e
    logger.info("Wrote plot script %s", output_path)
    return output_path


def snapshot_path(prefix, t):
    return f"{prefix}_t{t:.6f}.csv"


class ProfileSnapshotter(Observer):
    """
    Writes the profile at each requested time, rounded down to the last
    completed step; the file name carries the actual time.
    """

    def __init__(self, prefix, times):
        self.prefix = prefix
        self.times = sorted(float(t) for t in times)
        self.paths = []
        self._pending = []
        self._previous = None

    def _write(self, state):
        path = snapshot_path(self.prefix, state.t)
        if path not in self.paths:
            write_profile_csv(state, path)
            self.paths.append(path)

    def start(self, state, system, params, r):
        self.paths = []
        self._pending = list(self.times)
        self._previous = state

    def observe(self, state, r):
        tolerance = config.STEP_COUNT_RTOL * max(1.0, state.t)
        while self._pending and state.t > self._pending[0] + tolerance:
            self._write(self._previous)
            self._pending.pop(0)
        self._previous = state

    def finish(self, state):
        for _ in self._pending:
            self._write(state)
        self._pending = []


def peak_ratio(state, plateau_cells=10):
    """
    max|v| against the median |v| of cells away from the peak.
    """
    v = np.abs(state.v)
    peak = int(np.argmax(v))
    mask = np.ones_like(v, dtype=bool)
    mask[max(0, peak - plateau_cells):peak + plateau_cells + 1] = False
    plateau = float(np.median(v[mask])) if mask.any() else 0.0
    return float(v[peak]) / plateau if plateau > 0 else float('inf')
