"""
Configuration settings for the singular-shock splitting solver.
"""
import os

# Scheme Defaults
DEFAULT_PARAMS = {
    'alpha': 0.2,              # Averaging weight, must stay in [0, 0.5)
    'beta': 0.0,               # Velocity-growth exponent used by the monitors
    'gamma': 0.0,              # Flux-sum exponent used by the monitors
    'T': 1.0,                  # Final time
    'cfl_target': 0.9,         # Headroom for the auto and adaptive r modes
    'r_max': 1.0,              # Upper bound on r when max|phi| vanishes
    'blowup_cap': 1e12,        # Abort threshold on max|u|, max|v|
    'boundary': 'constant-extension'
}

R_MODES = ['fixed', 'auto', 'adaptive']
BOUNDARY_POLICIES = ['constant-extension']

# Time Loop
MAX_RESTARTS = 10              # Halvings of r allowed in auto mode
STEP_COUNT_RTOL = 1e-12        # T/(r*h) within this of an integer counts as that integer

# Boundary Handling
GHOST_CELLS = 2
BOUNDARY_WATCH_CELLS = 4
BOUNDARY_CHANGE_TOL = 1e-10

# Grid
GRID_SPAN_RTOL = 1e-9
MIN_CELLS_PER_PRESET_GRID = 16
EDGE_SNAP_TOL = 1e-9           # Jump closer than this fraction of h to an edge snaps onto it

# Weak Residual
GAUSS_POINTS = 2
NOISE_FLOOR = 1e-14
MIN_GRIDS_FOR_ORDER = 3
SHOCK_PSI_OFFSET = 0.25        # Shock bump shift off the jump, in bump widths

# Assumption Verdict
MIN_REPORTS_FOR_VERDICT = 3
UNBOUNDED_MARGIN = 0.25        # Last value above the running median by this fraction

# Output
OUTPUT_DIR = "output"
CSV_FLOAT_FORMAT = "%.17g"
TABLE_DECIMALS = {
    'h': 7,
    'r': 3,
    'h_over_r': 4,
    'q27': 4,
    'q28': 4,
    'q29': 4,
    'peak_v': 4
}
MONITOR_COLUMNS = ['h', 'r', 'h_over_r', 'q27', 'q28', 'q29', 'peak_v', 'steps']
RESIDUAL_COLUMNS = ['h', 'psi_id', 'I_u', 'I_v']
ORDER_COLUMNS = ['psi_id', 'p_u', 'p_v', 'grids_used']

# Results Database
RESULTS_DB_PATH = os.environ.get("SINGSHOCK_RESULTS_DB", "data/singshock_results.db")

# Workers for table sweeps
DEFAULT_THREADS = 1


def get_thread_cap():
    """
    Worker cap for parallel sweeps, read from SINGSHOCK_THREADS.
    """
    value = os.environ.get("SINGSHOCK_THREADS", "")
    try:
        threads = int(value)
    except ValueError:
        return DEFAULT_THREADS
    return max(1, threads)


# Logging
LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"
LOG_LEVEL = os.environ.get("SINGSHOCK_LOG_LEVEL", "INFO")

# Property Suites
DEFAULT_SEED = 20240607
PROPERTY_SLACK = 1e-12
RECOMBINATION_SAMPLES = 10000
RECOMBINATION_BOX = 10.0       # (u, v) drawn from [-box, box]^2
