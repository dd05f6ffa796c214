"""Configuration defaults for the hierarchical deconvolution toolkit"""

# Prior parameters
DEFAULT_EPSILON = 1e-3
DEFAULT_Q = 4.0  # eps**q must be negligible; q=4 with eps <= 1e-2 gives <= 1e-8

# Discretization levels (N = 2**n unknowns, K = 2**k measurement coefficients)
DEFAULT_N = 6
DEFAULT_K = 6

# Forward model
DEFAULT_KERNEL_TYPE = 'periodized_gaussian'
DEFAULT_KERNEL_WIDTH = 0.03
KERNEL_PERIODS = 5  # periodized Gaussian sums shifts |m| <= 5
DEFAULT_QUAD_ORDER = 8
QUAD_CONVERGENCE_TOL = 1e-8
QUAD_FAILURE_TOL = 1e-6
MAX_QUAD_LEVEL = 16
DEFAULT_SIGMA = 1.0

# Truth signal
DEFAULT_SIGNAL = 'step_ramp_bump'
SIGNAL_PROFILES = ['step_ramp_bump', 'two_steps', 'sine', 'segments']

# SCAM sampler
DEFAULT_SWEEPS = 20_000
DEFAULT_BURNIN_FRACTION = 0.1
DEFAULT_SIGMA0 = 1.0
DEFAULT_SCALE_S = 2.4
DEFAULT_DELTA = 1e-3
DEFAULT_THIN = 1
DEFAULT_SEED = 0
CHAIN_COORDINATES = ['basis', 'nodal']
CHAIN_INIT = ['prior_mean', 'map']

# Incremental evaluation cache
CACHE_REVALIDATE_EVERY = 10_000
CACHE_REFRESH_TOL = 1e-9
CACHE_FAILURE_TOL = 1e-6

# Convergence diagnostics
DIAG_EPSILON = 0.25
DIAG_LEVELS = [3, 4, 5, 6, 7]
DIAG_T = 0.4
DIAG_B = 1.0
DIAG_NSAMPLES = 100_000
DIAG_MOMENT_EPSILON = 0.9
DIAG_MOMENT_LEVELS = [3, 4, 5]
DIAG_SELECTORS = ['mult', 'proj', 'weak', 'moments', 'all']
MULT_RATIO_THRESHOLD = 1.8
MOMENT_BAND = 2.0
FOURIER_OVERSAMPLING = 16  # truncation J = 16 * N

# Monte Carlo defaults for prior diagnostics
DEFAULT_MC_SAMPLES = 100_000

# Exit codes (stable contract for scripted runs)
EXIT_CODES = {
    'ok': 0,
    'config': 2,
    'numeric': 3,
    'diagnostic': 4,
}

# Run-table styling (Excel export)
EXCEL_STYLES = {
    'header_bg_color': 'D3D3D3',
    'summary_bg_color': 'DDEBF7',
    'font_name': 'Arial',
    'font_size': 10
}
