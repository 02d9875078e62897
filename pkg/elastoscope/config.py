# ruff: noqa: F401

from logging import (
    CRITICAL,
    DEBUG,
    ERROR,
    INFO,
    WARNING,
)

LOG_LEVEL = WARNING  # Set default log level to WARNING for less verbose output

# Logging destination: "file", "stdout", or "both"
LOG_DESTINATION = "file"  # Options: "file", "stdout", "both"

# CLI runs log at INFO unless --quiet is passed
CLI_LOG_LEVEL = INFO
# Daily log files go under <LOG_ROOT>/app and <LOG_ROOT>/tests; overridable
# through the ELASTOSCOPE_LOG_DIR environment variable
LOG_ROOT = "logs"
# Every CLI run mirrors package logs into this file inside --out
RUN_LOG_NAME = "run.log"

# --- Grid ---
# Upper bound on node count for a single grid (memory guard)
MAX_GRID_NODES = 20_000_000
# Minimum nodes per axis for second-order one-sided stencils
MIN_NODES_PER_AXIS = 3

# --- Stokes / elasticity forward solver ---
DEFAULT_OMEGA = 1.0
# Pressure stabilization: S = PRESSURE_STABILIZATION / mu_ref * (graph Laplacian),
# i.e. roughly 1e-2 * h^2 * Laplacian(p) / mu_ref
PRESSURE_STABILIZATION = 1e-2
# Estimated 1-norm condition number above which a solve is refused
RESONANCE_CONDITION_CAP = 1e12
# Solutions with condition estimate above CAP * fraction are flagged near_resonance
NEAR_RESONANCE_FRACTION = 1e-2
# Relative residual contract for every returned solution
SOLVER_RESIDUAL_TOL = 1e-10
# Iterative fallback stopping tolerance
ITERATIVE_RESIDUAL_TOL = 1e-12
ITERATIVE_MAX_ITER = 2000
# Iterative refinement sweeps after the direct solve
REFINEMENT_SWEEPS = 3
# Discrete compatibility of boundary data with incompressibility
COMPATIBILITY_TOL = 1e-12
# Stokes-limit experiment: gaps must exceed this multiple of the solver noise floor
STOKES_LIMIT_FLOOR_FACTOR = 10.0
# Slope tolerance when reporting agreement with the lambda^(-1/2) bound
STOKES_LIMIT_RATE_TOL = 0.15

# --- Adjoint / Landweber ---
LANDWEBER_N_MAX = 500
LANDWEBER_STOP_TOL = 1e-8
# Step cap AUTO_STEP_FACTOR * J / ||DJ||^2 at every iterate when the step is "auto"
AUTO_STEP_FACTOR = 2.0
STEP_GROWTH_FACTOR = 1.2
STEP_GROWTH_INTERVAL = 5
# Stall when the step falls below STEP_FLOOR_FRACTION of its cap
STEP_FLOOR_FRACTION = 1e-6
SNAPSHOT_STRIDE = 0  # 0 disables snapshots
SOBOLEV_EPS = 0.01
REFINE_DATA_GRID = True
DATA_REFINE_FACTOR = 2

# --- Symbol certificates ---
SPHERE_SAMPLES = 2048
# Nodes with the smallest sampled minimum that get local BFGS refinement
SPHERE_REFINE_NODES = 16
SPHERE_REFINE_GTOL = 1e-12
CERT_NODE_CHUNK = 1024
CERT_THRESHOLD = 1e-6
ROOT_MULTIPLICITY_RADIUS = 1e-8
# |Im tau| below this (relative to root scale) classifies a root as real
REAL_ROOT_TOL = 1e-6
# Pairwise distance below this (relative) flags ill-conditioned root finding
ILL_CONDITIONED_SEPARATION = 1e-6
SL_DETERMINANT_THRESHOLD = 1e-8
CONTOUR_POINTS = 256

# --- Residual operators ---
# Node rings dropped from identity residual norms (two cells); the outer
# derivative must not reach boundary rows
IDENTITY_BOUNDARY_LAYER = 2
KERNEL_TRIVIAL_THRESHOLD = 1e-6
# Dense SVD below this many unknowns, shifted ARPACK above
KERNEL_DENSE_LIMIT = 1200
# Kernel probe refuses grids finer than 48 cells per axis (in 3D)
KERNEL_MAX_NODES = 49**3
KERNEL_ARPACK_MAXITER = 5000

# --- Norms ---
MAX_SOBOLEV_ORDER = 4.0
TRACE_TOL = 1e-10
WEIGHTED_FIELD_CAP = 1e8
# Exponent of the smooth minimum used for the boundary defining function
BOUNDARY_WEIGHT_EXPONENT = 4
WEIGHTED_BOUNDARY_LAYER = 1

# --- Phantoms / excitations ---
DEFAULT_MU_MIN = 0.1
DEFAULT_MU_MAX = 100.0
EXCITATION_MODES = 2
