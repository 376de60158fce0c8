"""
Configuration settings for the vortex laboratory
"""
import os


class Config:
    """Laboratory configuration"""

    # Output and logging
    OUTPUT_DIR = os.environ.get('VORTEXLAB_OUTPUT_DIR', 'runs')
    LOG_LEVEL = os.environ.get('VORTEXLAB_LOG_LEVEL', 'INFO')
    EXPERIMENTS_DIRECTORY = os.environ.get('VORTEXLAB_EXPERIMENTS_DIR', 'experiments')
    WORKERS = int(os.environ.get('VORTEXLAB_WORKERS', '4'))
    DEFAULT_SEED = 0

    # Torus grid
    MIN_GRID_POINTS = 16
    CELLS_PER_CORE = 8          # advisory: h <= eps / 8
    MEAN_ZERO_TOL = 1e-10
    SINGULAR_DISTANCE = 1e-12

    # Green function (heat-kernel split)
    EWALD_TAU = 1.0 / (8.0 * 3.141592653589793)
    EWALD_IMAGES = 2
    EWALD_FOURIER_MAX = 6

    # Vortex clustering
    CLUSTER_THRESHOLD = 10.0

    # Monotone scheme
    MONOTONE_KAPPA_FACTOR = 4.0     # K = factor / eps^2
    MONOTONE_KAPPA_MIN_FACTOR = 2.0
    MONOTONE_TOL_SUP = 1e-10
    MONOTONE_MAX_ITER = 10000
    MONOTONE_RISE_TOL = 1e-12
    MONOTONE_ALIASING_SLACK = 1e-3
    NONEXISTENCE_FLOOR = -50.0
    NONEXISTENCE_PATIENCE = 500
    CORE_RADIUS_FACTOR = 10.0
    TOPOLOGICAL_SUP_TOL = 0.1

    # Newton-Krylov
    NEWTON_TOL_RES = 1e-10
    NEWTON_MAX_STEPS = 50
    KRYLOV_TOL = 1e-4
    KRYLOV_MAX_ITER = 500
    ARMIJO_C = 1e-4
    MAX_HALVINGS = 20

    # Smallest eigenvalue of -L
    EIGEN_TOL = 1e-8
    EIGEN_MAX_ITER = 400
    EIGEN_BLOCK = 3
    EIGEN_INNER_TOL = 1e-10

    # Radial shooting
    SHOOT_R0 = 1e-6
    SHOOT_RTOL = 1e-11
    SHOOT_ATOL = 1e-13
    BLOWDOWN_LEVEL = 60.0
    TAIL_FLOOR = 1e-5
    BISECTION_WIDTH = 1e-12
    BETA_R_MAX = 1e12

    # Planar solve
    PLANAR_HALF_WIDTH = 30.0
    PLANAR_MIN_HALF_WIDTH = 20.0
    PLANAR_GRID = 256
    PLANAR_TOL_RES = 1e-10

    # Perturbative constructor
    CUTOFF_DELTA = 0.1
    PERTURB_POWER = 3
    PERTURB_TOL = 1e-9
    CONTRACTION_PATIENCE = 10
    CONTRACTION_MAX_ITER = 200

    # Diagnostics
    POHOZAEV_RADIUS_FACTOR = 20.0
    POHOZAEV_SUBSAMPLE = 4
    UNIQUENESS_AMPLITUDE = 0.5
    UNIQUENESS_KMAX = 8
    UNIQUENESS_TOL = 1e-6
    FLUX_TOL = 1e-3
    POHOZAEV_TOL = 0.05
