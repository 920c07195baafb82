'''
Registries of supported options and the numerical defaults shared across daplace.
'''

__presets__ = ['single', 'nine-variant', 'common-u']
__experiments__ = ['1a', '1b', '2', '3', '4']
__modes__ = ['linear', 'sparsity']
__candidate_modes__ = ['all', 'points']
__backgrounds__ = ['zero', 'truth']
__forcings__ = ['default', 'zero']
__preconditioners__ = ['l2', 'h1']

# implicit Euler / Newton
NEWTON_TOL = 1e-10
NEWTON_MAX_ITER = 25

# lower-level BFGS
LOWER_TOL = 1e-6
LOWER_MAX_ITER = 100
LOWER_MAX_HALVINGS = 40
ARMIJO_C = 1e-4

# upper-level projected BFGS
UPPER_TOL = 1e-6
UPPER_MAX_ITER = 60
GAMMA_HAT = 1e-4
EPS_ACTIVE_MAX = 0.1
MAX_ARMIJO_TRIALS = 40
# stage stops as stalled when STALL_WINDOW accepted steps lower the cost by at most STALL_RTOL * |cost|
STALL_WINDOW = 3
STALL_RTOL = 1e-3
CURVATURE_SKIP = 1e-12
# smallest curvature y^T s / s^T s the reduced BFGS update accepts before damping y
CURVATURE_FLOOR = 1e-3

# coupled bilevel adjoint
ADJOINT_TOL = 1e-8
ADJOINT_MAX_APPS = 200

# exhaustive binarization
MAX_EXHAUSTIVE = 12

# interval bands used to classify relaxed placements
W_BANDS = (0.2, 0.8)
SIGMA_BANDS = (0.25, 0.5, 0.75)

# Experiment 2 feasible locations
EXPERIMENT2_POINTS = ((0.2, 0.2), (0.5, 0.4), (0.7, 0.3), (0.8, 0.0),
                      (0.8, 1.0), (0.8, 0.6), (0.4, 0.9), (0.3, 0.8))

WORKERS_ENV = 'DAPLACE_WORKERS'
