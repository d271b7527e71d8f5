DEFAULT_C = 1.0
DEFAULT_BRANCH_POLICY = "evanescent_decay"
# light-line epsilon = factor * d_omega / c
DEFAULT_EPSILON_FACTOR = 1e-6
# mollifier widths in grid steps
DEFAULT_SIGMA_STEPS = 2.0
DEFAULT_SEED = 1234
DEFAULT_THREADS = 0
MAX_DFT_BINS = 4096
MAX_QUADRATURE_SPACE_BINS = 16 * 16 * 16
MAX_QUADRATURE_TIME_BINS = 32
# time refinement before retarded times are interpolated
QUADRATURE_UPSAMPLE = 8
