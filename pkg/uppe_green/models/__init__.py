from .spectral_core import GridSpec, Field, make_grid, forward_transform, inverse_transform, build_beta_z
from .projectors import make_mask, apply, decompose, causality_stats
from .green import GreenSpec, make_green_spec, uppe_green, theorem1_residual, theorem2_residual
from .propagator import march, solve_convolution
from .verification import run_all_checks
