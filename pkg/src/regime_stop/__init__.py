"""Optimal stopping as close as possible to the running maximum of a
regime-switching geometric Brownian motion.

The solver computes, over a (time, max/price ratio, regime) grid:

* the stop-value surface (expected terminal ratio when stopping now),
* the optimal value surface (backward induction over grid stopping times),
* the per-regime stopping boundary where the two coincide,

and validates them against an independent Monte Carlo path oracle.
"""

from .boundary import (
    BoundaryCurve,
    ShapeReport,
    classify,
    extract_boundary,
    shape_report,
)
from .chain import (
    ChainPath,
    TransitionMatrix,
    sample_chain_path,
    sample_holding_and_jump,
    stationary_distribution,
    transition_matrix,
)
from .density import (
    QuadratureSpec,
    TriangleRule,
    max_joint_density,
    max_tail_from_density,
    triangle_rule,
)
from .grids import SolverGrid, default_a_max, make_grid
from .kernels import StepKernels, interp_layer
from .model import (
    DriftParams,
    RegimeModel,
    drift_params,
    single_state_model,
    validate_model,
)
from .oracle import (
    PathBatch,
    PolicySpec,
    boundary_policy_value,
    compare_policies,
    evaluate_policy,
    simulate_paths,
)
from .stopvalue import (
    StopValueSurface,
    solve_stop_value,
    stop_value_direct,
    stop_value_mc,
    terminal_layer,
)
from .value import ValueSurface, solve_surfaces, value_step, value_step_mc

__version__ = "0.1.0"
