"""Grid-based LP/MIP solver toolkit for constrained POMDPs."""

from .bounds import (
    AlphaVector,
    BoundReport,
    evaluate_gap,
    lb_alpha_vectors,
    lb_values_at,
    sample_beliefs,
    ub_value_at,
    ub_values,
)
from .dynamics import (
    ConvergenceError,
    GridDynamics,
    build_beta_table,
    finite_horizon_dynamics,
    infinite_horizon_dynamics,
    transition_row,
)
from .grids import GridSet, build_grid_set, fixed_resolution_grid, grid_set_size
from .interpolation import (
    GridContractError,
    WeightCache,
    interpolated_value,
    interpolation_weights,
)
from .lp import LinearProgram, Solution, export_lp, solve_lp, solve_mip
from .model import (
    ConstraintSpec,
    DeltaSpec,
    PomdpModel,
    ZeroProbabilityObservation,
    as_belief,
    belief_update,
    expected_reward,
    observation_probability,
    validate_model,
)
from .simulate import SimulationReport, percent_over, simulate_policy
from .solver import (
    DominancePair,
    OccupancyPolicy,
    add_deterministic_constraints,
    add_threshold_constraints,
    build_finite_dual,
    build_finite_primal,
    build_infinite_dual,
    dominance_pairs,
    extract_policy,
    policy_from_json,
    policy_to_json,
    solve_constrained,
)

__version__ = "0.1.0"
