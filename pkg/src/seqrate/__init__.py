"""Rate and cost bounds for quantized estimation and LQG control of
parallel Gauss-Markov systems, with a Monte-Carlo DPCM/ECDQ validator."""

from .model import (
    ControlModel,
    LatticeSpec,
    LqgSolution,
    Schedule,
    SourceModel,
    ValidationError,
    validate_control,
    validate_schedule,
    validate_source,
)
from .waterfill import (
    InfeasibleRateError,
    NonConvergenceError,
    decoupled_rates,
    distortion_rate,
    forward_pass,
    solve,
    steady_state_rate,
    steady_state_schedule_limit,
    xi,
)
from .lattice import (
    ecdq_gap,
    g_known,
    g_sphere,
    g_zador_upper,
    make_lattice,
    steady_upper,
    upper_rates,
)
from .lqg import (
    bound_table,
    cost_lower,
    cost_upper,
    rate_cost,
    riccati,
    steady_riccati,
    steady_state_lqg,
)
from .simulator import (
    SimReport,
    empirical_entropy,
    simulate_control,
    simulate_estimation,
    statistical_checks,
)

__version__ = "0.1.0"

__all__ = [
    "ControlModel",
    "InfeasibleRateError",
    "LatticeSpec",
    "LqgSolution",
    "NonConvergenceError",
    "Schedule",
    "SimReport",
    "SourceModel",
    "ValidationError",
    "bound_table",
    "cost_lower",
    "cost_upper",
    "decoupled_rates",
    "distortion_rate",
    "ecdq_gap",
    "empirical_entropy",
    "forward_pass",
    "g_known",
    "g_sphere",
    "g_zador_upper",
    "make_lattice",
    "rate_cost",
    "riccati",
    "simulate_control",
    "simulate_estimation",
    "solve",
    "statistical_checks",
    "steady_riccati",
    "steady_state_lqg",
    "steady_state_rate",
    "steady_state_schedule_limit",
    "steady_upper",
    "upper_rates",
    "validate_control",
    "validate_schedule",
    "validate_source",
    "xi",
]
