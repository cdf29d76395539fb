"""Supervised optimal transport: entropic OT with blocked couplings.

Couplings marked +inf in the cost matrix are forbidden; the transported
mass is itself maximized (via an l1 penalty with weight gamma) before the
transport cost is minimized, and marginals need not be normalized.
"""

__version__ = "0.1.0"

from .core import (
    CostMatrix,
    Marginal,
    SolverConfig,
    SolverResult,
    TransportPlan,
    discretized_gaussian,
    discretized_indicator,
    entropy,
    gibbs_kernel,
    grid_truncated_cost,
    kl_divergence,
    marginals,
    truncated_sq_cost,
    unit_grid,
)
from .sinkhorn import (
    GammaSelection,
    select_gamma,
    solve,
    solve_sot,
    solve_sot_logdomain,
    transported_mass,
)
from .barycenter import (
    BarycenterProblem,
    BarycenterResult,
    prox_geometric_mean,
    prox_kl_capped,
    resemblance,
    solve_barycenter,
    solve_barycenter_logdomain,
)
from .oracle import (
    CumsumOrder,
    complete_transport_feasible,
    cumsum_compare,
    northwest_corner,
    solve_sot_exact,
)

__all__ = [
    "__version__",
    "CostMatrix",
    "Marginal",
    "SolverConfig",
    "SolverResult",
    "TransportPlan",
    "discretized_gaussian",
    "discretized_indicator",
    "entropy",
    "gibbs_kernel",
    "grid_truncated_cost",
    "kl_divergence",
    "marginals",
    "truncated_sq_cost",
    "unit_grid",
    "GammaSelection",
    "select_gamma",
    "solve",
    "solve_sot",
    "solve_sot_logdomain",
    "transported_mass",
    "BarycenterProblem",
    "BarycenterResult",
    "prox_geometric_mean",
    "prox_kl_capped",
    "resemblance",
    "solve_barycenter",
    "solve_barycenter_logdomain",
    "CumsumOrder",
    "complete_transport_feasible",
    "cumsum_compare",
    "northwest_corner",
    "solve_sot_exact",
]
