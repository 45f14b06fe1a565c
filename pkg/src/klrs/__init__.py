"""KL robust satisficing: minimize fragility subject to a loss target."""
from .core import (
    DiscreteDistribution,
    LossVector,
    TiltConfig,
    kl_divergence,
    laplace_smooth,
    log_surrogate_mean,
    mean_variance_approx,
    normalized_surrogate,
    tilted_risk,
    worst_case_weights,
)
from .exceptions import (
    AbsoluteContinuityError,
    BoundVacuousError,
    DegenerateClassError,
    DomainError,
    InfeasibleTargetError,
)
from .hierarchical import (
    GroupedDataset,
    HierConfig,
    HierSolveResult,
    group_klrs_risk,
    hier_tilted_risk,
    solve_hier,
    solve_lambda2,
)
from .models import (
    Dataset,
    FixedLossModel,
    LeastSquaresModel,
    LogisticModel,
    LossModel,
    PointEstimationModel,
    symmetric_eigh,
)
from .solver import SolveResult, SolverConfig, erm_solve, feasibility_check, solve_klrs, term_baseline

__version__ = "0.1.0"
