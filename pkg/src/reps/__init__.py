"""Relative-entropy policy search on tabular MDPs through the regularized occupancy-measure dual."""

from .agd import (
    AgdConfig,
    IterateLog,
    accelerated_solve,
    eta_for_accuracy,
    project_linf,
    reference_solve,
    required_iterations,
    suboptimality_certificate,
)
from .diagnostics import (
    OptimalSolution,
    finite_difference_gradient,
    policy_suboptimality,
    policy_value_bound_check,
    value_iteration,
    visitation_floor,
    weak_duality_check,
)
from .dual import (
    RegularizedProblem,
    TheoryConstants,
    advantage,
    candidate_primal,
    dual_gradient,
    dual_value,
    lagrangian,
    primal_regularized_value,
    theory_constants,
)
from .errors import InvalidInput, NumericalFailure, RepsError
from .mdp import (
    Mdp,
    ReferenceDistribution,
    behavior_reference,
    flow_residual,
    policy_from_visitation,
    policy_value,
    primal_return,
    random_mdp,
    uniform_reference,
    validate_mdp,
    visitation_of_policy,
)
from .regularizers import (
    ConjugateResult,
    KlSpec,
    TsallisSpec,
    conjugate_bruteforce,
    kl_conjugate,
    kl_value,
    tsallis_conjugate,
    tsallis_value,
)
from .report import GapReport
from .sgd import (
    SgdConfig,
    conditional_mean_gradient,
    draw_transitions,
    empirical_model,
    gradient_estimate,
    sample_schedule,
    sgd_solve,
)

__version__ = "0.1.0"

__all__ = [
    "AgdConfig",
    "ConjugateResult",
    "GapReport",
    "InvalidInput",
    "IterateLog",
    "KlSpec",
    "Mdp",
    "NumericalFailure",
    "OptimalSolution",
    "ReferenceDistribution",
    "RegularizedProblem",
    "RepsError",
    "SgdConfig",
    "TheoryConstants",
    "TsallisSpec",
    "accelerated_solve",
    "advantage",
    "behavior_reference",
    "candidate_primal",
    "conditional_mean_gradient",
    "conjugate_bruteforce",
    "draw_transitions",
    "dual_gradient",
    "dual_value",
    "empirical_model",
    "eta_for_accuracy",
    "finite_difference_gradient",
    "flow_residual",
    "gradient_estimate",
    "kl_conjugate",
    "kl_value",
    "lagrangian",
    "policy_from_visitation",
    "policy_suboptimality",
    "policy_value",
    "policy_value_bound_check",
    "primal_regularized_value",
    "primal_return",
    "project_linf",
    "random_mdp",
    "reference_solve",
    "required_iterations",
    "sample_schedule",
    "sgd_solve",
    "suboptimality_certificate",
    "theory_constants",
    "tsallis_conjugate",
    "tsallis_value",
    "uniform_reference",
    "validate_mdp",
    "value_iteration",
    "visitation_floor",
    "visitation_of_policy",
    "weak_duality_check",
]
