"""Nonsmooth min-max critical point solver.

Computes and certifies critical points of locally Lipschitz functionals on a
split space E = V + W through the value min_w max_v phi(v + w).
"""

__version__ = "0.1.0"

from .clarke import (
    CriticalityCertificate,
    LipschitzFunctional,
    SamplingConfig,
    SubdifferentialApprox,
    certify_critical,
    generalized_dir_derivative,
    lebourg_containment_test,
    min_norm_point,
    subdifferential_approx,
)
from .errors import (
    AntiCoercivityError,
    DegenerateGapError,
    DegenerateSamplingError,
    EvaluationError,
    ExpressionError,
    HypothesisFailure,
    InputError,
    LscFailureError,
    NonConvergenceError,
    NsMinimaxError,
    SelectionFailure,
    StageError,
)
from .dirichlet import (
    DirichletProblem,
    DirichletReport,
    DiscreteEnergy,
    assemble,
    energy,
    energy_residual,
    solve_dirichlet,
)
from .expr import parse_expression, parse_nonlinearity
from .hypotheses import (
    ConditionReport,
    check_anticoercive_V,
    check_coercive_on_W,
    check_DO,
    check_nonresonance,
    check_quasiconcave_V,
    check_weak_lsc,
    witness_reproduces,
)
from .minimax import (
    AuditConfig,
    CriticalityConfig,
    CriticalPointReport,
    MinimaxProblem,
    OuterConfig,
    outer_gradient,
    outer_minimize,
    solve_saddle,
)
from .selection import (
    SelectionConfig,
    SelectionResult,
    inner_max,
    lsc_probe,
    michael_selection_mesh,
    perturbed_selection,
    selection_continuity_audit,
)
from .splitspace import SplitSpace, eigensplit

__all__ = [
    "AntiCoercivityError",
    "assemble",
    "AuditConfig",
    "certify_critical",
    "check_anticoercive_V",
    "check_coercive_on_W",
    "check_DO",
    "check_nonresonance",
    "check_quasiconcave_V",
    "check_weak_lsc",
    "ConditionReport",
    "CriticalityCertificate",
    "CriticalityConfig",
    "CriticalPointReport",
    "DegenerateGapError",
    "DegenerateSamplingError",
    "DirichletProblem",
    "DirichletReport",
    "DiscreteEnergy",
    "eigensplit",
    "energy",
    "energy_residual",
    "EvaluationError",
    "ExpressionError",
    "generalized_dir_derivative",
    "HypothesisFailure",
    "inner_max",
    "InputError",
    "lebourg_containment_test",
    "LipschitzFunctional",
    "lsc_probe",
    "LscFailureError",
    "michael_selection_mesh",
    "min_norm_point",
    "MinimaxProblem",
    "NonConvergenceError",
    "NsMinimaxError",
    "outer_gradient",
    "outer_minimize",
    "OuterConfig",
    "parse_expression",
    "parse_nonlinearity",
    "perturbed_selection",
    "SamplingConfig",
    "selection_continuity_audit",
    "SelectionConfig",
    "SelectionFailure",
    "SelectionResult",
    "solve_dirichlet",
    "solve_saddle",
    "SplitSpace",
    "StageError",
    "subdifferential_approx",
    "SubdifferentialApprox",
    "witness_reproduces",
]
