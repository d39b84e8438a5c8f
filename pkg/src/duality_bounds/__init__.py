"""Lagrangian dual bounds for compact QCQPs built from toy scattering models."""
from .constraints import (
    Constraint,
    ConstraintKind,
    ConstraintSet,
    compact_constraint,
    default_family,
    gen_constraint_background,
    gen_constraint_simple,
    validate_on_designs,
)
from .dual import (
    DualState,
    DualStatus,
    LagrangianProblem,
    SolverConfig,
    coercivity_check,
    dual_gradient,
    dual_hessian,
    eval_dual,
    lift_phi_dot,
    minimize_dual,
)
from .exceptions import (
    DualityBoundsError,
    DimensionMismatch,
    NotHermitian,
    IndefiniteMatrix,
    PassivityViolation,
    SingularDesign,
    DesignCapExceeded,
    BlockStructureError,
    MultiplierOutsidePhiEps,
    LiftBracketFailure,
    IterationLimit,
    CoercivityFailure,
    BoundaryState,
    RestoreFailure,
    PreconditionViolation,
)
from .quadratic import QuadraticForm, combine_forms, definiteness, eval_form, hermitian_split, solve_hermitian
from .refinement import (
    Certificate,
    CertificateKind,
    RefineConfig,
    RefinementTrace,
    bound_feedback,
    certify,
    feasibility_restore,
    modify_source,
    run_restart_loop,
    subtract_compact,
)
from .scattering import (
    Design,
    DesignPartition,
    ScatteringProblem,
    build_toy_problem,
    enumerate_designs,
    power_objective,
    solve_design,
)
from .verification import (
    fd_check_suite,
    lemma4_violation_bound,
    minimax_cross_check,
    oracle_bound,
    q_membership,
    sampled_F,
)

__version__ = "0.1.0"
