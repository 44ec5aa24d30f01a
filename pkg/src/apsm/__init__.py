"""Adaptive projected subgradient method with quasi-nonexpansive constraints,
specialised to online sparse system identification."""

from .loss import (
    LossEval,
    SparsityLoss,
    WindowLoss,
    phi_subgrad,
    phi_value,
    uniform_active_weights,
    window_loss_eval,
)
from .ops import (
    AttractingOperator,
    InconsistentPriorSpec,
    LossOracle,
    compose_attracting,
    identity,
    inconsistent_prior_operator,
    project_halfspace,
    project_hyperplane,
    project_hyperslab,
    relax,
    subgradient_projection_operator,
    subgradient_projection_step,
)
from .solver import (
    DiagnosticsLog,
    FusedStepReport,
    SolverState,
    StepPolicy,
    apsm_step,
    equivalence_check,
    fused_step,
    run,
)
from .sparse import (
    Hyperslab,
    WeightedL1Ball,
    exact_ball_operator,
    make_hyperslab,
    nlms_config,
    project_weighted_l1,
    sparsity_projection_operator,
    update_weights,
)

__version__ = "0.1.0"
