"""Safe feature screening and exact branch-and-bound for sparse logistic regression."""

from ._jit import USING_NUMBA
from .bench import RunRecord, SweepConfig, aggregate, run_sweep, write_outputs
from .bnb import (
    BnbConfig,
    Branching,
    MipSolution,
    MipStatus,
    NodeSelection,
    brute_force,
    integrality_gap,
    solve_bnb,
    solve_screened,
)
from .data import (
    CsvOptions,
    Dataset,
    SyntheticConfig,
    add_intercept_column,
    gen_synthetic,
    load_dense_csv,
    load_sparse_text,
    standardize_columns,
    write_dense_csv,
)
from .errors import (
    SlsError,
    InvalidDataset,
    InvalidCovariance,
    ParseError,
    DimensionMismatch,
    InfeasibleFixings,
    NonConvergedRelaxation,
    InternalContradiction,
    InvalidK,
    BoundViolation,
    ProblemTooLarge,
    ConfigError,
)
from .loss import LossConvention, curvature_bound, loss_gradient, loss_value
from .relaxations import (
    Fix,
    ProblemKind,
    ProblemSpec,
    RelaxationSolution,
    SolverConfig,
    SolverKind,
    StepRule,
    VariableFixings,
    bigm_objective,
    choose_bigm,
    optimal_z_card,
    optimal_z_reg,
    perspective_objective,
    perspective_penalty_prox,
    ridge_logistic,
    solve_bigm_relaxation,
    solve_card_relaxation,
    solve_reg_relaxation,
    solve_relaxation,
)
from .screening import (
    EPS_SAFE,
    DualCertificate,
    ScreenReport,
    ScreenResult,
    ScreenStatus,
    UpperBound,
    apply_rules,
    dual_certificate,
    round_upper_bound,
    screen,
    screen_card,
    screen_reg,
)

__version__ = "0.1.0"
