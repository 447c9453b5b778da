"""Continuous-domain 1-D linear inverse problems with spline solutions.

Reconstructs a signal on [0, T] from finitely many linear measurements
under either a quadratic (L2) or a sparsity-promoting (generalized-TV)
regularizer built on a differential operator.  Both solution routes are
exact finite-dimensional parameterizations: a kernel expansion solved by
one symmetric block system, and a causal-atom dictionary solved by FISTA
plus a simplex refinement to an extreme point (or by a pure interpolation
linear program).
"""
from .measurements import (
    MeasurementKind,
    MeasurementModel,
    QuadratureError,
    WellPosednessError,
    assemble_gtv,
    assemble_tikhonov,
    ideal_sampling,
    measure,
    windowed_fourier,
)
from .operators import (
    DERIVATIVE,
    SECOND_DERIVATIVE,
    OperatorKind,
    OperatorMismatchError,
    OperatorSpec,
    apply_L_to_spline,
    green_L,
    green_LstarL,
    nullspace_basis,
    operator_from_name,
)
from .pipeline import (
    GtvConfig,
    GtvDiagnostics,
    GtvMode,
    ReconstructionError,
    reconstruct_gtv,
)
from .lasso import (
    LassoProblem,
    LassoResult,
    build_projector,
    fista,
    power_iteration_lipschitz,
    recover_b,
)
from .signals import (
    GaussianWhite,
    ImpulsivePoisson,
    ProcessConfig,
    add_noise,
    generate_gaussian_process,
    generate_sparse_process,
    project_weights,
)
from .simplex import LpProblem, LpResult, LpStatus, refine_extreme_point, solve_l1_lp
from .splines import (
    DenseSignal,
    SplineSignal,
    canonicalize,
    eval_spline,
    gtv_seminorm,
    sparsity_index,
)
from .tikhonov import TikhonovSolution, eval_tikhonov, solve_tikhonov
from .experiments import (
    ExperimentConfig,
    ExperimentResult,
    reconstruction_snr,
    run_table1,
)

__version__ = "0.1.0"
