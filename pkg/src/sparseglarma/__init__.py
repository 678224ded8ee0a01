"""Sparse variable selection for Poisson GLARMA count time series."""

__version__ = "0.1.0"

from .errors import (  # noqa: F401
    ConvergenceError,
    DegenerateCounts,
    DegenerateProblem,
    EigenFailure,
    EmptyGrid,
    EmptyTruth,
    GlarmaError,
    InputError,
    LikelihoodOverflow,
    NoConvergence,
    NotIdentifiable,
    NumericalError,
    OverflowGuard,
    SingularDesign,
    SingularHessian,
)
from .model import (  # noqa: F401
    Dataset,
    FilterOutput,
    GlarmaParams,
    W_CLAMP,
    forward_filter,
    log_likelihood,
    simulate,
)
from .derivatives import (  # noqa: F401
    PredictorDerivatives,
    hessian,
    predictor_derivatives,
    score,
    score_and_hessian,
)
from .mle import (  # noqa: F401
    FitResult,
    glm_poisson_init,
    newton_beta_fit,
    newton_raphson_fit,
    profile_gamma1_fit,
)
from .sparse import (  # noqa: F401
    LassoPath,
    QuadraticProblem,
    build_quadratic,
    kkt_gap,
    lambda_grid,
    lasso_solve,
    solve_at_lambda,
)
from .stability import SelectionReport, stability_select  # noqa: F401
from .pipeline import (  # noqa: F401
    PipelineConfig,
    PipelineResult,
    run_pipeline,
)
from .experiments import (  # noqa: F401
    ExperimentConfig,
    RocCurve,
    make_covariates,
    roc_from_path,
    run_scenario,
)
