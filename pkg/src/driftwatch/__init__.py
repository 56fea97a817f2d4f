"""Streaming anomaly detection for univariate and multivariate data.

Univariate streams go through the probability-weighted moving-average
detector in ``pewma``; multivariate streams through the online Gaussian
model in ``detector``, whose covariance factor and inverse are maintained
incrementally by the kernels in ``linalg``. ``harness`` holds the metric,
the experiment protocols, and the synthetic generators; ``cli`` exposes
everything as the ``driftwatch`` command.
"""

from .errors import (
    DegenerateDirectionError,
    DegenerateTruthError,
    InsufficientDataError,
    InvalidFactorError,
    InvalidInputError,
    NotPositiveDefiniteError,
    SingularUpdateError,
    UninitializedStateError,
)
from .linalg import (
    CovBlend,
    cholesky_factorize,
    factor_rank_one_update,
    inverse_from_factor,
    log_det_from_factor,
    sherman_morrison_update,
    tri_solve_lower,
)
from .pewma import (
    PewmaParams,
    PewmaState,
    ScoredPoint,
    ewma_step,
    pewma_init,
    pewma_step,
)
from .detector import (
    GaussianModel,
    MultiVerdict,
    auto_tau,
    derive_blend,
    fit_static,
    load_model,
    save_model,
    score,
    update_online,
)
from .harness import (
    AadReport,
    SegmentPlan,
    ShiftSpec,
    aad,
    gen_random_stream,
    gen_shift_stream,
    run_experiment_1,
    run_experiment_2,
)

__version__ = "0.1.0"
