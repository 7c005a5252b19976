"""funcrate: strong-L2 rates for Riemann-sum approximation of integral
functionals of Markov processes, with certified theoretical bounds and
coupled-path Monte Carlo verification."""

from .errors import (
    ConfigError,
    DegenerateFit,
    FuncrateError,
    GammaTooLarge,
    HolderViolation,
    InfiniteMoment,
    NonFinite,
    NotNested,
    UndefinedAtBoundary,
)
from .funcs import (
    ClippedPower,
    Constant,
    HolderFunction,
    Linear,
    PowerAbs,
    Sine,
    empirical_holder_check,
    evaluate,
)
from .model import (
    BrownianScaled,
    DensityBoundCertificate,
    EulerDiffusion,
    GaussianKernel,
    NotCertified,
    ProcessModel,
    StableKernel,
    SymmetricStable,
    certificate_for,
    q_moment,
    transition_density,
)
from .simulate import (
    GridSpec,
    PathBatch,
    dump_paths,
    load_paths,
    path_stream,
    sample_increment,
    simulate_path,
    subsample,
)
from .estimate import (
    ErrorSummary,
    MomentDiagnostic,
    RateRow,
    moment_diagnostic,
    mse_curve,
    reference_integral,
    riemann_sum,
)
from .theory import (
    FitResult,
    TheoryBound,
    bm_linear_mse_oracle,
    c_gamma_alpha,
    d_constant,
    export_bound_curve,
    fit_rate,
    log_term_maximum,
    theoretical_bound,
)

__version__ = "0.1.0"
