"""Schatten-norm probability distances between Gaussian measures on truncated Hilbert spaces."""

from .distances import (
    ConjugatePair,
    ConstraintViolation,
    ConvergenceDiagnostics,
    DistanceReport,
    InterpolationResult,
    LowerBoundCertificate,
    WitnessEstimate,
    bogachev_diagnostics,
    conjugate,
    distance_report,
    interpolation_check,
    rho_infty_witness,
    rho_lower_bound,
    schatten_bound,
)
from .gaussian import (
    GaussianMeasure,
    SampleBatch,
    UnsupportedMeasureError,
    counterexample_measure,
    exp_neg_sqnorm,
    radial_exp_moment,
    sample,
    second_moment,
    sq_dist_samples,
)
from .operators import (
    AsymmetryError,
    BilinearForm,
    InvalidExponentError,
    NotPSDError,
    OperatorError,
    SpectralDecomposition,
    SymOperator,
    TensorVector,
    form_to_operator,
    hs_inner,
    operator_sqrt,
    operator_to_tensor,
    schatten_norm,
    spectral_decompose,
)
from .radial import (
    RadialFunction,
    RadialProfile,
    constraint_supremum,
    evaluate,
    gradient,
    growth_exponent,
    hessian_operator,
    hessian_schatten_norm,
    normalized,
    schatten_growth_profile,
)

__version__ = "0.1.0"
