"""Toolkit for conjugate-symmetric H-infinity Gaussian processes."""

__version__ = "0.1.0"

from hinfgp.errors import *  # noqa: F401,F403
from hinfgp.kernels import (  # noqa: F401
    ComplexKernel,
    CozineKernel,
    GeometricKernel,
    SequenceSpec,
    StationaryKernel,
    SumKernel,
    cozine_kernel,
    decompose_derivatives,
    geometric_kernel,
    kernel_from_dict,
    stationary_kernel,
    sum_kernel,
)
from hinfgp.excursion import (  # noqa: F401
    ExcursionQuery,
    ExcursionReport,
    MultiplierGrid,
    excursion_bound,
    expected_upcrossings,
    iqc_transform,
    start_violation,
)
from hinfgp.regression import (  # noqa: F401
    Dataset,
    confidence_ellipsoid,
    fit_hyperparameters,
    log_marginal_likelihood,
    predict_strict,
    predict_wide,
)
