"""Fair and diverse subset sampling with partition-constrained DPPs."""

__version__ = "0.1.0"

from fairdpp.errors import (  # noqa: E402
    DatasetParseError,
    DegenerateKernelError,
    EnumerationTooLargeError,
    FairDPPError,
    InfeasibleQuotaError,
    InputError,
    InsufficientRankError,
)
from fairdpp.kernel import (  # noqa: E402
    FeatureMatrix,
    Kernel,
    build_gram_kernel,
    log_det_submatrix,
    spectral_decompose,
)
from fairdpp.partitions import (  # noqa: E402
    LabelDimension,
    QuotaConstraint,
    check_quota,
    effective_diversity,
    fairness_entropy,
    geometric_diversity,
)
from fairdpp.samplers import (  # noqa: E402
    sample_kdpp_exact,
    sample_kdpp_mcmc,
    sample_kidpp,
    sample_pdpp_mcmc,
    sample_uniform,
)

__all__ = [
    "DatasetParseError", "DegenerateKernelError", "EnumerationTooLargeError", "FairDPPError",
    "InfeasibleQuotaError", "InputError", "InsufficientRankError", "FeatureMatrix", "Kernel",
    "build_gram_kernel", "log_det_submatrix", "spectral_decompose", "LabelDimension",
    "QuotaConstraint", "check_quota", "effective_diversity", "fairness_entropy",
    "geometric_diversity", "sample_kdpp_exact", "sample_kdpp_mcmc", "sample_kidpp",
    "sample_pdpp_mcmc", "sample_uniform", "__version__",
]
