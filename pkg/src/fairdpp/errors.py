"""Exception hierarchy shared by all fairdpp modules."""


class FairDPPError(Exception):
    """Base class for library errors."""


class InputError(FairDPPError, ValueError):
    """Invalid arguments or malformed input data."""


class DatasetParseError(InputError):
    """A features or labels file could not be parsed."""


class InfeasibleQuotaError(InputError):
    """A quota asks for more items than a part holds."""


class InsufficientRankError(FairDPPError):
    """The kernel (or a block of it) has rank below the requested sample size."""


class DegenerateKernelError(FairDPPError):
    """Every reachable quota-feasible subset has a singular kernel submatrix."""


class EnumerationTooLargeError(FairDPPError):
    """Exact enumeration was asked for more subsets than the configured cap."""
