"""Exception types shared across the package."""


class ParameterError(ValueError):
    """A parameter is outside its valid domain."""


class DegenerateSampleError(ParameterError):
    """A sample statistic cannot support the requested bound (e.g. zero counts)."""


class EstimationFailure(RuntimeError):
    """A bound collapsed (single-photon yield estimate hit zero); the key rate
    for the affected point must be reported as zero rather than computed."""
