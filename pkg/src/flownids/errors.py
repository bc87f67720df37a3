"""Exception hierarchy shared across the package.

The CLI maps these onto its exit-code contract: usage errors exit 1,
data errors exit 2, numeric failures exit 3.
"""


class FlowNidsError(Exception):
    """Base class for every error this package raises deliberately."""


class UsageError(FlowNidsError):
    """Bad command-line usage or an inconsistent run configuration."""


class DataError(FlowNidsError):
    """Malformed, inconsistent, or missing input data or container files."""


class NumericError(FlowNidsError):
    """Non-finite values or numeric divergence during training."""
