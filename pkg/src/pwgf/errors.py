"""Exception hierarchy shared across the package.

Exit-code mapping used by the CLI: ConfigError -> 2, everything else -> 1.
"""


class PWGFError(Exception):
    """Base class for all package errors."""


class ContractViolationError(PWGFError):
    """Caller broke an interface precondition (dimension mismatch, bad index)."""


class CapabilityError(PWGFError):
    """The objective does not support the requested operation."""


class NumericalDegeneracyError(PWGFError):
    """A linear-algebra step failed (singular system, eigensolver breakdown)."""


class ConfigError(PWGFError):
    """Invalid run configuration or violated hyperparameter hypothesis."""
