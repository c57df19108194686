"""Exception hierarchy shared by all modules."""


class HybridError(Exception):
    """Base class for every error raised by this package."""


class ParameterError(HybridError, ValueError):
    """Invalid parameter combination (rate condition, dimension mismatch, ...)."""


class InfiniteSetError(ParameterError):
    """The requested index set is infinite (layer slope alpha <= beta)."""


class UseLinearInstead(ParameterError):
    """Non-linear approximation requested where the linear scheme is already optimal."""


class PreconditionError(ParameterError):
    """A checked precondition of an operation does not hold."""


class InfeasibleError(HybridError):
    """No admissible object exists (e.g. every shift of a level is excluded)."""


class ResourceError(HybridError):
    """The computation would exceed a configured size budget."""


class FitError(HybridError, ValueError):
    """Too few usable points for a log-log regression."""


class ConfigError(ParameterError):
    """Malformed or unreadable configuration file."""
