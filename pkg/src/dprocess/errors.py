"""Exception types shared across the package.

The CLI maps these onto distinct exit codes, so library code should raise
the most specific type that applies.
"""


class ParameterError(ValueError):
    """Invalid user-supplied parameter (bad n/d/seed/flag combination)."""


class DomainError(ValueError):
    """Input outside a function's mathematical domain (e.g. t >= d/2)."""


class GuardError(ValueError):
    """Instance exceeds a hard safety guard (e.g. enumeration size cap)."""


class ProcessStuckError(RuntimeError):
    """step() called on a process that has already frozen."""


class ConfigMismatchError(RuntimeError):
    """Resume attempted against a results file with a different config."""


class DegenerateSampleError(ValueError):
    """Statistic undefined for this sample (constant values, L=0, empty)."""


class TailWindowError(RuntimeError):
    """Run froze before the requested tail window opened."""
