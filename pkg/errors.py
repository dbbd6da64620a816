"""
Exception hierarchy for exonet
Every module raises one of these so the CLI can map failures to exit codes
"""


class ExonetError(Exception):
    """Base class for all library errors"""


class DomainError(ExonetError, ValueError):
    """Argument outside the domain of a function (e.g. log_gamma(x <= 0))"""


class DimensionError(ExonetError, ValueError):
    """Incompatible array shapes"""


class FactorizationError(ExonetError, ArithmeticError):
    """Cholesky factorization failed; `minor` is the 1-based order of the failing leading minor"""

    def __init__(self, message, minor=None):
        super().__init__(message)
        self.minor = minor


class ValidationError(ExonetError, ValueError):
    """One or more invariants violated; all messages are kept in `problems`"""

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__('; '.join(self.problems))


class CycleError(ExonetError, ValueError):
    """Graph is not acyclic; `cycle` lists the nodes of one directed cycle"""

    def __init__(self, cycle):
        self.cycle = list(cycle)
        path = ' -> '.join(str(node) for node in self.cycle + self.cycle[:1])
        super().__init__(f"cycle detected: {path}")


class UndefinedMeanError(ExonetError, ArithmeticError):
    """Inverse-gamma mean requested with shape <= 1"""


class UsageError(ExonetError):
    """Bad command-line usage (exit code 2)"""
