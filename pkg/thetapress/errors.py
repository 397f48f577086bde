"""
Exception hierarchy shared by the library and the CLI.

The CLI maps these onto process exit codes (see thetapress.cli).
"""

from typing import Optional


class ThetaPressError(Exception):
    """Base class for all errors raised by thetapress"""


class InvalidSystem(ThetaPressError, ValueError):
    """A system definition violates a metric, map or potential invariant"""


class InvalidCover(ThetaPressError, ValueError):
    """An open cover is empty, has empty members or does not cover every point"""


class InvalidMeasure(ThetaPressError, ValueError):
    """Measure weights are negative or do not sum to one"""


class CandidateExplosion(ThetaPressError, RuntimeError):
    """Candidate generation would exceed the configured limit"""

    def __init__(self, count: int, limit: int, what: str = "candidates"):
        self.count = count
        self.limit = limit
        self.what = what
        super().__init__(f"{what}: {count} exceeds configured limit {limit}")

    def __reduce__(self):
        return type(self), (self.count, self.limit, self.what)


class Infeasible(ThetaPressError, RuntimeError):
    """The union of the candidates does not cover the universe"""

    def __init__(self, missing: frozenset[int]):
        self.missing = missing
        shown = sorted(missing)[:8]
        super().__init__(f"candidates do not cover points {shown}{'...' if len(missing) > 8 else ''}")

    def __reduce__(self):
        return type(self), (self.missing,)


class BracketFailure(ThetaPressError, RuntimeError):
    """No sign change of log M(alpha) could be bracketed"""


class NotMonotone(ThetaPressError, RuntimeError):
    """Exactly solved exponents decrease where the windows are nested"""


class NotSemiconjugate(ThetaPressError, ValueError):
    """A point map does not intertwine the two map sequences"""


class InvalidInvariance(ThetaPressError, ValueError):
    """A subset fails the forward/backward invariance precondition"""


class ConfigError(ThetaPressError, ValueError):
    """A configuration file cannot be parsed or validated"""

    def __init__(self, message: str, line: Optional[int] = None, column: Optional[int] = None):
        self.line = line
        self.column = column
        self.detail = message
        if line is not None:
            message = f"{message} (line {line}, column {column})"
        super().__init__(message)

    def __reduce__(self):
        return type(self), (self.detail, self.line, self.column)
