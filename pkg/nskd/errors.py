"""
Errors Module - Exception Hierarchy for nskd

Every failure raised by the library derives from NskdError so the command
line front end can map it to exit status 1 with a single except clause.
"""


class NskdError(Exception):
    """Base class for all library errors."""


class DimensionError(NskdError, ValueError):
    """Vector lengths or pair counts do not agree."""


class DomainError(NskdError, ValueError):
    """A parameter lies outside the range an operation is defined for."""


class PreconditionError(NskdError, ValueError):
    """An input object violates a documented precondition (e.g. it signals)."""


class SolverError(NskdError):
    """The simplex engine could not produce an optimum."""


class InfeasibleError(SolverError):
    """The linear program has no feasible point."""


class UnboundedError(SolverError):
    """The linear program objective is unbounded above."""
