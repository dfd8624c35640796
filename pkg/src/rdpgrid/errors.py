"""Error types shared across the package."""

from __future__ import annotations


class RdpgridError(Exception):
    """Base class for every error this package raises on purpose."""


class LdlfSyntaxError(RdpgridError):
    """Raised when formula text does not parse.

    Carries the 1-based line and column of the offending token and the set
    of token kinds that would have been accepted there.
    """

    def __init__(self, message: str, line: int, column: int, expected: frozenset[str]):
        self.line = line
        self.column = column
        self.expected = expected
        super().__init__(f"{message} at line {line}, column {column}"
                         + (f" (expected one of: {', '.join(sorted(expected))})" if expected else ""))


class UnknownProposition(RdpgridError):
    """A formula mentions a proposition outside the declared set."""


class ResourceLimit(RdpgridError):
    """A construction exceeded its configured state cap."""


class OutOfBounds(RdpgridError):
    """A cell lies outside the grid."""


class MutualExclusionViolation(RdpgridError):
    """Two or more transition quadruples matched the same history and action."""


class InvalidPostState(RdpgridError):
    """A sampled assignment does not describe a valid grid cell."""


class EmptyShield(RdpgridError):
    """The shield excluded every action at a reachable state."""


class NoConvergence(RdpgridError):
    """Value iteration hit its sweep cap before meeting the tolerance."""


class ConfigError(RdpgridError):
    """An experiment configuration failed validation.

    The message names the offending field by path, e.g. ``rewards[0].guard``.
    """


class UnknownPreset(RdpgridError):
    """No preset with the requested name exists."""
