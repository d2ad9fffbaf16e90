"""Exception hierarchy shared across the engine, store, service and CLI."""

from __future__ import annotations


class LiveiaError(Exception):
    """Base class for all errors raised by this package."""


class InvalidArgument(LiveiaError, ValueError):
    """An argument violates a documented precondition."""


class GeometryConflict(LiveiaError):
    """Scene geometry is ill-defined (overlapping sphere shells)."""


class ValidationFailure(LiveiaError):
    """A scenario invariant was violated.

    ``invariant`` names the violated rule so callers (service, CLI) can
    surface it without parsing the message.
    """

    def __init__(self, invariant: str, message: str):
        super().__init__(message)
        self.invariant = invariant


class UnknownReference(ValidationFailure):
    """A mutation or document refers to an entity that does not exist."""

    def __init__(self, message: str):
        super().__init__("unknown-reference", message)


class DslError(LiveiaError):
    """Lexical, syntax or semantic error in a scenario document."""

    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"{line}:{column}: {message}")
        self.reason = message
        self.line = line
        self.column = column


class SparkStateError(LiveiaError):
    """A resting (spark) thought was asked to do something only active
    thoughts can do."""


class NoFractureError(LiveiaError):
    """Deception routing requires a fracture with the right placement."""

    def __init__(self, placement: str):
        super().__init__(
            f"sphere has no {placement} fracture to route the beam through"
        )
        self.placement = placement


class ReflectionObstructed(LiveiaError):
    """An internal-reflection bounce path crosses a fracture."""

    def __init__(self, fracture_label: str):
        super().__init__(f"bounce path obstructed by fracture {fracture_label!r}")
        self.fracture_label = fracture_label


class UndefinedScore(LiveiaError):
    """A metric is undefined for this sphere (for example, a dark emitter)."""


class NotFound(LiveiaError):
    """A scenario id does not exist in the store."""


class StaleRevision(LiveiaError):
    """A mutation was submitted against an outdated revision."""

    def __init__(self, expected: int, got: int):
        super().__init__(f"stale revision: scenario is at {expected}, request based on {got}")
        self.expected = expected
        self.got = got
