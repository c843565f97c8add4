"""Exception hierarchy shared by every module."""


class AdlReqError(Exception):
    """Base class for all package errors."""


class DomainError(AdlReqError, ValueError):
    """An argument lies outside the domain an operation is defined on."""


class GeometryError(DomainError):
    """Segment geometry is not physically valid."""


class ParseError(AdlReqError, ValueError):
    """An input file does not match its schema."""

    def __init__(self, message, row=None):
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)
        self.row = row


class NonRegressableError(DomainError):
    """Torques of this combination could not be described by linear models."""


class CoincidentAxesError(DomainError):
    """Two actuation axes are (nearly) parallel, the mixing matrix is singular."""


class PercentileRefusal(DomainError):
    """Quartile torques of components cannot be summed to composite quartiles."""


class WrongOperationError(AdlReqError, TypeError):
    """The object type must be handled by a different operation."""


class ConfigError(AdlReqError, ValueError):
    """Configuration failed schema validation."""
