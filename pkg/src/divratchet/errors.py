"""Exception types shared across the package."""


class DivRatchetError(Exception):
    """Base class for all package errors."""


class ValidationError(DivRatchetError):
    """A parameter or configuration value violates a model constraint."""


class ParseError(DivRatchetError):
    """A config file could not be read or parsed."""


class NoConvergence(DivRatchetError):
    """A Picard iteration failed to reach its tolerance within the cap."""

    def __init__(self, message, iterations=None, update_norm=None, residual=None):
        super().__init__(message)
        self.iterations = iterations
        self.update_norm = update_norm
        self.residual = residual


class ObstacleViolation(DivRatchetError):
    """A solved rung dips below its obstacle: a scheme bug, not a data issue."""


class DomainTooSmall(DivRatchetError):
    """The switching boundary ran past 0.8*L; the x-grid must be extended."""


class RateOutOfRange(DivRatchetError):
    """A queried dividend rate lies outside [c_floor, c_bar]."""


class CacheError(DivRatchetError):
    """A surface cache file is missing, corrupt, or from a different run."""
