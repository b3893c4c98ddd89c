"""Exception hierarchy.

Validation problems (bad input, bad config) and numerical failures
(divergence, blowup) are kept apart so the CLI can map them onto
distinct exit codes.
"""


class RdodeError(Exception):
    """Base class for all package errors."""


class ValidationError(RdodeError, ValueError):
    """Input or configuration violates a documented precondition."""


class NumericalFailure(RdodeError, ArithmeticError):
    """A numerical procedure failed to produce a trustworthy result."""


class RootFindingError(NumericalFailure):
    """Simultaneous root iteration did not converge."""

    def __init__(self, message, residuals=None):
        super().__init__(message)
        self.residuals = residuals


class TailCriterionError(NumericalFailure):
    """Mode enumeration stopped before the spectral tail was certified."""


class MechanismAbsent(NumericalFailure):
    """A threshold formula has no admissible (positive) term."""


class SingularModeError(NumericalFailure):
    """A truncated Neumann mode makes the linear operator singular."""

    def __init__(self, message, mode):
        super().__init__(message)
        self.mode = mode


class BranchDomainError(NumericalFailure):
    """A nullcline branch was evaluated outside its validity domain."""


class ContractionFailed(NumericalFailure):
    """Picard iteration diverged or ran out of iterations."""


class BlowupError(NumericalFailure):
    """Time integration produced NaN or Inf."""

    def __init__(self, message, time):
        super().__init__(message)
        self.time = time


class InvariantRegionViolation(NumericalFailure):
    """A state left the invariant rectangle of the receptor model."""

    def __init__(self, message, component, location, time):
        super().__init__(message)
        self.component = component
        self.location = location
        self.time = time
