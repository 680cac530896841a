"""Exception taxonomy for the simulator."""


class SimulatorError(Exception):
    """Base class for all simulator errors."""


class UnknownPath(SimulatorError):
    pass


class UnknownBeam(SimulatorError):
    pass


class UnknownPhoton(SimulatorError):
    pass


class NonUnitaryMatrix(SimulatorError):
    pass


class MultiPhotonCollision(SimulatorError):
    """Two photons were routed into the same interferometer arm or mode."""


class PreconditionViolation(SimulatorError):
    pass


class CutoffTooSmall(SimulatorError):
    """A Fock-space truncation leaves more probability in the tail than allowed."""


class BinsOverlap(SimulatorError):
    """Adjacent detector Poisson peaks are not separated well enough to bin."""


class NumericalDegeneracy(SimulatorError):
    """An eigenvalue degeneracy prevented a stable canonical decomposition."""


class ShapeMismatch(SimulatorError):
    pass


class ParseError(SimulatorError):
    """Malformed circuit document.  Carries an optional location string."""

    def __init__(self, message, location=None):
        super().__init__(message if location is None else f"{location}: {message}")
        self.location = location


class ValidationError(SimulatorError):
    """Well-formed circuit document with inconsistent content."""

    def __init__(self, message, location=None):
        super().__init__(message if location is None else f"{location}: {message}")
        self.location = location
