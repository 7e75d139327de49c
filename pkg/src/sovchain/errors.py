"""Exception hierarchy.

Every error raised on purpose by the library derives from :class:`SovChainError`,
so callers (the CLI in particular) can serialise failures by class name.
"""


class SovChainError(Exception):
    """Base class for all library errors."""


# polynomial / rational-function layer
class ZeroPolynomial(SovChainError, ValueError):
    pass


class ConstantPolynomial(SovChainError, ValueError):
    pass


class PoleEvaluation(SovChainError, ValueError):
    pass


# chain configuration and r-matrices
class InvalidChainSpec(SovChainError, ValueError):
    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field


class CoincidingSpectralParameters(SovChainError, ValueError):
    pass


# separation of variables
class DegenerateTwistRow(SovChainError, ValueError):
    pass


class DegenerateDegree(SovChainError, ValueError):
    pass


class ClusteredRoots(SovChainError, ValueError):
    pass


# flows
class StepFailure(SovChainError, RuntimeError):
    def __init__(self, message, t=None):
        super().__init__(message)
        self.t = t


class SingularityEncountered(SovChainError, RuntimeError):
    def __init__(self, message, t=None):
        super().__init__(message)
        self.t = t


class LogBranchAmbiguity(SovChainError, ValueError):
    pass


# reconstruction
class CoincidentRoots(SovChainError, ValueError):
    pass


class PoleCollision(SovChainError, ValueError):
    pass


class ZeroDenominator(SovChainError, ZeroDivisionError):
    pass


class ZeroOffDiagonal(SovChainError, ZeroDivisionError):
    pass


class BranchAmbiguity(SovChainError, ValueError):
    pass


# command line
class ConfigInvalid(SovChainError, ValueError):
    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field
