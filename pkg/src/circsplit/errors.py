"""Exception types raised across the package."""


class CircSplitError(Exception):
    """Base class for all package errors."""


class InvalidGraph(CircSplitError, ValueError):
    pass


class EmptyGenerators(InvalidGraph):
    pass


class DisconnectedGraph(InvalidGraph):
    pass


class SelfInverseGenerator(InvalidGraph):
    pass


class GeneratorNotInGraph(CircSplitError, KeyError):
    pass


class InvalidSpec(CircSplitError, ValueError):
    pass


class InvalidThresholds(CircSplitError, ValueError):
    pass


class RestartCapExceeded(CircSplitError, RuntimeError):
    pass


class QuadratureNonConvergence(CircSplitError, RuntimeError):
    pass


class Infeasible(CircSplitError, RuntimeError):
    """Requested computation exceeds a configured size budget."""


class EnumerationCapExceeded(Infeasible):
    pass


class ThetaNotInTheta2(CircSplitError, ValueError):
    pass
