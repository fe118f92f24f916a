"""Exception hierarchy shared by every module of the toolkit."""


class CondCenterError(Exception):
    """Base class for all toolkit errors."""


# measure
class AsymmetricMeasureError(CondCenterError, ValueError):
    pass


class MissingEndpointsError(CondCenterError, ValueError):
    pass


class DegenerateMeasureError(CondCenterError, ValueError):
    pass


class BadWeightsError(CondCenterError, ValueError):
    pass


class NonFiniteTiltError(CondCenterError, ValueError):
    pass


# coupling
class InfeasibleDegreeError(CondCenterError, ValueError):
    pass


class PairingFailedError(CondCenterError, RuntimeError):
    pass


class BadProbabilityError(CondCenterError, ValueError):
    pass


class OddSizeError(CondCenterError, ValueError):
    pass


class BadDistributionError(CondCenterError, ValueError):
    pass


# models
class UnsupportedTemplateError(CondCenterError, ValueError):
    pass


class RepeatedIndexError(CondCenterError, ValueError):
    pass


class SameIndexError(CondCenterError, ValueError):
    pass


class SamePairError(CondCenterError, ValueError):
    pass


class BadFloorError(CondCenterError, ValueError):
    pass


# estimation
class NoSignChangeError(CondCenterError, RuntimeError):
    pass


class SingularJacobianError(CondCenterError, RuntimeError):
    pass


class MaxIterationsError(CondCenterError, RuntimeError):
    pass


class BoundaryHitError(CondCenterError, RuntimeError):
    pass


class SingularHessianError(CondCenterError, RuntimeError):
    pass


# theory
class NegativeRError(CondCenterError, ValueError):
    pass


class NoConvergenceError(CondCenterError, RuntimeError):
    pass


class NoRootError(CondCenterError, RuntimeError):
    pass


class DegenerateTError(CondCenterError, ValueError):
    pass


class NotStationaryError(CondCenterError, ValueError):
    pass


class SingularAError(CondCenterError, RuntimeError):
    pass


class NotSubcriticalError(CondCenterError, ValueError):
    pass


# oracle / harness
class TooLargeError(CondCenterError, ValueError):
    pass


class IndexMismatchError(CondCenterError, ValueError):
    pass


class OverlappingSetsError(CondCenterError, ValueError):
    pass


class TooFewError(CondCenterError, ValueError):
    pass


class LevelsTooCloseError(CondCenterError, ValueError):
    pass


class ConfigError(CondCenterError, ValueError):
    """Invalid or unknown experiment configuration content."""


class ReplicationError(CondCenterError, RuntimeError):
    """A module error raised inside one replication, tagged with its index."""

    def __init__(self, index: int, cause: BaseException):
        super().__init__(f"replication {index}: {type(cause).__name__}: {cause}")
        self.index = index
        self.cause = cause
