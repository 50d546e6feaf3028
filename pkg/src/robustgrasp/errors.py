"""Exception types raised across the package."""


class RobustGraspError(ValueError):
    """Base class for every error raised by this package."""


class InvalidInputError(RobustGraspError):
    pass


class DegenerateDimensionError(RobustGraspError):
    """Raised when a class count of one makes the smoothing map undefined."""


class EmptyBatchError(RobustGraspError):
    pass


class ShapeMismatchError(RobustGraspError):
    pass


class DegenerateNormalizerError(RobustGraspError):
    pass


class ConfigError(RobustGraspError):
    pass
