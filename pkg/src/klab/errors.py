"""Exception and warning types raised across klab."""


class KirchhoffError(Exception):
    """Base class for every klab failure."""


class HyperbolicityError(KirchhoffError):
    """Non-real characteristic roots or a root collision."""


class GapError(HyperbolicityError):
    pass


class DiagonalizationError(KirchhoffError):
    """Defective symbol, degenerate diagonalizer or a branch jump along a path."""


class ParameterRangeError(KirchhoffError):
    """The nonlocal term left the admissible interval [0, delta]."""


class PicardTruncationError(KirchhoffError):
    pass


class ConvergenceError(KirchhoffError):
    pass


class SignalTooSmallError(KirchhoffError):
    """A quantity to be fitted fell below the quadrature noise floor."""


class ConfigError(KirchhoffError):
    def __init__(self, key, message):
        self.key = key
        super().__init__(f"{key}: {message}")


class TruncationWarning(UserWarning):
    """Samples have not decayed before the truncation radius."""


class StabilityWarning(UserWarning):
    pass


class SingularWeightWarning(UserWarning):
    """A negative radial power meets data that do not vanish at the origin."""
