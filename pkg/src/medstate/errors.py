"""Exception types raised across the package."""


class MedStateError(Exception):
    """Base class for all package errors."""


class TooShort(MedStateError, ValueError):
    pass


class EdgeAboveNyquist(MedStateError, ValueError):
    pass


class NotSymmetric(MedStateError, ValueError):
    pass


class NoConvergence(MedStateError, ArithmeticError):
    pass


class NotPositiveDefinite(MedStateError, ArithmeticError):
    pass


class EmptyClass(MedStateError, ValueError):
    pass


class DegenerateEpoch(MedStateError, ValueError):
    pass


class RankDeficient(MedStateError, ArithmeticError):
    pass


class SingleClass(MedStateError, ValueError):
    pass


class DimensionMismatch(MedStateError, ValueError):
    pass


class LengthNotDivisible(MedStateError, ValueError):
    pass


class NotDivisible(MedStateError, ValueError):
    pass


class KOutOfRange(MedStateError, ValueError):
    pass


class UnknownEpoch(MedStateError, KeyError):
    pass


class NonFiniteLoss(MedStateError, ArithmeticError):
    pass


class TooFewEpochs(MedStateError, ValueError):
    pass


class TooFewSubjects(MedStateError, ValueError):
    pass


class InvalidParams(MedStateError, ValueError):
    pass


class FormatError(MedStateError, ValueError):
    """Malformed EEGB file, manifest or config."""
