"""Exception hierarchy.

Input problems derive from :class:`InputError` (CLI exit code 2); numerical
breakdowns derive from :class:`NumericalError` (exit code 3).
"""


class QSafeMLError(Exception):
    """Base class for all package errors."""


class InputError(QSafeMLError, ValueError):
    pass


class NumericalError(QSafeMLError, ArithmeticError):
    pass


# linear algebra
class InvalidMatrix(InputError):
    """Not a non-empty square matrix of finite entries."""


class NotHermitian(InputError):
    pass


class NotPSD(InputError):
    pass


class NumericalFailure(NumericalError):
    pass


# states
class InvalidMixture(InputError):
    pass


class InvalidDistribution(InputError):
    pass


class InvalidDensity(InputError):
    """Rejected density matrix.

    ``invariant`` is one of ``"shape"``, ``"finite"``, ``"hermitian"``,
    ``"psd"``, ``"trace"``; ``measured`` is the offending quantity (max
    Hermitian asymmetry, smallest eigenvalue, or trace).
    """

    def __init__(self, invariant, measured, message=None):
        self.invariant = invariant
        self.measured = measured
        super().__init__(message or f"{invariant} violated (measured {measured!r})")


class DimMismatch(InputError):
    pass


# metrics
class InsufficientData(InputError):
    pass


class ZeroVariance(InputError):
    pass


class InfiniteMetric(InputError):
    pass


# monitor
class LabelOutOfRange(InputError):
    pass


class EmptySet(InputError):
    pass


class EmptyInput(InputError):
    pass


class UnknownClass(InputError):
    pass


# simulator / classifier
class TooManyFeatures(InputError):
    pass


class EmptyDataset(InputError):
    pass


class NonFiniteLoss(NumericalError):
    pass


# data pipeline
class ParseError(InputError):
    def __init__(self, message, row=None, column=None):
        self.row = row
        self.column = column
        super().__init__(message)


class MissingLabel(InputError):
    pass


class KTooLarge(InputError):
    pass
