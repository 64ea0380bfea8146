"""Exception hierarchy for samfit.

All errors derive from :class:`SamfitError` (a ``ValueError``) so callers can
catch input problems in one place. :class:`NumericDegeneracy` marks failures
where the data are valid but the estimator is undefined (zero noise level).
"""


class SamfitError(ValueError):
    """Base class for all samfit input errors."""


class NumericDegeneracy(SamfitError):
    """Valid input on which a penalty or estimate degenerates."""


# lattice
class EvenGridSizeError(SamfitError):
    pass


class GridTooSmallError(SamfitError):
    pass


class NonPositiveSnrError(SamfitError):
    pass


class UnequalGridSizesForSnrError(SamfitError):
    pass


class LatticeTooLargeError(SamfitError):
    pass


# fourier
class EvenLengthError(SamfitError):
    pass


class NonFiniteInputError(SamfitError):
    pass


class CutOutOfRangeError(SamfitError):
    pass


# map estimator
class KOutOfRangeError(SamfitError):
    pass


class NonPositiveTau2Error(NumericDegeneracy):
    pass


class D0OutOfRangeError(SamfitError):
    pass


class EmptyPoolError(SamfitError):
    pass


class ZeroTauError(NumericDegeneracy):
    pass


class InconsistentCandidateError(SamfitError):
    pass


class InvalidGammaError(SamfitError):
    pass


class InvalidQError(SamfitError):
    pass


# spam
class NegativeLambdaError(SamfitError):
    pass


class EmptyGridError(SamfitError):
    pass


# simulation
class BadIdError(SamfitError):
    pass


class ZeroVarianceError(SamfitError):
    pass


class DesignMismatchError(SamfitError):
    pass


class SearchSpaceTooLargeError(SamfitError):
    pass
