"""Exception hierarchy.

Everything raised on bad input derives from :class:`PermConcError`, which the
CLI maps to exit status 1.
"""


class PermConcError(ValueError):
    """Base class for domain errors."""


class InvalidSizeError(PermConcError):
    pass


class EnumerationTooLargeError(PermConcError):
    pass


class DimensionError(PermConcError):
    pass


class InvalidParameterError(PermConcError):
    pass


class DegenerateMatrixError(PermConcError):
    """The centered matrix has zero energy, so a normalised ratio is undefined."""


class KernelBoundViolation(PermConcError):
    pass


class BoundUnavailableError(PermConcError):
    pass


class FamilyNotApplicableError(PermConcError):
    pass


class MalformedInputError(PermConcError):
    pass
