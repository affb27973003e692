"""Exception hierarchy shared by every module of the package."""


class SimplexShotError(Exception):
    """Base class for all package errors."""


class InvalidInputError(SimplexShotError, ValueError):
    """An argument violates a documented precondition."""


class DimensionError(SimplexShotError, ValueError):
    """Array shapes do not conform."""


class SolverError(SimplexShotError, RuntimeError):
    """Numerical failure inside the alternating minimization.

    ``diagnostics`` carries whatever the failing step could report
    (condition numbers, the offending step index, ...).
    """

    def __init__(self, message, **diagnostics):
        super().__init__(message)
        self.diagnostics = diagnostics


class FeatureFileError(SimplexShotError):
    """A feature file could not be parsed."""


class BadMagicError(FeatureFileError):
    pass


class TruncatedFileError(FeatureFileError):
    pass


class DimensionMismatchError(FeatureFileError):
    pass


class DuplicateImageError(FeatureFileError):
    pass
