"""Exception hierarchy.

``NumericalError`` subclasses map to CLI exit code 3, ``ConfigError`` to 2.
"""


class PickandsError(Exception):
    pass


class ConfigError(PickandsError, ValueError):
    pass


class GridOverflow(ConfigError):
    """Grid would exceed the configured point cap."""


class NumericalError(PickandsError, ArithmeticError):
    pass


class EmbeddingNotPSD(NumericalError):
    """Circulant embedding has eigenvalues below the clipping tolerance."""


class NotPSD(NumericalError):
    """Covariance matrix is not positive semidefinite beyond jitter."""


class DivergenceSuspected(NumericalError):
    pass


class NonIntegrable(NumericalError):
    pass


class InvalidKernel(NumericalError, ValueError):
    pass


class FamilyInvalid(NumericalError, ValueError):
    pass


class SpawnCapExceeded(NumericalError):
    def __init__(self, message, sample=None):
        super().__init__(message)
        self.sample = sample
