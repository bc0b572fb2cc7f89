"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain an operation is defined on."""


class QuadratureError(ArithmeticError):
    """A numerical integration failed to reach its tolerance.

    ``where`` carries whatever identifies the failure: a Legendre index for
    projections, the worst subinterval for adaptive rules.
    """

    def __init__(self, message, where=None):
        super().__init__(message)
        self.where = where
