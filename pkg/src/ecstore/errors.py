"""Exception types shared across the package."""


class EcStoreError(Exception):
    """Base class for all package errors."""


class ValidationError(EcStoreError, ValueError):
    """Raised when a workload or cluster breaks an invariant.

    ``violations`` holds one human-readable message per broken invariant.
    """

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class InstabilityError(EcStoreError, ValueError):
    """Raised when a queue has utilization at or above one."""

    def __init__(self, message, utilization=None):
        self.utilization = utilization
        super().__init__(message)


class BoundInfeasible(EcStoreError, ValueError):
    """Raised when a bound's validity condition fails.

    ``condition`` is a short description of the violated inequality.
    """

    def __init__(self, condition, limit=None):
        self.condition = condition
        self.limit = limit
        msg = condition if limit is None else f"{condition} (bound invalid beyond lambda*={limit:.6g})"
        super().__init__(msg)


class InfeasibleTError(EcStoreError, ValueError):
    """Raised when an auxiliary MGF parameter t lies outside its feasible interval."""

    def __init__(self, message, server=None):
        self.server = server
        super().__init__(message)


class DomainError(EcStoreError, ValueError):
    """Raised when an MGF is evaluated outside its domain."""


class SeriesDivergence(EcStoreError, ArithmeticError):
    """Raised when a series fails to converge within the term cap."""

    def __init__(self, message, partial_sum, terms):
        self.partial_sum = partial_sum
        self.terms = terms
        super().__init__(f"{message} (partial sum {partial_sum!r} after {terms} terms)")


class QuadratureError(EcStoreError, ArithmeticError):
    """Raised when adaptive quadrature does not reach its tolerance."""


class InfeasibleProjection(EcStoreError, ValueError):
    """Raised when the access-probability polytope is empty."""


class SolverError(EcStoreError, ArithmeticError):
    """Raised when an iterative matrix solver does not converge."""

    def __init__(self, message, spectral_radius=None):
        self.spectral_radius = spectral_radius
        super().__init__(message)
