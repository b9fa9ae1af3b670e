"""Exception types shared across the package."""


class InvalidInputError(ValueError):
    """Non-finite or otherwise malformed numerical input."""


class NonPositiveDensityError(ArithmeticError):
    """A signed mixture density evaluated to a non-positive value.

    Carries the offending location in ``.where`` when known.
    """

    def __init__(self, message, where=None):
        super().__init__(message)
        self.where = where


class UnsupportedOperationError(ValueError):
    """Operation not defined for this reference family or weight sign pattern."""


class UnsupportedDimensionError(ValueError):
    """Requested dimension exceeds what a generator supports."""


class DomainError(ValueError):
    """Argument outside the mathematical domain of the function."""


class EmptyGridError(ValueError):
    """Sparse-grid level too small for the dimension."""


class InsufficientBudgetError(ValueError):
    """Componentwise point allotment ran out (some floor(w_j * N) = 0)."""


class StiffnessError(RuntimeError):
    """Adaptive integrator exceeded its step budget.

    ``.t`` and ``.x`` hold the last accepted state.
    """

    def __init__(self, message, t=None, x=None):
        super().__init__(message)
        self.t = t
        self.x = x


class DimensionMismatchError(ValueError):
    """Point set and integrand (or mixture) dimensions disagree."""


class UnresolvedReferenceError(RuntimeError):
    """Reference-value oracle spread exceeded the requested tolerance.

    ``.spread`` holds the observed replicate spread.
    """

    def __init__(self, message, spread=None):
        super().__init__(message)
        self.spread = spread


class DegenerateWeightsError(RuntimeError):
    """All importance weights underflowed to zero."""


class InsufficientDataError(ValueError):
    """Too few usable points for a rate fit."""
