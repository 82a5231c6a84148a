"""Exception types raised across the package.

Validation problems derive from :class:`ValidationError` (a ``ValueError``);
numerical breakdowns derive from :class:`NumericalFailure`.  The CLI maps the
first family to exit status 1 and the second to exit status 2.
"""


class ValidationError(ValueError):
    """Input violates a documented precondition."""


class NumericalFailure(ArithmeticError):
    """A numerical routine could not reach its target."""


class ArbitrageError(ValidationError):
    pass


class InvalidMeasure(ValidationError):
    pass


class Underdetermined(ValidationError):
    pass


class CapExceeded(ValidationError):
    def __init__(self, required: int, cap: int):
        super().__init__(
            f"lattice needs {required} path-steps, above the cap of {cap}; "
            "raise the cap (--path-cap) or use a smaller lattice"
        )
        self.required = required
        self.cap = cap


class ClassMismatch(ValidationError):
    pass


class UnreachableState(ValidationError):
    pass


class NotEquivalent(ValidationError):
    pass


class IncompleteMarket(ValidationError):
    pass


class BracketFailure(NumericalFailure):
    pass


class QuadratureDivergence(NumericalFailure):
    pass


class DegenerateVariance(UserWarning):
    """A walk component has zero variance; the scaling falls back to sigma=1."""
