"""Exception taxonomy shared across the package.

The CLI maps these onto exit codes: usage problems exit 2, math preconditions
exit 3, inequality violations exit 4.
"""


class DomainError(ValueError):
    """A parameter lies outside the mathematical domain of an operation."""


class PreconditionError(RuntimeError):
    """A density fails a precondition (monotonicity, normalization, curvature)."""


class CapabilityError(RuntimeError):
    """The density lacks a hook (derivative, cdf) the operation needs."""


class TransformChainError(PreconditionError):
    """A transform chain failed at a known step."""

    def __init__(self, index, message):
        super().__init__(f"chain step {index}: {message}")
        self.index = index


class IntegrandError(RuntimeError):
    """The integrand produced NaN; carries the offending abscissa."""


class UnsupportedCaseError(NotImplementedError):
    """A documented out-of-scope case (for example two exponential layers)."""
