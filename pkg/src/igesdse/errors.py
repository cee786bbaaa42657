"""Exception types raised across the package."""


class IgesError(Exception):
    """Base class for all package errors."""


class ParseError(IgesError):
    """A configuration or case file could not be read."""


class ValidationError(IgesError):
    """A model violates one of its structural invariants."""

    def __init__(self, issues):
        self.issues = list(issues)
        super().__init__("; ".join(str(i) for i in self.issues))


class SingularModel(IgesError):
    """The stacked gas system matrix cannot be inverted reliably."""


class NonConvergence(IgesError):
    """Newton-Raphson power flow did not reach the mismatch tolerance."""


class NumericFailure(IgesError):
    """A numerical invariant broke during simulation or filtering."""

    def __init__(self, message, step=None):
        self.step = step
        if step is not None:
            message = f"step {step}: {message}"
        super().__init__(message)


class DegenerateDenominator(IgesError):
    """Measurement series equals truth, so the filter coefficient is undefined."""
