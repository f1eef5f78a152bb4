"""Exception hierarchy shared by the package."""


class DlczQfcError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(DlczQfcError, ValueError):
    """An argument lies outside the domain where a formula is defined."""


class ValidationError(DomainError):
    """A parameter set violates one or more invariants.

    Parameters
    ----------
    violations : list of str
        Human readable description of each violated invariant.
    """

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class NoCrossoverError(DomainError):
    """Near-infrared transmission never becomes lossier than the converted route."""


class ConfigError(DlczQfcError):
    """Malformed, unknown or out-of-range configuration entry."""


class FitError(DlczQfcError):
    """A least-squares fit could not be carried out."""


class SingularFitError(FitError):
    """The curvature matrix is singular: some parameter is unidentifiable."""


class ClampWarning(UserWarning):
    """A probability was clamped into [0, 1]."""
