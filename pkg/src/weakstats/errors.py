"""Exception types shared across the package."""


class WeakStatsError(Exception):
    """Base class for all library errors."""


class ConfigError(WeakStatsError):
    """Invalid run configuration (CLI exit code 2)."""


class ValidityError(WeakStatsError):
    """Numerical-validity violation (CLI exit code 3)."""


class DimMismatch(ValidityError):
    """Operands have incompatible or unsupported dimensions."""


class NonHermitian(ValidityError):
    """Matrix fails the Hermiticity tolerance."""


class NonUnitTrace(ValidityError):
    """Density matrix trace differs from one beyond tolerance."""


class NotPositive(ValidityError):
    """Matrix has an eigenvalue below the positivity tolerance."""


class InvalidProbe(ValidityError):
    """Probe parameters violate the Heisenberg-consistency constraint."""


class SpanTooSmall(ValidityError):
    """Grid does not contain the probe state: boundary decay violated."""


class UnsupportedFunction(ValidityError):
    """No closed form is available for the requested probe average."""


class OrthogonalStates(ValidityError):
    """Pre- and post-selection are (numerically) orthogonal; canonical weak
    values diverge and interpolation formulas must be used instead."""


class DegenerateSubspace(ValidityError):
    """Pre- or post-selection is a mixture of degenerate eigenstates of the
    measured observable; the conditional statistics are indeterminate (0/0)."""


class GridResolutionInsufficient(ValidityError):
    """Requested quantity is not resolved by the current grid."""


class BeyondValidity(ValidityError):
    """Moment order exceeds the validity order of the second-order expansion."""


class ZeroQVariance(ValidityError):
    """Probe has vanishing coupling-variable variance."""
