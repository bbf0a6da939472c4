"""Exception types shared across the package."""


class OpeKitError(Exception):
    """Base class for all package-specific errors."""


class EmptyInput(OpeKitError, ValueError):
    """An operation received an empty sample."""


class InvalidOrder(OpeKitError, ValueError):
    """Difference order must be smaller than the coefficient dimension."""


class TooFewPoints(OpeKitError, ValueError):
    """Not enough observations to fit the requested spline."""


class SingularSystem(OpeKitError, ArithmeticError):
    """The regularized normal equations are numerically singular."""


class ShapeMismatch(OpeKitError, ValueError):
    """Array arguments disagree on unit or arm counts."""


class ZeroPropensity(OpeKitError, ValueError):
    """A chosen action carries a non-positive behavior probability."""


class ZeroWeightMass(OpeKitError, ValueError):
    """Self-normalized weighting received zero total weight."""


class MissingFullPropensities(OpeKitError, ValueError):
    """The estimator needs behavior probabilities for every arm, not just the chosen one."""


class ParseError(OpeKitError, ValueError):
    """A dataset file could not be parsed into numeric features and labels."""


class SchemaMismatch(OpeKitError, ValueError):
    """Parsed dataset dimensions disagree with the declared schema."""


class SizeTooLarge(OpeKitError, ValueError):
    """A requested evaluation sample size exceeds the available pool."""


class NonConvergenceWarning(UserWarning):
    """Iterative fitting hit its iteration cap before reaching tolerance."""
