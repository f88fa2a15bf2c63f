class PIBError(Exception):
    """Base exception for numerical and domain failures."""
    pass


class InvalidDistribution(PIBError):
    """Raised when a table is not a valid probability distribution."""
    pass


class NegativeProbability(InvalidDistribution):
    """Raised when a probability table has a negative entry."""
    pass


class NotNormalized(InvalidDistribution):
    """Raised when a probability table deviates from unit mass beyond tolerance."""
    pass


class EmptyAlphabet(PIBError):
    """Raised when an alphabet is too small to define the requested object."""
    pass


class UnknownWorld(PIBError, KeyError):
    """Raised when a built-in world name is not registered."""
    pass


class DimensionMismatch(PIBError):
    """Raised when table shapes disagree."""
    pass


class SizeCapExceeded(PIBError):
    """Raised when an exact joint table would exceed the configured cell cap."""
    pass


class ZeroProbabilityDataset(PIBError):
    """Raised when conditioning on a dataset of zero probability."""
    pass


class SupportViolation(PIBError):
    """Raised when a variational table has zero mass where the expectation has mass."""
    pass


class BetaOutOfRange(PIBError):
    """Raised when a trade-off multiplier is outside the admissible range."""
    pass


class InvalidGrid(PIBError):
    """Raised when a beta grid is empty or not strictly increasing."""
    pass


class NumericalFailure(PIBError):
    """Raised when a computed quantity violates a hard numerical invariant."""
    pass


class NonConvergence(PIBError):
    """Raised when an iteration exhausts its budget and convergence is required."""
    pass


class MLEUndefined(PIBError):
    """Raised when the maximum likelihood estimate does not exist (no data)."""
    pass


class Divergence(PIBError):
    """Raised when gradient descent keeps increasing the objective."""
    pass


class InvalidSetting(PIBError):
    """Raised when a solver or optimiser setting is outside its admissible range."""
    pass
