"""Exception hierarchy shared by all solvers."""


class MarqError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(MarqError):
    """A model configuration file could not be parsed.

    The message carries the JSON path of the offending field.
    """


class SpecValidationError(MarqError):
    """A model spec violates one or more invariants."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class NonStochastic(MarqError):
    """Transition matrix rows do not sum to one (or entries out of [0,1])."""


class NonIrreducible(MarqError):
    """The background chain is not irreducible."""


class PoleOnOrbit(MarqError):
    """A shift-map iterate fell within 1e-9 of a registered pole."""

    def __init__(self, point, pole):
        self.point = point
        self.pole = pole
        super().__init__(f"orbit point {point} collides with pole {pole}")


class NoConvergence(MarqError):
    """Truncated series failed to meet tolerance within max_terms."""


class SingularSystem(MarqError):
    """A boundary linear system is numerically singular."""


class RootFindingFailure(MarqError):
    """Polynomial root extraction failed or produced non-finite roots."""


class AmbiguousRoot(MarqError):
    """A denominator zero sits within 1e-9 of the imaginary axis."""


class DegenerateSpectrum(MarqError):
    """Two eigenvalues coincide where the method requires them distinct."""


class DegenerateVariance(MarqError):
    """A correlation denominator is not strictly positive."""


class InvalidBoundary(MarqError):
    """A resolved boundary vector failed its a-posteriori validation."""


class UnsupportedSampling(MarqError):
    """No realizable sampler exists for the requested dependence structure."""
