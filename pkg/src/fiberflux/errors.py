"""Exception types shared across the package."""


class FiberfluxError(Exception):
    """Base class for all package-specific errors."""


class EvaluationError(FiberfluxError):
    """A function produced a non-finite value during evaluation."""

    def __init__(self, t, value):
        self.t = t
        self.value = value
        super().__init__(f"non-finite value {value!r} at t={t!r}")


class ToleranceNotMetError(FiberfluxError):
    """Adaptive quadrature hit its panel budget before converging.

    Carries the best available estimate and an error bound.
    """

    def __init__(self, best, bound):
        self.best = best
        self.bound = bound
        super().__init__(
            f"quadrature did not converge: best={best!r}, error bound={bound!r}"
        )


class SingularFieldError(FiberfluxError):
    """The field components vanish simultaneously somewhere."""

    def __init__(self, t, message=None):
        self.t = t
        super().__init__(message or f"field components both vanish at t={t!r}")


class SingularCoreError(FiberfluxError):
    """Solid-torus coefficient has nonzero radial derivative at the core."""


class UnsewableError(FiberfluxError):
    """Boundary jets cannot be joined by a nonvanishing-Wronskian pair."""


class DegenerateJetError(FiberfluxError):
    """A boundary jet has zero magnitude."""


class NotTorusAutomorphismError(FiberfluxError):
    """Integer matrix does not have determinant +-1."""


class NotAKnotError(FiberfluxError):
    """Slope pair is not coprime, so the curve is a multi-component link."""


class EpsilonTooLargeError(FiberfluxError):
    """Flow-window epsilon allows a full wrap around the x1 circle."""


class IncompleteAssemblyError(FiberfluxError):
    """Assembly is missing data required for the requested computation."""


class ConfigError(FiberfluxError):
    """Experiment configuration failed to parse or validate."""
