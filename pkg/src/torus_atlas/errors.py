"""Exception hierarchy shared by all modules."""


class TorusAtlasError(Exception):
    """Base class for every error raised by the package."""


class InvalidPointError(TorusAtlasError, ValueError):
    """A phase point violates the T*S^2 constraints."""


class IntegrationError(TorusAtlasError, RuntimeError):
    """Constraint projection inside a RATTLE step failed to converge."""

    def __init__(self, message, time=None):
        super().__init__(message)
        self.time = time


class DomainError(TorusAtlasError, ValueError):
    """A value of the energy-momentum map is not admissible for the operation."""


class QuadratureError(TorusAtlasError, RuntimeError):
    """Adaptive quadrature exhausted its interval budget."""


class EmptyDomainError(TorusAtlasError, ValueError):
    """A shrunken frequency domain has no interior left."""


class RefinementError(TorusAtlasError, RuntimeError):
    """Adaptive loop refinement exceeded its budget near the singular set."""


class SmallnessViolated(TorusAtlasError, RuntimeError):
    """Newton iteration for an invariant torus diverged or stagnated."""

    def __init__(self, message, residuals=None):
        super().__init__(message)
        self.residuals = list(residuals or [])


class GridTooCoarse(TorusAtlasError, RuntimeError):
    """Fourier tail of a torus embedding exceeds the allowed decay."""

    def __init__(self, message, suggested_n=None):
        super().__init__(message)
        self.suggested_n = suggested_n


class OverlapMismatch(TorusAtlasError, RuntimeError):
    """Two local conjugacies do not differ by a translation on a shared torus."""


class CoverageGap(TorusAtlasError, ValueError):
    """A point of the base is not covered by any bump support."""

    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


class ConfigError(TorusAtlasError, ValueError):
    """Experiment configuration failed validation."""
