"""Exception types raised by the numerical pipeline."""


class NumericalError(RuntimeError):
    """Base class for failures of a numerical stage (CLI exit code 3)."""


class IntegrationError(NumericalError):
    def __init__(self, message, energy=None):
        super().__init__(message if energy is None else f"{message} (E={energy!r})")
        self.energy = energy


class ResolutionError(NumericalError):
    """A scan grid was too coarse to resolve all roots."""


class BranchPointProximityError(NumericalError):
    """Evaluation requested within edge tolerance of a square-root branch point."""


class DegenerateFloquetError(NumericalError):
    """Floquet multipliers coincide (band edge); Bloch solutions are not independent."""


class WindowError(NumericalError):
    """The energy violates the admissible window E-1 <= E1-d, E1+d < E+1 < E2-d, E2 < E3."""


class CutCrossingError(NumericalError):
    """A default continuation path crosses a branch cut."""


class ContinuationError(NumericalError):
    """Step refinement exceeded its limit while continuing an analytic branch."""


class ClosedGapError(NumericalError):
    """A spectral gap needed by the computation is closed."""


class NearPoleError(NumericalError):
    pass


class GaugeError(NumericalError):
    pass


class SingularStepError(NumericalError):
    pass


class VanishingOffDiagonalError(NumericalError):
    pass


class WindingAmbiguousError(NumericalError):
    pass


class ConsistencyError(NumericalError):
    """An internal consistency check (e.g. monotonicity of the phase) failed."""


class ConfigError(ValueError):
    """Invalid run configuration (CLI exit code 2)."""

    def __init__(self, message, path=None):
        super().__init__(message if path is None else f"{path}: {message}")
        self.path = path
