"""Exception and warning types raised across the package."""


class ToeplabError(Exception):
    """Base class for all errors raised by toeplab."""


class ParameterError(ToeplabError, ValueError):
    """An argument lies outside the admissible range of an operation."""


class QuadratureError(ToeplabError):
    """Node doubling did not converge before the node cap was reached."""


class GrowthError(ToeplabError):
    """A symbol grows faster than any polynomial of degree <= 12 on the probe grid."""


class UnsupportedVariantError(ToeplabError, TypeError):
    """The operation is only defined for some symbol variants."""


class SymbolEvaluationError(ToeplabError):
    """A callable symbol failed to evaluate; carries the offending point."""

    def __init__(self, message, z=None):
        super().__init__(message)
        self.z = z


class AssemblyError(ToeplabError):
    """A truncated operator violates its construction invariants."""


class DimensionCapError(AssemblyError):
    """Requested matrix dimension exceeds the configured cap."""


class DegenerateInputError(ToeplabError, ValueError):
    """Input carries no information (e.g. an all-zero coefficient vector)."""


class AccuracyError(ToeplabError):
    """A numerical estimate is not stable under refinement."""


class StepSizeError(ToeplabError):
    """The implicit integrator failed to converge within a step."""

    def __init__(self, message, time=None, state=None):
        super().__init__(message)
        self.time = time
        self.state = state


class SpecMismatchError(ToeplabError, ValueError):
    """Objects built on different truncations were combined."""


class TailMassWarning(UserWarning):
    """A coherent state is not resolved by the truncation to the requested accuracy."""
