"""Exception hierarchy for the deconvolution toolkit"""


class DeconvolutionError(RuntimeError):
    """Base class for all errors raised by this package."""


class ConfigError(DeconvolutionError, ValueError):
    """Invalid experiment configuration. Carries the dotted field name."""

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


class MeshMismatchError(DeconvolutionError, ValueError):
    """Two discrete functions (or a function and an operator) live on different meshes."""


class NumericalError(DeconvolutionError):
    """A numerical computation failed or produced unusable output."""


class NonFiniteError(NumericalError):
    """A log-density evaluated to NaN or infinity."""


class QuadratureError(NumericalError):
    """Quadrature refinement changed the result by more than the failure tolerance."""


class CacheDriftError(NumericalError):
    """Incrementally updated quantities drifted away from their recomputation."""


class NotPositiveDefiniteError(NumericalError):
    """A Gram or covariance matrix failed its Cholesky factorization."""


class HypothesisError(DeconvolutionError, ValueError):
    """A diagnostic was requested outside the hypotheses of the result it checks."""


class DiagnosticFailure(DeconvolutionError):
    """At least one convergence diagnostic did not pass."""
