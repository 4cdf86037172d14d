"""Exception types shared across the package."""


class DyndiscError(Exception):
    """Base class for all package-specific errors."""


class UnsupportedSteps(DyndiscError):
    """Step count M outside the supported range [1, 6]."""


class UnsupportedOrder(DyndiscError):
    """Finite-difference stencil order outside the supported range [1, 7]."""


class TooFewSamples(DyndiscError):
    """Trajectory has fewer samples than the scheme needs (N < M)."""


class IndexOutOfRange(DyndiscError):
    """An auxiliary finite-difference stencil reaches past the last sample."""


class SingularMatrix(DyndiscError):
    """A triangular solve hit a zero diagonal entry."""


class NotConverged(DyndiscError):
    """Iterative solver hit its iteration cap before reaching tolerance.

    Carries the best iterate seen and its relative residual so callers can
    decide whether the partial answer is usable.
    """

    def __init__(self, message, best_iterate, residual, iterations):
        super().__init__(message)
        self.best_iterate = best_iterate
        self.residual = residual
        self.iterations = iterations


class StepUnderflow(DyndiscError):
    """Adaptive integrator needs a step below the representable floor."""


class NonFiniteState(DyndiscError):
    """A fixed-step integration produced NaN or infinity."""


class NonFiniteGradient(DyndiscError):
    """Backpropagation produced a NaN or infinite gradient entry."""


class DomainError(DyndiscError):
    """A model field was evaluated outside its valid domain."""


class MismatchedGrids(DyndiscError):
    """Trajectories in a multi-trajectory dataset disagree in h or N."""


class ZeroDenominator(DyndiscError):
    """A relative error metric has an identically-zero denominator."""


class DegenerateFit(DyndiscError):
    """Convergence-order fit was asked for on a single distinct h."""


class ConfigError(DyndiscError):
    """Experiment configuration is incomplete or inconsistent."""
