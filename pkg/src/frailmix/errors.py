"""Exception types raised by frailmix."""


class DomainError(ValueError):
    """An argument lies outside the support of a model function."""


class DataError(ValueError):
    """Input data could not be parsed or violates a dataset invariant."""


class SamplerError(RuntimeError):
    """A rejection sampler exceeded its proposal budget."""


class OptimizationError(RuntimeError):
    """The M-step optimizer failed (non-finite objective or budget exhausted)."""


class InformationError(ArithmeticError):
    """Observed information is singular or not positive definite."""
