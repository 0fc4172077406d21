"""Exception types shared across the package."""


class ModelError(ValueError):
    """Invalid model input: schema, dimensions, generator or sign violations."""


class AdmissibilityError(ModelError):
    """Fluid approximation parameter below the admissibility threshold."""


class NotPositiveRecurrentError(ModelError):
    """Operation requires a negative mean drift."""


class SolverError(RuntimeError):
    """An iterative solver failed to converge or produced an invalid result."""


class SplittingError(SolverError):
    """Root counts of the determinant polynomial violate the required split."""
