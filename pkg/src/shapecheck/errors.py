"""Exception hierarchy for shapecheck."""


class ShapeCheckError(Exception):
    """Base exception for shapecheck errors."""
    pass


class ValidationError(ShapeCheckError):
    """Raised when a pmf, sample, partition, config or input file is malformed."""
    pass


class DimensionMismatchError(ValidationError):
    """Raised when domain sizes or grid dims of two inputs disagree."""
    pass


class SampleBudgetError(ShapeCheckError):
    """Raised when a sample budget is below a learner's minimum or a fixed sample runs out."""
    pass


class SolverError(ShapeCheckError):
    """Raised when the LP backend fails or returns a numerically unreliable point.

    Infeasibility is not an error; see ``shapecheck.learn.lp.Feasibility``.
    """
    pass


class GenerationError(ShapeCheckError):
    """Raised when a generator cannot reach the requested distance from a class."""
    pass
