"""Exception types shared across the package."""


class SupportViolationError(ValueError):
    """Relative entropy is infinite: the first state has weight outside the
    support of the second."""


class DegenerateSteadyStateError(RuntimeError):
    """The generator's null space is not one-dimensional within tolerance."""


class IntegrationError(RuntimeError):
    """Time integration failed (step-size underflow or loss of positivity)."""


class ConvergenceError(RuntimeError):
    """An iterative procedure exceeded its horizon without converging."""
