"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain where the quantity is defined."""


class ConstraintError(ValueError):
    """Ensemble exponents violate one or more of the admissibility inequalities."""

    def __init__(self, failed):
        self.failed = list(failed)
        super().__init__("parameter constraints violated: " + "; ".join(self.failed))


class NumericalError(RuntimeError):
    """A numerical routine failed to reach its accuracy contract."""

    def __init__(self, msg, residual=None, estimate=None):
        super().__init__(msg)
        self.residual = residual
        self.estimate = estimate


class NonConvergenceError(NumericalError):
    """A fixed-point iteration hit its iteration cap."""

    def __init__(self, msg, trajectory=None, residual=None):
        super().__init__(msg, residual=residual)
        self.trajectory = trajectory


class BudgetExceededError(NumericalError):
    """Monte Carlo budget exhausted before the requested precision; carries the best estimate."""


class DegenerateSpectrumError(NumericalError):
    """The spectrum has no strictly positive eigenvalue."""

