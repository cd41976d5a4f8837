"""Heavy-tailed random matrices near the hard edge: ensembles, limit laws and
universality experiments."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    BudgetExceededError,
    ConstraintError,
    DegenerateSpectrumError,
    DomainError,
    NonConvergenceError,
    NumericalError,
)
from .params import DeformationSpec, EnsembleParams  # noqa: E402

__all__ = [
    "__version__",
    "BudgetExceededError",
    "ConstraintError",
    "DegenerateSpectrumError",
    "DomainError",
    "NonConvergenceError",
    "NumericalError",
    "DeformationSpec",
    "EnsembleParams",
]
