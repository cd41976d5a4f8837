"""Parameter containers for the deformed a-stable ensembles."""

from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .errors import ConstraintError, DomainError

__all__ = [
    "DeformationSpec",
    "EnsembleParams",
    "check_constraints",
    "feasible_exponents",
]


@dataclass(frozen=True)
class DeformationSpec:
    """Law of the symmetric, finite-variance shift ``J`` added to each stable entry.

    kind is one of ``none``, ``rademacher``, ``uniform`` (on ``[-h, h]``) or
    ``table`` (atoms ``values`` with weights ``probs``; must be symmetric).
    """

    kind: str = "rademacher"
    h: float = 1.0
    values: tuple = ()
    probs: tuple = ()

    def __post_init__(self):
        if self.kind not in ("none", "rademacher", "uniform", "table"):
            raise DomainError(f"unknown deformation kind {self.kind!r}")
        if self.kind == "uniform" and not self.h > 0:
            raise DomainError("uniform deformation needs h > 0")
        if self.kind == "table":
            v = np.asarray(self.values, dtype=float)
            p = np.asarray(self.probs, dtype=float)
            if v.shape != p.shape or v.size == 0:
                raise DomainError("table deformation needs matching values/probs")
            if np.any(p < 0) or not np.isclose(p.sum(), 1.0):
                raise DomainError("table probabilities must be nonnegative and sum to 1")
            if not np.allclose(sorted(zip(v, p)), sorted(zip(-v, p))):
                raise DomainError("table deformation must be symmetric about 0")

    def sample(self, rng, size):
        if self.kind == "none":
            return np.zeros(size)
        if self.kind == "rademacher":
            return 2.0 * rng.integers(0, 2, size=size) - 1.0
        if self.kind == "uniform":
            return rng.uniform(-self.h, self.h, size=size)
        return rng.choice(np.asarray(self.values, float), size=size, p=np.asarray(self.probs, float))

    def charfn(self, u):
        """Characteristic function of J (real, since J is symmetric)."""
        u = np.asarray(u, dtype=float)
        if self.kind == "none":
            return np.ones_like(u)
        if self.kind == "rademacher":
            return np.cos(u)
        if self.kind == "uniform":
            return np.sinc(self.h * u / np.pi)
        v = np.asarray(self.values, float)
        p = np.asarray(self.probs, float)
        return np.cos(np.multiply.outer(u, v)) @ p

    @property
    def variance(self):
        if self.kind == "none":
            return 0.0
        if self.kind == "rademacher":
            return 1.0
        if self.kind == "uniform":
            return self.h**2 / 3.0
        v = np.asarray(self.values, float)
        return float(np.asarray(self.probs, float) @ v**2)


def check_constraints(a, b, rho, nu=None):
    """Evaluate the five exponent constraints.

    Returns a list of ``(name, passed, margin)`` where a positive margin means
    the strict inequality holds with that much room.
    """
    if nu is None:
        nu = 1.0 / a - b
    return [
        ("0 < a < 2", 0 < a < 2, min(a, 2 - a)),
        ("nu = 1/a - b > 0", nu > 0 and np.isclose(nu, 1.0 / a - b), nu),
        ("0 < rho < nu", 0 < rho < nu, min(rho, nu - rho)),
        ("1/(4-a) < nu < 1/(4-2a)", 1 / (4 - a) < nu < 1 / (4 - 2 * a), min(nu - 1 / (4 - a), 1 / (4 - 2 * a) - nu)),
        ("a*rho < (2-a)*nu", a * rho < (2 - a) * nu, (2 - a) * nu - a * rho),
    ]


def feasible_exponents(a):
    """A feasible ``(b, nu, rho)`` for stability index ``a``.

    nu sits mid-way in ``(1/(4-a), min(1/(4-2a), 1/a))`` so that b > 0 too;
    rho is half its admissible upper bound.
    """
    if not 0 < a < 2:
        raise DomainError(f"stability index must lie in (0, 2), got {a}")
    lo = 1 / (4 - a)
    hi = min(1 / (4 - 2 * a), 1 / a)
    nu = 0.5 * (lo + hi)
    rho = 0.5 * min(nu, (2 - a) * nu / a)
    return 1.0 / a - nu, nu, rho


@dataclass(frozen=True)
class EnsembleParams:
    """Dimension, stability index, truncation exponents, deformation and seed."""

    N: int
    a: float
    b: Optional[float] = None
    nu: Optional[float] = None
    rho: Optional[float] = None
    deformation: DeformationSpec = field(default_factory=DeformationSpec)
    seed: int = 0
    sigma: Optional[float] = None

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 1:
            raise DomainError(f"N must be a positive integer, got {self.N}")
        if not 0 < self.a < 2:
            raise DomainError(f"stability index must lie in (0, 2), got {self.a}")
        b, nu, rho = self.b, self.nu, self.rho
        if b is None and nu is None:
            b, nu, dflt_rho = feasible_exponents(self.a)
            rho = dflt_rho if rho is None else rho
        elif nu is None:
            nu = 1.0 / self.a - b
        elif b is None:
            b = 1.0 / self.a - nu
        if rho is None:
            rho = 0.5 * min(nu, (2 - self.a) * nu / self.a)
        object.__setattr__(self, "b", float(b))
        object.__setattr__(self, "nu", float(nu))
        object.__setattr__(self, "rho", float(rho))
        failed = [name for name, ok, _ in check_constraints(self.a, self.b, self.rho, self.nu) if not ok]
        if failed:
            raise ConstraintError(failed)

    @property
    def scale(self):
        """Stable scale actually used (the normalised one unless overridden)."""
        from .stable import sigma_for

        return sigma_for(self.a) if self.sigma is None else float(self.sigma)

    def replace(self, **kw):
        d = asdict(self)
        d["deformation"] = self.deformation
        d.update(kw)
        return EnsembleParams(**d)

    def to_dict(self):
        d = asdict(self)
        d["deformation"] = asdict(self.deformation)
        d["deformation"]["values"] = list(self.deformation.values)
        d["deformation"]["probs"] = list(self.deformation.probs)
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        defo = d.pop("deformation", None)
        if isinstance(defo, dict):
            defo = dict(defo)
            defo["values"] = tuple(defo.get("values", ()))
            defo["probs"] = tuple(defo.get("probs", ()))
            d["deformation"] = DeformationSpec(**defo)
        elif isinstance(defo, DeformationSpec):
            d["deformation"] = defo
        return cls(**d)
