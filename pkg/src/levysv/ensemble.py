"""Matrix builders: Levy matrix, symmetrization, b-removal split, Gaussian
comparison matrices, coupling time and the interpolating family.

All builders return immutable :class:`MatrixHandle` values.
"""

from dataclasses import dataclass
import math

import numpy as np

from .errors import BudgetExceededError, DomainError
from .io import read_binary, write_binary, write_csv_matrix
from .params import EnsembleParams, check_constraints, feasible_exponents
from .stable import sample_entry

__all__ = [
    "TAGS",
    "MatrixHandle",
    "CouplingTime",
    "build_levy",
    "symmetrize",
    "split_b_removal",
    "gaussian_iid",
    "gaussian_sym",
    "coupling_time",
    "interpolate",
    "validate_params",
    "save_matrix",
    "load_matrix",
    "save_matrix_csv",
]

TAGS = (
    "levy_D",
    "symmetrization_H",
    "big_part_X",
    "small_part_A",
    "gaussian_L",
    "gaussian_sym_W",
    "interpolant_Hgamma",
)
_SYM_TAGS = {"symmetrization_H", "big_part_X", "small_part_A", "gaussian_sym_W", "interpolant_Hgamma"}


@dataclass(frozen=True, eq=False)
class MatrixHandle:
    data: np.ndarray
    tag: str

    def __post_init__(self):
        if self.tag not in TAGS:
            raise DomainError(f"unknown matrix tag {self.tag!r}")
        arr = np.array(self.data, dtype=np.float64, copy=True)
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)
        if self.tag in _SYM_TAGS:
            n2 = arr.shape[0]
            if arr.ndim != 2 or arr.shape[1] != n2 or n2 % 2:
                raise DomainError(f"{self.tag} must be square of even size, got {arr.shape}")

    @property
    def rows(self):
        return self.data.shape[0]

    @property
    def cols(self):
        return self.data.shape[1]

    @property
    def half(self):
        """N for a 2N x 2N symmetrization-type matrix."""
        return self.rows // 2

    def block(self):
        """Lower-left N x N block (the matrix being symmetrized)."""
        n = self.half
        return self.data[n:, :n]

    def __array__(self, dtype=None, copy=None):
        return self.data if dtype is None else self.data.astype(dtype)


@dataclass(frozen=True)
class CouplingTime:
    t: float
    method: str
    stderr: float


def build_levy(params: EnsembleParams, rng) -> MatrixHandle:
    """N x N matrix with i.i.d. entries ``N^{-1/a}(J + Z)``."""
    n = params.N
    return MatrixHandle(sample_entry(params, n * n, rng).reshape(n, n), "levy_D")


def symmetrize(D, tag="symmetrization_H") -> MatrixHandle:
    """``[[0, D^T], [D, 0]]``."""
    d = np.asarray(D, dtype=float)
    if d.ndim != 2 or d.shape[0] != d.shape[1]:
        raise DomainError(f"symmetrization needs a square matrix, got shape {d.shape}")
    n = d.shape[0]
    h = np.zeros((2 * n, 2 * n))
    h[:n, n:] = d.T
    h[n:, :n] = d
    return MatrixHandle(h, tag)


def split_b_removal(H: MatrixHandle, params: EnsembleParams):
    """Split ``H = X + A`` with ``X`` holding the entries ``N^{1/a}|h| >= N^b``."""
    h = np.asarray(H, dtype=float)
    n = params.N
    big = n ** (1.0 / params.a) * np.abs(h) >= n**params.b
    x = np.where(big, h, 0.0)
    a = np.where(big, 0.0, h)
    return MatrixHandle(x, "big_part_X"), MatrixHandle(a, "small_part_A")


def gaussian_iid(N, rng) -> MatrixHandle:
    """N x N matrix with i.i.d. N(0, 1/N) entries."""
    if N < 1:
        raise DomainError("N must be positive")
    return MatrixHandle(rng.standard_normal((N, N)) / math.sqrt(N), "gaussian_L")


def gaussian_sym(N, rng) -> MatrixHandle:
    """Symmetrization of :func:`gaussian_iid`."""
    return symmetrize(gaussian_iid(N, rng).data, tag="gaussian_sym_W")


def _truncated_cauchy_second_moment(scale, T):
    # int_{-T}^{T} x^2 * scale / (pi (scale^2 + x^2)) dx
    return 2.0 * scale / math.pi * (T - scale * math.atan(T / scale))


def coupling_time(params: EnsembleParams, precision=None, method="monte_carlo", rng=None,
                  batch=1_000_000, max_draws=20_000_000) -> CouplingTime:
    """``t = N Var(E_11)``, the variance of the small (truncated) entry law times N.

    ``monte_carlo`` draws batches of scalar entries until the standard error
    drops to ``precision`` (one batch if ``precision`` is None).  ``quadrature``
    is available for a = 1 without deformation.
    """
    n, a = params.N, params.a
    T = n**params.b  # threshold on |J + Z|
    if method == "quadrature":
        if a != 1.0 or params.deformation.kind != "none":
            raise DomainError("quadrature coupling time is implemented for a = 1 without deformation")
        m2 = _truncated_cauchy_second_moment(params.scale, T)
        return CouplingTime(n * n ** (-2.0) * m2, "quadrature", 0.0)
    if method != "monte_carlo":
        raise DomainError(f"unknown method {method!r}")
    if rng is None:
        from .rng import make_rng

        rng = make_rng(params.seed)
    s1 = s2 = 0.0
    count = 0
    while True:
        d = sample_entry(params, batch, rng)
        e = np.where(n ** (1.0 / a) * np.abs(d) < T, d, 0.0)
        # the small part is symmetric, so its mean is exactly 0
        v = n * e * e
        s1 += v.sum()
        s2 += (v * v).sum()
        count += batch
        t = s1 / count
        se = math.sqrt(max(s2 / count - t * t, 0.0) / (count - 1))
        if precision is None or se <= precision:
            return CouplingTime(float(t), "monte_carlo", float(se))
        if count >= max_draws:
            raise BudgetExceededError(
                f"standard error {se:.3g} above {precision:.3g} after {count} draws", estimate=CouplingTime(float(t), "monte_carlo", float(se))
            )


def interpolate(X, A, W, t, gamma_) -> MatrixHandle:
    """``gamma A + sqrt(t (1 - gamma^2)) W + X``."""
    if not 0.0 <= gamma_ <= 1.0:
        raise DomainError(f"gamma must lie in [0, 1], got {gamma_}")
    if not t > 0:
        raise DomainError("t must be positive")
    x, a, w = (np.asarray(m, dtype=float) for m in (X, A, W))
    if not x.shape == a.shape == w.shape:
        raise DomainError("shape mismatch")
    if gamma_ == 1.0:
        out = x + a
    elif gamma_ == 0.0:
        out = x + math.sqrt(t) * w
    else:
        out = gamma_ * a + math.sqrt(t) * math.sqrt(1.0 - gamma_**2) * w + x
    return MatrixHandle(out, "interpolant_Hgamma")


def validate_params(a, b=None, rho=None, nu=None):
    """Report on the exponent constraints plus a feasible default for ``a``.

    Never raises; the report's ``ok`` field says whether every constraint holds.
    """
    report = {"a": a, "b": b, "rho": rho, "nu": nu, "constraints": [], "ok": False, "feasible_default": None}
    try:
        db, dnu, drho = feasible_exponents(a)
        report["feasible_default"] = {"b": db, "nu": dnu, "rho": drho}
    except DomainError:
        pass
    if b is None and nu is None:
        return report
    if nu is None:
        nu = 1.0 / a - b
    if b is None:
        b = 1.0 / a - nu
    report.update(b=b, nu=nu)
    if rho is None:
        rho = float("nan")
    rows = check_constraints(a, b, rho, nu)
    report["constraints"] = [{"name": nm, "pass": bool(ok), "margin": float(m)} for nm, ok, m in rows]
    report["ok"] = all(r["pass"] for r in report["constraints"])
    return report


# -- serialization -------------------------------------------------------

def save_matrix(path, M: MatrixHandle):
    """Write ``M`` in the binary matrix format (see :mod:`levysv.io`)."""
    write_binary(path, M.data, M.tag)


def load_matrix(path) -> MatrixHandle:
    arr, tag = read_binary(path)
    for full in TAGS:
        # tags longer than the 16-byte header field are stored truncated
        if full.startswith(tag):
            return MatrixHandle(arr, full)
    raise ValueError(f"{path}: unknown matrix tag {tag!r}")


def save_matrix_csv(path, M: MatrixHandle):
    write_csv_matrix(path, M.data)
