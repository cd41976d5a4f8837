"""Free additive convolution of an empirical spectrum with the semicircle law.

``m`` solves ``m = (1/n) sum_i 1/(lambda_i - z - s m)`` in the upper half
plane.  The weights ``g_i = 1/(lambda_i - z - s m)`` also feed the isotropic
approximant of ``<q, (V + sqrt(s) W - z)^{-1} q>``.
"""

from dataclasses import dataclass
import math

import numpy as np

from .ensemble import gaussian_sym
from .errors import DomainError, NonConvergenceError
from .io import write_table
from .limit import richardson
from .spectral import SpectralDecomposition, stieltjes

__all__ = [
    "FreeConvSolution",
    "FreeConvDensity",
    "IsotropicResidual",
    "solve_mfc",
    "rho_fc",
    "isotropic_approximant",
    "isotropic_residual",
    "write_solutions_csv",
    "SOLUTION_COLUMNS",
    "DEFAULT_ETAS",
]

DEFAULT_ETAS = (0.05, 0.025, 0.0125)


@dataclass(frozen=True, eq=False)
class FreeConvSolution:
    z: complex
    s: float
    m: complex
    g: np.ndarray
    iterations: int
    residual: float


def _weights(lam, z, s, m):
    return 1.0 / (lam - z - s * m)


def solve_mfc(lambdas, s, z, tol=1e-13, max_iter=500, m0=None) -> FreeConvSolution:
    """Solve the self-consistent equation by safeguarded Newton iteration.

    A step on ``F(m) = m - mean(g(m))`` is accepted only if it stays in the
    upper half plane and lowers ``|F|``.  For ``w = 1, 1/2, 1/4, ...`` the
    damped Newton step is tried first and then the damped fixed-point step
    ``m + w (mean g - m)``.
    """
    lam = np.asarray(lambdas.lambdas if isinstance(lambdas, SpectralDecomposition) else lambdas, dtype=float)
    z = complex(z)
    if not z.imag > 0:
        raise DomainError(f"spectral parameter must have Im z > 0, got {z}")
    if s < 0:
        raise DomainError("s must be nonnegative")
    if s == 0:
        g = _weights(lam, z, 0.0, 0.0)
        return FreeConvSolution(z, 0.0, complex(g.mean()), g, 0, 0.0)
    try:
        return _newton(lam, s, z, tol, max_iter, m0)
    except NonConvergenceError:
        if m0 is not None or z.imag >= 1.0:
            raise
    # Newton can stall near a spurious root close to the real axis when eta is
    # small; walk down from eta = 1 instead, warm-starting each step.
    m = None
    for eta in np.geomspace(1.0, z.imag, int(np.ceil(np.log2(1.0 / z.imag))) + 2)[:-1]:
        m = _newton(lam, s, complex(z.real, eta), tol, max_iter, m).m
    return _newton(lam, s, z, tol, max_iter, m)


def _newton(lam, s, z, tol, max_iter, m0):
    m = complex(m0) if m0 is not None else complex(stieltjes(lam, z))
    if m.imag <= 0:
        m = complex(m.real, 1.0)
    g = _weights(lam, z, s, m)
    F = m - g.mean()
    traj = [m]
    for it in range(1, max_iter + 1):
        if abs(F) <= tol:
            break
        dF = 1.0 - s * np.mean(g * g)
        cand = []
        w = 1.0
        while w > 1e-8:
            if dF != 0:
                cand.append(m - w * F / dF)
            cand.append(m - w * F)
            w *= 0.5
        for c in cand:
            if c.imag <= 0:
                continue
            gc = _weights(lam, z, s, c)
            Fc = c - gc.mean()
            if abs(Fc) < abs(F):
                m, g, F = c, gc, Fc
                break
        else:
            raise NonConvergenceError(f"no admissible step at iteration {it}", trajectory=traj, residual=abs(F))
        traj.append(m)
    else:
        raise NonConvergenceError(f"no convergence after {max_iter} iterations", trajectory=traj, residual=abs(F))
    return FreeConvSolution(z, float(s), m, g, len(traj) - 1, float(abs(F)))


@dataclass(frozen=True)
class FreeConvDensity:
    E: float
    rho: float
    spread: float
    stable: bool


def rho_fc(lambdas, s, E, eta_sequence=DEFAULT_ETAS) -> FreeConvDensity:
    """``(1/pi) Im m`` at ``E + i eta`` extrapolated to ``eta -> 0``."""
    if not s > 0:
        raise DomainError("density of the convolution needs s > 0")
    vals, m0 = [], None
    for eta in eta_sequence:
        sol = solve_mfc(lambdas, s, complex(E, eta), m0=m0)
        m0 = sol.m
        vals.append(sol.m.imag / math.pi)
    est, spread, ok = richardson(eta_sequence, vals)
    return FreeConvDensity(float(E), float(est), spread, ok)


def _unit(q):
    q = np.asarray(q, dtype=float)
    if abs(np.linalg.norm(q) - 1.0) > 1e-12:
        raise DomainError(f"q must be a unit vector (norm {np.linalg.norm(q):.15g})")
    return q


def isotropic_approximant(decomp: SpectralDecomposition, s, z, q, solution=None):
    """Deterministic approximation of ``<q, G q>`` built from the convolution weights."""
    q = _unit(q)
    n = decomp.N
    if q.size != 2 * n:
        raise DomainError("q has the wrong dimension")
    sol = solution if solution is not None else solve_mfc(decomp.lambdas, s, z)
    shift = sol.z + sol.s * sol.m
    gp = 1.0 / (decomp.singular - shift)
    gm = 1.0 / (-decomp.singular - shift)
    qh = decomp.U.T @ q
    top, bot = qh[:n], qh[n:]
    return complex(np.sum(0.5 * (gp + gm) * (top**2 + bot**2)) + np.sum((gp - gm) * top * bot))


@dataclass(frozen=True)
class IsotropicResidual:
    residual: float
    scale: float
    ratio: float
    approximant: complex
    quadratic_form: complex


def isotropic_residual(decomp: SpectralDecomposition, s, z, q, rng, c=0.05) -> IsotropicResidual:
    """Compare ``<q, (V + sqrt(s) W - z)^{-1} q>`` for a fresh Gaussian W with the approximant.

    The reference scale is ``N^{2c} (N eta)^{-1/2} Im(approximant)``.
    """
    q = _unit(q)
    z = complex(z)
    n = decomp.N
    approx = isotropic_approximant(decomp, s, z, q)
    M = decomp.reconstruct()
    if s > 0:
        M = M + math.sqrt(s) * gaussian_sym(n, rng).data
    qf = complex(q @ np.linalg.solve(M - z * np.eye(2 * n), q.astype(complex)))
    res = abs(qf - approx)
    scale = n ** (2 * c) / math.sqrt(n * z.imag) * approx.imag
    return IsotropicResidual(float(res), float(scale), float(res / scale), approx, qf)


SOLUTION_COLUMNS = ("s", "E", "eta", "re_m", "im_m", "residual", "iterations")


def write_solutions_csv(path, solutions):
    rows = [(sol.s, sol.z.real, sol.z.imag, sol.m.real, sol.m.imag, sol.residual, sol.iterations) for sol in solutions]
    write_table(path, SOLUTION_COLUMNS, rows)
