"""Limiting spectral law of symmetrized heavy-tailed matrices.

The Stieltjes transform of the limit law is ``m_a(z) = i psi_z(y(z))`` where
``y(z)`` is the fixed point of ``y = phi_z(y)`` in the right half plane and

    phi_z(x) = 1/Gamma(a/2) int_0^inf t^{a/2-1} e^{itz} e^{-Gamma(1-a/2) t^{a/2} x} dt
    psi_z(x) = int_0^inf e^{itz} e^{-Gamma(1-a/2) t^{a/2} x} dt.

Both integrals are evaluated after the substitution ``u = t^{a/2}``, which
removes the endpoint singularity of ``phi``.
"""

from dataclasses import dataclass, field
import math

import numpy as np
from scipy import integrate

from .errors import DomainError, NonConvergenceError, NumericalError
from .io import write_table

__all__ = [
    "LimitLawSolution",
    "DensityPoint",
    "phi",
    "psi",
    "solve_limit",
    "sweep",
    "rho_a_zero",
    "rho_a_zero_published",
    "xi",
    "rho_sc",
    "richardson",
    "density",
    "density_table",
    "write_density_csv",
    "DENSITY_COLUMNS",
]

QUAD_RTOL = 1e-11
# integrand is dropped once it falls below exp(-CUTOFF) of its peak bound
CUTOFF = 40.0


def _check(a, z, x):
    if not 0 < a < 2:
        raise DomainError(f"stability index must lie in (0, 2), got {a}")
    z = complex(z)
    if not z.imag > 0:
        raise DomainError(f"spectral parameter must have Im z > 0, got {z}")
    x = complex(x)
    if x.real < 0:
        raise DomainError(f"integrals need Re x >= 0, got {x}")
    return z, x


def _upper_limit(a, eta, damp, power):
    """Smallest u (up to doubling) with exp(-eta u^{2/a} - damp u) u^power below the cutoff."""
    p = 2.0 / a
    u = 1.0
    while -eta * u**p - damp * u + power * math.log(u) > -CUTOFF:
        u *= 2.0
    return u


def _integral(a, z, x, power, rtol):
    """``int_0^inf u^power exp(i z u^{2/a} - Gamma(1-a/2) u x) du`` with error estimate."""
    c = math.gamma(1.0 - a / 2.0)
    p = 2.0 / a
    U = _upper_limit(a, z.imag, c * x.real, power)
    # one breakpoint per half-oscillation of the phase, capped
    phase = abs(z.real) * U**p + c * abs(x.imag) * U
    npts = int(min(max(phase / math.pi, 4), 2000))
    pts = np.linspace(0.0, U, npts + 1)[1:-1]

    def f(u):
        w = np.exp(1j * z * u**p - c * u * x)
        if power:
            w = w * u**power
        return np.array([w.real, w.imag])

    val, err = integrate.quad_vec(f, 0.0, U, epsabs=1e-15, epsrel=rtol, points=pts, limit=20000)
    return complex(val[0], val[1]), float(err)


def phi(a, z, x, rtol=QUAD_RTOL, return_error=False):
    z, x = _check(a, z, x)
    pref = 2.0 / (a * math.gamma(a / 2.0))
    v, e = _integral(a, z, x, 0.0, rtol)
    return _finish(pref * v, pref * e, return_error)


def psi(a, z, x, rtol=QUAD_RTOL, return_error=False):
    z, x = _check(a, z, x)
    pref = 2.0 / a
    v, e = _integral(a, z, x, 2.0 / a - 1.0, rtol)
    return _finish(pref * v, pref * e, return_error)


def _finish(v, e, return_error):
    if not np.isfinite(v):
        raise NumericalError("quadrature returned a non-finite value", estimate=v)
    if e > 1e-9 * max(abs(v), 1e-300) and e > 1e-13:
        raise NumericalError(f"quadrature error estimate {e:.3g} too large for value {abs(v):.3g}", residual=e, estimate=v)
    return (v, e) if return_error else v


@dataclass(frozen=True)
class LimitLawSolution:
    z: complex
    y: complex
    m_a: complex
    iterations: int
    residual: float
    a: float = float("nan")


def solve_limit(a, z, tol=1e-10, max_iter=500, y0=None, damping=0.5) -> LimitLawSolution:
    """Damped fixed-point iteration ``y <- (1-w) y + w phi(y)``.

    ``w`` starts at ``damping`` and is halved whenever a step increases the
    residual (the step is then retried from the previous iterate).  The start
    is ``(-iz)^{-a/2}`` unless ``y0`` is given.
    """
    z, _ = _check(a, z, 0.0)
    y = (-1j * z) ** (-a / 2.0) if y0 is None else complex(y0)
    if y.real < 0:
        y = complex(0.0, y.imag)
    w = damping
    f = phi(a, z, y)
    res = abs(f - y)
    traj = [y]
    it = 0
    while res > tol:
        if it >= max_iter:
            raise NonConvergenceError(f"no convergence after {max_iter} iterations (residual {res:.3g})", trajectory=traj, residual=res)
        it += 1
        cand = (1 - w) * y + w * f
        if cand.real < 0:
            w *= 0.5
            continue
        fc = phi(a, z, cand)
        rc = abs(fc - cand)
        if rc > res and w > 1e-3:
            w *= 0.5
            continue
        y, f, res = cand, fc, rc
        traj.append(y)
    return LimitLawSolution(z, y, 1j * psi(a, z, y), it, res, float(a))


def sweep(a, zs, tol=1e-10, max_iter=500):
    """Solve along ``zs`` in order, starting each solve from the previous fixed point."""
    out = []
    y0 = None
    for z in zs:
        sol = solve_limit(a, z, tol=tol, max_iter=max_iter, y0=y0)
        out.append(sol)
        y0 = sol.y
    return out


def _check_a(a):
    if not 0 < a < 2:
        raise DomainError(f"stability index must lie in (0, 2), got {a}")


def rho_a_zero(a):
    """Density of the limit law at 0: ``Gamma(1+2/a) (Gamma(1+a/2)/Gamma(1-a/2))^{1/a} / pi``.

    This is the value the fixed-point equation produces at ``z -> 0`` (see
    :func:`rho_a_zero_published` for the variant with the inverted ratio).
    """
    _check_a(a)
    return math.gamma(1 + 2 / a) * (math.gamma(1 + a / 2) / math.gamma(1 - a / 2)) ** (1 / a) / math.pi


def rho_a_zero_published(a):
    """``Gamma(1+2/a) (Gamma(1-a/2)/Gamma(1+a/2))^{1/a} / pi``; not consistent with the solver."""
    _check_a(a)
    return math.gamma(1 + 2 / a) * (math.gamma(1 - a / 2) / math.gamma(1 + a / 2)) ** (1 / a) / math.pi


def rho_sc(E=0.0):
    """Semicircle density ``sqrt(4 - E^2) / (2 pi)``."""
    E = np.asarray(E, dtype=float)
    out = np.sqrt(np.clip(4.0 - E * E, 0.0, None)) / (2 * np.pi)
    return float(out) if out.ndim == 0 else out


def xi(a):
    """Ratio of the limit density at 0 to the semicircle density at 0."""
    return rho_a_zero(a) / rho_sc(0.0)


def richardson(etas, values):
    """Polynomial extrapolation of ``values(eta)`` to ``eta = 0``.

    Returns ``(estimate, spread, stable)``: spread is the change from dropping
    the largest eta; the result is flagged unstable when the spread exceeds
    ten times the last increment of the raw values.
    """
    etas = np.asarray(etas, dtype=float)
    vals = np.asarray(values)
    if etas.size != vals.size or etas.size < 2:
        raise DomainError("need at least two (eta, value) pairs")

    def extrap(e, v):
        # Neville's scheme evaluated at 0
        p = list(v)
        n = len(e)
        for k in range(1, n):
            for i in range(n - k):
                p[i] = (e[i + k] * p[i] - e[i] * p[i + 1]) / (e[i + k] - e[i])
        return p[0]

    est = extrap(etas, vals)
    spread = abs(est - extrap(etas[1:], vals[1:])) if etas.size > 2 else abs(est - vals[-1])
    last = abs(vals[-1] - vals[-2])
    return est, float(spread), bool(spread <= 10 * last or spread < 1e-12)


@dataclass(frozen=True)
class DensityPoint:
    a: float
    E: float
    rho: float
    spread: float
    stable: bool
    solutions: list = field(default_factory=list)


DEFAULT_ETAS = (0.05, 0.025, 0.0125)


def density(a, E, etas=DEFAULT_ETAS, tol=1e-11) -> DensityPoint:
    """``(1/pi) Im m_a(E + i eta)`` extrapolated to ``eta -> 0``."""
    sols = sweep(a, [complex(E, e) for e in etas], tol=tol)
    est, spread, ok = richardson(etas, [s.m_a.imag / math.pi for s in sols])
    return DensityPoint(float(a), float(E), float(est), spread, ok, sols)


DENSITY_COLUMNS = ("a", "E", "eta", "re_m", "im_m", "rho")


def density_table(a, energies, etas=DEFAULT_ETAS, tol=1e-11):
    """Rows ``(a, E, eta, re_m, im_m, rho)``: one per (E, eta) and one
    extrapolated row per E with ``eta = 0``."""
    rows, points = [], []
    for E in energies:
        pt = density(a, E, etas, tol)
        points.append(pt)
        for eta, s in zip(etas, pt.solutions):
            rows.append((float(a), float(E), float(eta), s.m_a.real, s.m_a.imag, s.m_a.imag / math.pi))
        re0, _, _ = richardson(etas, [s.m_a.real for s in pt.solutions])
        rows.append((float(a), float(E), 0.0, float(re0), math.pi * pt.rho, pt.rho))
    return rows, points


def write_density_csv(path, rows):
    write_table(path, DENSITY_COLUMNS, rows)
