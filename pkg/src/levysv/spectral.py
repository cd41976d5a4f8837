"""Resolvents, Stieltjes transforms and SVD-based spectral decompositions of
symmetrizations, plus the exact resolvent identities used as numerical oracles.
"""

from dataclasses import dataclass

import numpy as np

from .ensemble import MatrixHandle
from .errors import DegenerateSpectrumError, DomainError, NumericalError
from .io import read_binary, read_table, write_binary, write_table

__all__ = [
    "SpectralDecomposition",
    "ResolventSample",
    "resolvent",
    "stieltjes",
    "decompose",
    "ward_residual",
    "schur_diag_residual",
    "resolvent_difference_residual",
    "smallest_positive_eig",
    "interval_count_change",
    "save_decomposition",
    "load_decomposition",
]

RESIDUAL_TOL = 1e-8


def _check_z(z):
    z = complex(z)
    if not z.imag > 0:
        raise DomainError(f"spectral parameter must have Im z > 0, got {z}")
    return z


@dataclass(frozen=True, eq=False)
class SpectralDecomposition:
    """Spectrum of ``[[0, D^T], [D, 0]]`` built from ``D = P diag(s) Q^T``.

    ``singular`` holds s ascending.  ``lambdas`` is the sorted signed
    spectrum ``(-s[::-1], s)``.  ``U = blockdiag(Q, P)``; its column ``i``
    and column ``i + N`` pair up into the eigenvectors
    ``(U[:, i] +- U[:, i+N]) / sqrt(2)`` for the eigenvalues ``+-s_i``.
    """

    singular: np.ndarray
    U: np.ndarray

    @property
    def N(self):
        return self.singular.size

    @property
    def lambdas(self):
        return np.concatenate([-self.singular[::-1], self.singular])

    def signed_pairs(self):
        """``(s, -s)`` as two aligned length-N arrays (eigenvalues lambda_i, lambda_{-i})."""
        return self.singular, -self.singular

    def eigenvectors(self):
        """``(V_plus, V_minus)``: column i is the unit eigenvector for ``+s_i`` / ``-s_i``."""
        n = self.N
        a, b = self.U[:, :n], self.U[:, n:]
        r = np.sqrt(0.5)
        return r * (a + b), r * (a - b)

    def reconstruct(self):
        n = self.N
        F = np.zeros((2 * n, 2 * n))
        F[:n, n:] = np.diag(self.singular)
        F[n:, :n] = np.diag(self.singular)
        return self.U @ F @ self.U.T

    def resolvent(self, z):
        """``(H - z)^{-1}`` assembled from the eigenpairs."""
        z = _check_z(z)
        vp, vm = self.eigenvectors()
        gp = 1.0 / (self.singular - z)
        gm = 1.0 / (-self.singular - z)
        return (vp * gp) @ vp.T + (vm * gm) @ vm.T


@dataclass(frozen=True, eq=False)
class ResolventSample:
    z: complex
    G: np.ndarray
    source: str


def _as_array(M):
    return np.asarray(M.data if isinstance(M, MatrixHandle) else M, dtype=float)


def resolvent(M, z, method="direct_solve", decomposition=None, check=True) -> ResolventSample:
    """``(M - z)^{-1}`` by a linear solve or from an eigen-decomposition.

    ``via_decomposition`` uses ``decomposition`` if given (a
    :class:`SpectralDecomposition` of M) and a symmetric eigensolve otherwise.
    With ``check`` the residual ``max|(M - z)G - I|`` is verified.
    """
    z = _check_z(z)
    m = _as_array(M)
    n = m.shape[0]
    if method == "direct_solve":
        G = np.linalg.solve(m - z * np.eye(n), np.eye(n, dtype=complex))
    elif method == "via_decomposition":
        if decomposition is not None:
            G = decomposition.resolvent(z)
        else:
            w, v = np.linalg.eigh(m)
            G = (v / (w - z)) @ v.T
    else:
        raise DomainError(f"unknown resolvent method {method!r}")
    if check:
        res = np.abs((m - z * np.eye(n)) @ G - np.eye(n)).max()
        if res > RESIDUAL_TOL:
            raise NumericalError(f"resolvent residual {res:.3g} above {RESIDUAL_TOL}", residual=res)
    return ResolventSample(z, G, method)


def stieltjes(source, z):
    """Normalized trace ``(1/dim) sum 1/(lambda_k - z)``.

    ``source`` is a 1-D array of eigenvalues, a :class:`SpectralDecomposition`
    or a symmetric matrix.  ``z`` may be a scalar or an array.
    """
    if isinstance(source, SpectralDecomposition):
        lam = source.lambdas
    else:
        arr = _as_array(source)
        lam = arr if arr.ndim == 1 else np.linalg.eigvalsh(arr)
    zz = np.asarray(z, dtype=complex)
    if np.any(zz.imag <= 0):
        raise DomainError("spectral parameter must have Im z > 0")
    out = (1.0 / (lam[:, None] - zz.reshape(-1)[None, :])).mean(axis=0)
    return complex(out[0]) if zz.ndim == 0 else out.reshape(zz.shape)


def decompose(H) -> SpectralDecomposition:
    """Decompose a symmetrization through the SVD of its lower-left block."""
    h = _as_array(H)
    n2 = h.shape[0]
    if h.ndim != 2 or h.shape[1] != n2 or n2 % 2:
        raise DomainError(f"expected a 2N x 2N symmetrization, got shape {h.shape}")
    n = n2 // 2
    D = h[n:, :n]
    try:
        P, s, Qt = np.linalg.svd(D)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"SVD failed: {exc}") from exc
    order = np.argsort(s, kind="stable")
    s, P, Q = s[order], P[:, order], Qt.T[:, order]
    U = np.zeros((n2, n2))
    U[:n, :n] = Q
    U[n:, n:] = P
    dec = SpectralDecomposition(s, U)
    vp, vm = dec.eigenvectors()
    res = max(np.abs(h @ vp - vp * s).max(), np.abs(h @ vm + vm * s).max(), 0.0)
    scale = max(1.0, np.abs(s).max(initial=0.0))
    if res > RESIDUAL_TOL * scale:
        raise NumericalError(f"eigen-equation residual {res:.3g}", residual=res)
    return dec


def ward_residual(R: ResolventSample, j):
    """``|sum_k |G_jk|^2 - Im G_jj / Im z|``."""
    row = R.G[j]
    return float(abs(np.sum(np.abs(row) ** 2) - R.G[j, j].imag / R.z.imag))


def schur_diag_residual(D, z):
    """Compare the top-left diagonal of the symmetrization resolvent against
    ``z (D^T D - z^2)^{-1}``; both sides from independent solves."""
    z = _check_z(z)
    d = _as_array(D)
    n = d.shape[0]
    R = resolvent(np.block([[np.zeros((n, n)), d.T], [d, np.zeros((n, n))]]), z, check=False).G
    K = np.linalg.solve(d.T @ d - z * z * np.eye(n), np.eye(n, dtype=complex))
    return float(np.abs(np.diag(R)[:n] - z * np.diag(K)).max())


def resolvent_difference_residual(M1, M2, z):
    """``max|G1 - G2 - G1 (M2 - M1) G2|`` for ``G_k = (M_k - z)^{-1}``."""
    m1, m2 = _as_array(M1), _as_array(M2)
    g1 = resolvent(m1, z, check=False).G
    g2 = resolvent(m2, z, check=False).G
    return float(np.abs(g1 - g2 - g1 @ (m2 - m1) @ g2).max())


def smallest_positive_eig(decomp: SpectralDecomposition):
    pos = decomp.singular[decomp.singular > 0]
    if pos.size == 0:
        raise DegenerateSpectrumError("no positive eigenvalue")
    return float(pos[0])


def interval_count_change(M, index, E1, E2):
    """Change in the eigenvalue count on ``(E1, E2)`` after deleting row/column ``index``."""
    m = _as_array(M)
    keep = np.arange(m.shape[0]) != index
    full = np.linalg.eigvalsh(m)
    minor = np.linalg.eigvalsh(m[np.ix_(keep, keep)])
    cnt = lambda w: int(np.count_nonzero((w > E1) & (w < E2)))
    return cnt(full) - cnt(minor)


def save_decomposition(prefix, decomp: SpectralDecomposition):
    """Write ``<prefix>_lambdas.csv`` (index, lambda) and ``<prefix>_U.bin``."""
    n = decomp.N
    idx = list(range(-n, 0)) + list(range(1, n + 1))
    write_table(f"{prefix}_lambdas.csv", ["index", "lambda"], zip(idx, decomp.lambdas))
    write_binary(f"{prefix}_U.bin", decomp.U, "spectral_U")


def load_decomposition(prefix) -> SpectralDecomposition:
    _, rows = read_table(f"{prefix}_lambdas.csv")
    lam = np.array([r[1] for r in rows])
    U, _ = read_binary(f"{prefix}_U.bin")
    return SpectralDecomposition(lam[lam.size // 2:], U)
