"""Spectral statistics near zero: least singular values, bottom-k, eigenvector
sup-norms, smoothed counting and gap probabilities.
"""

from dataclasses import dataclass, field
import math

import numpy as np
from scipy import stats as sps

from .ensemble import build_levy, coupling_time, gaussian_iid, gaussian_sym, interpolate, split_b_removal, symmetrize
from .errors import ConstraintError, DomainError, NumericalError
from .limit import xi
from .params import EnsembleParams
from .rng import trial_rng
from .spectral import SpectralDecomposition

__all__ = [
    "LsvSample",
    "CountingConfig",
    "GapReport",
    "GapResult",
    "WeylCheck",
    "lsv_limit_cdf",
    "smallest_singular",
    "ensemble_block",
    "lsv_trial",
    "lsv_experiment",
    "bottom_k",
    "delocalization_sup",
    "deloc_reference",
    "eig_count",
    "smoothed_count",
    "smoothing_q",
    "gap_sandwich_report",
    "gap_probability",
    "weyl_check",
    "ks_distance",
    "ks_two_sample",
    "ecdf",
]


def lsv_limit_cdf(r):
    """``1 - exp(-r^2/2 - r)``: limit law of ``N s_1`` for Gaussian matrices."""
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise DomainError("r must be nonnegative")
    out = -np.expm1(-0.5 * r * r - r)
    return float(out) if out.ndim == 0 else out


def smallest_singular(D):
    return float(np.linalg.svd(np.asarray(D, dtype=float), compute_uv=False)[-1])


@dataclass(frozen=True)
class LsvSample:
    trial: int
    seed: int
    raw: float
    scaled: float
    ensemble: str
    error: str = ""


def ensemble_block(params: EnsembleParams, ensemble, rng, gamma=1.0, t=None):
    """N x N block whose symmetrization is the requested ensemble.

    ``levy``: the Levy matrix.  ``gaussian``: i.i.d. N(0, 1/N).
    ``interpolant``: the block of ``gamma A + sqrt(t (1 - gamma^2)) W + X``.
    """
    if ensemble == "levy":
        return build_levy(params, rng).data
    if ensemble == "gaussian":
        return gaussian_iid(params.N, rng).data
    if ensemble == "interpolant":
        if t is None:
            raise DomainError("interpolant ensemble needs the coupling time t")
        H = symmetrize(build_levy(params, rng).data)
        X, A = split_b_removal(H, params)
        W = gaussian_sym(params.N, rng)
        return interpolate(X, A, W, t, gamma).block()
    raise DomainError(f"unknown ensemble {ensemble!r}")


def _scale_factor(params, ensemble):
    # Gaussian matrices need no density correction
    return params.N * (1.0 if ensemble == "gaussian" else xi(params.a))


def lsv_trial(params: EnsembleParams, ensemble, trial, seed, gamma=1.0, t=None) -> LsvSample:
    try:
        s1 = smallest_singular(ensemble_block(params, ensemble, trial_rng(seed, trial), gamma, t))
        return LsvSample(trial, seed, s1, _scale_factor(params, ensemble) * s1, ensemble)
    except (np.linalg.LinAlgError, NumericalError) as exc:
        return LsvSample(trial, seed, float("nan"), float("nan"), ensemble, f"{type(exc).__name__}: {exc}")


def lsv_experiment(params: EnsembleParams, ensemble, trials, seed=None, gamma=1.0, s=None):
    """Per-trial least singular values.

    For ``interpolant`` the coupling time is estimated once (or ``s`` is
    used in its place).  Failed trials carry ``nan`` values and an error text.
    """
    if trials < 1:
        raise DomainError("need at least one trial")
    seed = params.seed if seed is None else seed
    t = None
    if ensemble == "interpolant":
        t = s if s is not None else coupling_time(params).t
    return [lsv_trial(params, ensemble, k, seed, gamma, t) for k in range(trials)]


def bottom_k(decomp: SpectralDecomposition, k):
    """``N`` times the ``k`` smallest positive eigenvalues, increasing."""
    pos = decomp.singular[decomp.singular > 0]
    if not 1 <= k <= decomp.N:
        raise DomainError(f"k must lie in [1, {decomp.N}], got {k}")
    if k > pos.size:
        raise DomainError(f"only {pos.size} positive eigenvalues available")
    return decomp.N * pos[:k]


def delocalization_sup(decomp: SpectralDecomposition, c):
    """Largest sup-norm over unit eigenvectors with eigenvalue in ``[-c, c]``.

    Returns ``(sup, count)``; ``sup`` is None when the window is empty.
    """
    if not c > 0:
        raise DomainError("c must be positive")
    sel = decomp.singular <= c
    cnt = int(np.count_nonzero(sel))
    if cnt == 0:
        return None, 0
    n = decomp.N
    # eigenvectors (q_i, +-p_i)/sqrt(2) share the same sup-norm
    q = decomp.U[:n, :n][:, sel]
    p = decomp.U[n:, n:][:, sel]
    return float(max(np.abs(q).max(), np.abs(p).max()) / math.sqrt(2.0)), 2 * cnt


def deloc_reference(N, count):
    """Typical sup-norm of ``count`` independent uniform unit vectors in dimension 2N."""
    return math.sqrt(math.log(2 * N * max(count, 1)) / N)


def eig_count(lambdas, E1, E2):
    if E1 > E2:
        raise DomainError("need E1 <= E2")
    lam = np.asarray(lambdas, dtype=float)
    return int(np.count_nonzero((lam > E1) & (lam < E2)))


def smoothed_count(lambdas, w, eta):
    """``(1/pi) sum_i [atan((w - l_i)/eta) + atan((w + l_i)/eta)]``."""
    if not (w > 0 and eta > 0):
        raise DomainError("w and eta must be positive")
    lam = np.asarray(lambdas, dtype=float)
    return float(np.sum(np.arctan((w - lam) / eta) + np.arctan((w + lam) / eta)) / np.pi)


def _smooth_step(t):
    # exp(-1/t) partition: 0 for t <= 0, 1 for t >= 1, C-infinity in between
    t = np.asarray(t, dtype=float)
    with np.errstate(divide="ignore", over="ignore"):
        a = np.where(t > 0, np.exp(-1.0 / np.where(t > 0, t, 1.0)), 0.0)
        b = np.where(t < 1, np.exp(-1.0 / np.where(t < 1, 1.0 - t, 1.0)), 0.0)
    return a / (a + b)


def smoothing_q(x):
    """Even bump: 1 on ``(-1/9, 1/9)``, 0 outside ``(-2/9, 2/9)``, monotone between."""
    x = np.asarray(x, dtype=float)
    out = 1.0 - _smooth_step(9.0 * np.abs(x) - 1.0)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class CountingConfig:
    """Window and smoothing scales for the counting sandwich.

    ``eta1 = N^{-1-eps}``, ``l = N^{-1-99 eps}``, ``l1 = l N^{2 eps}``;
    the window half-width defaults to ``r / (2N)``.
    """

    N: int
    r: float = 1.0
    eps: float = 0.01
    w: float = None
    eta1: float = field(init=False)
    l: float = field(init=False)
    l1: float = field(init=False)

    def __post_init__(self):
        if self.N < 1 or not self.r > 0 or not self.eps > 0:
            raise DomainError("need N >= 1, r > 0 and eps > 0")
        if self.w is None:
            object.__setattr__(self, "w", self.r / (2.0 * self.N))
        object.__setattr__(self, "eta1", self.N ** (-1.0 - self.eps))
        object.__setattr__(self, "l", self.N ** (-1.0 - 99.0 * self.eps))
        object.__setattr__(self, "l1", self.l * self.N ** (2.0 * self.eps))
        if not self.w > 0:
            raise DomainError("window half-width must be positive")
        if not 0 < self.l1 < self.eta1:
            raise ConstraintError([f"0 < l1 < eta1 (l1={self.l1:.3g}, eta1={self.eta1:.3g})"])

    @property
    def bound_scale(self):
        """``N^{-eps}``, the unit in which sandwich slack is measured."""
        return self.N ** (-self.eps)


@dataclass(frozen=True)
class GapReport:
    exact: int
    lower: float
    upper: float
    slack_lower: float
    slack_upper: float
    needed_C: float
    edge: bool


def gap_sandwich_report(lambdas, config: CountingConfig) -> GapReport:
    """Exact count on ``(-w, w)`` against smoothed counts at ``eta1 -+ l1``.

    ``slack_lower = exact - lower`` and ``slack_upper = upper - exact``; the
    sandwich holds with constant ``C`` when both are ``>= -C N^{-eps}``.
    ``needed_C`` is the smallest such ``C`` for this spectrum.
    """
    lam = np.asarray(lambdas, dtype=float)
    w = config.w
    exact = eig_count(lam, -w, w)
    lo = smoothed_count(lam, w, config.eta1 - config.l1)
    hi = smoothed_count(lam, w, config.eta1 + config.l1)
    sl, su = exact - lo, hi - exact
    need = max(0.0, -sl, -su) / config.bound_scale
    edge = bool(np.any(np.isclose(np.abs(lam), w, rtol=1e-12, atol=0.0)))
    return GapReport(exact, lo, hi, sl, su, need, edge)


@dataclass(frozen=True)
class GapResult:
    probability: float
    stderr: float
    bracket_lo: float
    bracket_hi: float
    slack: float
    trials: int
    reports: list = field(default_factory=list, repr=False)


def gap_probability(params: EnsembleParams, ensemble, w, trials, seed=None, config=None, gamma=1.0, t=None, window_scale=1.0):
    """Fraction of trials with no eigenvalue in ``(-w', w')``, ``w' = w * window_scale``.

    Also returns the smoothed bracket ``E q(Tr_{eta1+l1})`` and
    ``E q(Tr_{eta1-l1})`` and the observed slack
    ``max(0, lo - p, p - hi)``.
    """
    if trials < 1:
        raise DomainError("need at least one trial")
    seed = params.seed if seed is None else seed
    ww = w * window_scale
    cfg = config if config is not None else CountingConfig(params.N, r=2 * params.N * ww)
    if cfg.w != ww:
        cfg = CountingConfig(cfg.N, r=cfg.r, eps=cfg.eps, w=ww)
    if ensemble == "interpolant" and t is None:
        t = coupling_time(params).t
    empty, qlo, qhi, reps = 0, 0.0, 0.0, []
    for k in range(trials):
        s = np.linalg.svd(ensemble_block(params, ensemble, trial_rng(seed, k), gamma, t), compute_uv=False)
        lam = np.concatenate([-s, s])
        rep = gap_sandwich_report(lam, cfg)
        reps.append(rep)
        empty += rep.exact == 0
        qlo += smoothing_q(rep.upper)
        qhi += smoothing_q(rep.lower)
    p = empty / trials
    lo, hi = qlo / trials, qhi / trials
    return GapResult(p, math.sqrt(p * (1 - p) / trials), lo, hi, max(0.0, lo - p, p - hi), trials, reps)


@dataclass(frozen=True)
class WeylCheck:
    s: tuple
    lambdas: tuple
    monotone: bool
    weyl_bound_ok: bool
    max_increase: float


def weyl_check(X_block, W_block, s_values, tol=1e-12) -> WeylCheck:
    """Smallest positive eigenvalue of the symmetrization of ``X + sqrt(s) W`` along sorted ``s``.

    ``monotone`` records whether it is nonincreasing in ``s``.  ``weyl_bound_ok``
    checks the two-sided perturbation bound
    ``|lambda(s_1) - lambda(s_2)| <= |sqrt(s_2) - sqrt(s_1)| ||W||``, which
    always holds.
    """
    ss = np.sort(np.asarray(s_values, dtype=float))
    if np.any(ss < 0):
        raise DomainError("s must be nonnegative")
    x = np.asarray(X_block, dtype=float)
    wb = np.asarray(W_block, dtype=float)
    lam = np.array([smallest_singular(x + math.sqrt(s) * wb) for s in ss])
    norm_w = float(np.linalg.norm(wb, 2))
    d = np.diff(lam)
    bound = np.diff(np.sqrt(ss)) * norm_w
    return WeylCheck(
        tuple(ss.tolist()),
        tuple(lam.tolist()),
        bool(np.all(d <= tol)),
        bool(np.all(np.abs(d) <= bound + tol)),
        float(d.max(initial=0.0)),
    )


def ks_distance(samples, cdf=lsv_limit_cdf):
    x = np.asarray(samples, dtype=float)
    x = x[np.isfinite(x)]
    return float(sps.kstest(x, cdf).statistic)


def ks_two_sample(x, y):
    return float(sps.ks_2samp(np.asarray(x, float), np.asarray(y, float)).statistic)


def ecdf(samples, grid):
    """Right-continuous empirical CDF of ``samples`` evaluated on ``grid``."""
    s = np.sort(np.asarray(samples, dtype=float))
    return np.searchsorted(s, np.asarray(grid, dtype=float), side="right") / s.size
