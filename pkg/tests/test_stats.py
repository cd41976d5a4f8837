import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from levysv.ensemble import build_levy, gaussian_iid, split_b_removal, symmetrize
from levysv.errors import ConstraintError, DomainError
from levysv.limit import xi
from levysv.params import EnsembleParams
from levysv.rng import make_rng, trial_rng
from levysv.spectral import decompose, smallest_positive_eig
from levysv.stats import (
    CountingConfig,
    bottom_k,
    deloc_reference,
    delocalization_sup,
    ecdf,
    eig_count,
    ensemble_block,
    gap_probability,
    gap_sandwich_report,
    ks_distance,
    ks_two_sample,
    lsv_experiment,
    lsv_limit_cdf,
    smoothed_count,
    smoothing_q,
    weyl_check,
)

seeds = st.integers(0, 2**32 - 1)


def test_lsv_limit_cdf_examples():
    assert lsv_limit_cdf(0.0) == 0.0
    assert lsv_limit_cdf(1.0) == pytest.approx(0.776869839851570, abs=1e-12)
    assert lsv_limit_cdf(40.0) == 1.0
    with pytest.raises(DomainError):
        lsv_limit_cdf(-0.1)


@given(st.lists(st.floats(0, 50), min_size=1, max_size=50), st.lists(st.floats(-1, 60), min_size=2, max_size=20))
def test_ecdf_step_function(samples, grid):
    g = np.sort(grid)
    F = ecdf(samples, g)
    assert np.all(np.diff(F) >= 0) and F.min() >= 0 and F.max() <= 1
    # right-continuity: the value at a sample point counts that point
    assert ecdf(samples, [max(samples)])[0] == 1.0


def test_bottom_k_examples():
    dec = decompose(symmetrize(np.diag([3.0, 1.0, 2.0])))
    assert np.allclose(bottom_k(dec, 2), [3.0, 6.0], atol=1e-14)
    D = make_rng(1).standard_normal((10, 10))
    dec = decompose(symmetrize(D))
    assert bottom_k(dec, 1)[0] == pytest.approx(10 * smallest_positive_eig(dec), rel=1e-15)
    for k in (0, 11):
        with pytest.raises(DomainError):
            bottom_k(dec, k)


@settings(max_examples=20)
@given(st.integers(2, 16), seeds, st.floats(0.1, 10))
def test_bottom_k_scaling_covariance(n, seed, c):
    D = make_rng(seed).standard_normal((n, n))
    a = bottom_k(decompose(symmetrize(D)), n)
    b = bottom_k(decompose(symmetrize(c * D)), n)
    assert np.allclose(b, c * a, rtol=1e-10, atol=1e-12)


@pytest.mark.slow
def test_bottom_three_levy_vs_gaussian():
    prm = EnsembleParams(N=256, a=1.5)
    L, G = [], []
    for k in range(500):
        s = np.linalg.svd(ensemble_block(prm, "levy", trial_rng(1, k)), compute_uv=False)[::-1][:3]
        L.append(256 * xi(1.5) * s)
        s = np.linalg.svd(ensemble_block(prm, "gaussian", trial_rng(2, k)), compute_uv=False)[::-1][:3]
        G.append(256 * s)
    L, G = np.array(L), np.array(G)
    assert max(ks_two_sample(L[:, j], G[:, j]) for j in range(3)) <= 0.12


def test_delocalization_identity():
    sup, cnt = delocalization_sup(decompose(symmetrize(np.eye(4))), 2.0)
    assert sup == pytest.approx(1 / math.sqrt(2), abs=1e-15) and cnt == 8


def test_delocalization_empty_window():
    assert delocalization_sup(decompose(symmetrize(np.eye(3))), 0.5) == (None, 0)
    with pytest.raises(DomainError):
        delocalization_sup(decompose(symmetrize(np.eye(3))), 0.0)


def test_delocalization_matches_full_eigenvectors():
    H = symmetrize(make_rng(2).standard_normal((12, 12)) / math.sqrt(12))
    w, v = np.linalg.eigh(H.data)
    sel = np.abs(w) <= 0.5
    sup, cnt = delocalization_sup(decompose(H), 0.5)
    assert cnt == sel.sum()
    assert sup == pytest.approx(np.abs(v[:, sel]).max(), abs=1e-12)


def test_deloc_reference_values():
    assert deloc_reference(512, 10) == pytest.approx(math.sqrt(math.log(10240) / 512))


@pytest.mark.xfail(strict=True, reason="Gaussian N = 512 sup-norms sit near 0.13 (sqrt(log N / N) scale)")
def test_gaussian_delocalization_power_bound():
    hits = 0
    for k in range(20):
        sup, _ = delocalization_sup(decompose(symmetrize(gaussian_iid(512, trial_rng(3, k)).data)), 0.1)
        hits += sup <= 512 ** (0.1 - 0.5)
    assert hits >= 19


def test_eig_count_examples():
    assert eig_count([], -1, 1) == 0
    assert eig_count([-1.0, 0.0, 1.0], -0.5, 0.5) == 1
    assert eig_count([-1.0, 0.0, 1.0], -1.0, 1.0) == 1
    with pytest.raises(DomainError):
        eig_count([0.0], 1, 0)


def test_smoothed_count_examples():
    assert smoothed_count([0.0], 0.3, 0.1) == pytest.approx(2 / math.pi * math.atan(3.0), abs=1e-15)
    assert smoothed_count([0.1], 0.5, 1e-9) == pytest.approx(1.0, abs=1e-8)
    lam = [-2.0, -0.9, 0.05, 1.5]
    assert abs(smoothed_count(lam, 0.3, 1e-6) - eig_count(lam, -0.3, 0.3)) < 0.01
    with pytest.raises(DomainError):
        smoothed_count(lam, 0.0, 0.1)


@settings(max_examples=20)
@given(seeds, st.floats(0.05, 1.0), st.floats(0.01, 0.5))
def test_smoothed_count_matches_quadrature(seed, w, eta):
    lam = make_rng(seed).standard_normal(6)
    f = lambda x: np.sum(eta / ((lam - x) ** 2 + eta**2)) / np.pi
    pts = [l for l in lam if -w < l < w]
    ref = integrate.quad(f, -w, w, points=pts or None, epsabs=1e-13, epsrel=1e-13, limit=200)[0]
    assert abs(smoothed_count(lam, w, eta) - ref) < 1e-10


@settings(max_examples=30)
@given(seeds, st.integers(1, 30), st.floats(1e-4, 2), st.floats(1e-4, 1))
def test_smoothed_count_bounds_and_monotone(seed, n, w, eta):
    lam = make_rng(seed).standard_normal(2 * n)
    v = smoothed_count(lam, w, eta)
    assert 0 <= v <= 2 * n
    assert smoothed_count(lam, 1.5 * w, eta) >= v - 1e-12


@given(st.floats(0.01, 0.5), st.floats(0.01, 0.2), st.floats(0.01, 3))
def test_smoothed_count_decreases_with_distance(w, eta, d):
    near = smoothed_count([w + d], w, eta)
    far = smoothed_count([w + 2 * d], w, eta)
    assert far <= near


def test_smoothing_q_shape():
    assert smoothing_q(0.0) == 1.0
    grid = np.arange(-1000, 1001) * 1e-3
    q = smoothing_q(grid)
    assert np.all((q >= 0) & (q <= 1))
    assert np.array_equal(q, q[::-1])
    assert np.all(q[np.abs(grid) < 1 / 9] == 1.0)
    assert np.all(q[np.abs(grid) >= 2 / 9] == 0.0)
    mid = smoothing_q(np.linspace(1 / 9, 2 / 9, 100))
    assert np.all(np.diff(mid) <= 0)


def test_smoothing_q_derivatives_bounded():
    x = np.linspace(0, 0.3, 300_001)
    h = x[1] - x[0]
    d = smoothing_q(x)
    bounds = []
    for _ in range(3):
        d = np.diff(d) / h
        bounds.append(np.abs(d).max())
    assert all(np.isfinite(bounds))
    assert bounds[0] < 30


def test_counting_config():
    cfg = CountingConfig(256)
    assert cfg.w == pytest.approx(1 / 512)
    assert 0 < cfg.l1 < cfg.eta1
    assert cfg.bound_scale == pytest.approx(256**-0.01)
    with pytest.raises(ConstraintError):
        CountingConfig(256, eps=1.5)
    with pytest.raises(DomainError):
        CountingConfig(256, r=0.0)


def test_sandwich_far_spectrum():
    cfg = CountingConfig(64)
    rep = gap_sandwich_report(np.array([-3.0, -2.0, 2.0, 3.0]), cfg)
    assert rep.exact == 0 and rep.lower < 1e-4 and rep.upper < 1e-4
    assert rep.needed_C < 1e-3 and not rep.edge


def test_sandwich_edge_case():
    # each eigenvalue on the edge contributes close to 1/2 once eta << w
    cfg = CountingConfig(64, eps=1.0)
    rep = gap_sandwich_report(np.array([-cfg.w, cfg.w]), cfg)
    assert rep.edge and rep.exact == 0
    assert rep.lower == pytest.approx(1.0, abs=0.01)
    assert rep.upper == pytest.approx(1.0, abs=0.01)


def test_gap_probability_tiny_window():
    prm = EnsembleParams(N=32, a=1.5)
    res = gap_probability(prm, "gaussian", 1e-9, 20, seed=1, config=CountingConfig(32, eps=1.0))
    assert res.probability == 1.0 and res.trials == 20


def test_gap_probability_bracket_fields():
    prm = EnsembleParams(N=64, a=1.5)
    res = gap_probability(prm, "gaussian", 1 / 128, 100, seed=3, config=CountingConfig(64, eps=1.0))
    assert 0 <= res.bracket_lo <= res.bracket_hi <= 1
    assert res.slack == max(0.0, res.bracket_lo - res.probability, res.probability - res.bracket_hi)
    assert len(res.reports) == 100
    assert res.probability == np.mean([r.exact == 0 for r in res.reports])


def test_weyl_two_sided_bound_always_holds():
    prm = EnsembleParams(N=24, a=1.5)
    for k in range(30):
        rng = trial_rng(5, k)
        X, _ = split_b_removal(symmetrize(build_levy(prm, rng)), prm)
        W = gaussian_iid(24, rng).data
        assert weyl_check(X.block(), W, [0.0, 0.01, 0.05, 0.1, 0.3]).weyl_bound_ok


@pytest.mark.xfail(strict=True, reason="about half of coupled samples increase somewhere along s")
def test_weyl_coupled_monotone():
    prm = EnsembleParams(N=24, a=1.5)
    for k in range(30):
        rng = trial_rng(5, k)
        X, _ = split_b_removal(symmetrize(build_levy(prm, rng)), prm)
        W = gaussian_iid(24, rng).data
        assert weyl_check(X.block(), W, [0.0, 0.01, 0.05, 0.1, 0.3]).monotone


def test_lsv_experiment_small():
    prm = EnsembleParams(N=16, a=1.5, seed=4)
    out = lsv_experiment(prm, "gaussian", 5)
    assert [s.trial for s in out] == list(range(5))
    assert all(s.raw > 0 and s.scaled == pytest.approx(16 * s.raw) for s in out)
    again = lsv_experiment(prm, "gaussian", 5)
    assert [s.raw for s in again] == [s.raw for s in out]
    lev = lsv_experiment(prm, "levy", 3)
    assert all(s.scaled == pytest.approx(16 * xi(1.5) * s.raw) for s in lev)
    interp = lsv_experiment(prm, "interpolant", 3, gamma=0.5, s=0.1)
    assert all(s.raw >= 0 for s in interp)
    with pytest.raises(DomainError):
        lsv_experiment(prm, "gaussian", 0)


def test_ks_distance_sanity():
    rng = make_rng(0)
    u = rng.uniform(size=5000)
    # inverse transform sampling of the limit law
    r = -1 + np.sqrt(1 - 2 * np.log1p(-u))
    assert ks_distance(r) < 0.03
    assert ks_distance(np.append(r, np.nan)) == ks_distance(r)
