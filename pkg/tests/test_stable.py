import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats

from levysv.errors import DomainError
from levysv.params import DeformationSpec, EnsembleParams
from levysv.rng import make_rng
from levysv.stable import (
    StableLaw,
    entry_tail_prob,
    sample_entry,
    sample_stable,
    sigma_for,
    sum_cdf,
    tail_envelope,
    truncated_moment,
)

# P(|Z| > t) for the normalised a = 1.5 law; independent oracle (mpmath quadosc)
TAIL_15 = {5: 0.124259938531711, 10: 0.0360250542979305, 20: 0.0116994083962813}
# P(|J + Z| >= x), J Rademacher, same law; mpmath oracle
DEFORMED_TAIL_15 = {3.0: 0.31918296380337, 10.0: 0.0369151433308697}


def test_sigma_cauchy():
    assert sigma_for(1.0) == pytest.approx(math.pi / 2, rel=1e-15)


def test_sigma_regression_values():
    # 30-digit mpmath evaluations of the closed form
    assert sigma_for(0.5) == pytest.approx(1.5707963267948966192, rel=1e-14)
    assert sigma_for(1.5) == pytest.approx(1.8452701486440284191, rel=1e-14)


@pytest.mark.parametrize("a", [0.0, 2.0, -0.5, 2.5])
def test_sigma_rejects_out_of_range(a):
    with pytest.raises(DomainError):
        sigma_for(a)


def test_sigma_finite_near_two():
    v = sigma_for(1.9999)
    assert math.isfinite(v) and v > sigma_for(1.99) > sigma_for(1.9)


@given(st.floats(0.05, 1.95))
def test_sigma_continuous(a):
    h = 1e-7
    assert abs(sigma_for(a + h) - sigma_for(a)) < 1e-4 * sigma_for(a)


def test_cauchy_specialization_ks():
    x = sample_stable(StableLaw(1.0, 2.5), 100_000, make_rng(1))
    assert stats.kstest(x, stats.cauchy(scale=2.5).cdf).statistic < 0.02


@pytest.mark.parametrize("a", [0.7, 1.0, 1.5, 1.9])
def test_median_near_zero(a):
    law = StableLaw.normalized(a)
    x = sample_stable(law, 100_000, make_rng(2))
    assert abs(np.median(x)) < 0.05 * law.sigma


def test_symmetry_signed_rank():
    x = sample_stable(StableLaw.normalized(1.3), 100_000, make_rng(3))
    assert stats.wilcoxon(x).pvalue > 0.01


def test_seed_determinism():
    law = StableLaw.normalized(1.5)
    assert np.array_equal(sample_stable(law, 1000, make_rng(7)), sample_stable(law, 1000, make_rng(7)))


def test_tail_frequencies_match_inversion_oracle():
    law = StableLaw.normalized(1.5)
    x = np.abs(sample_stable(law, 400_000, make_rng(4)))
    for t, p in TAIL_15.items():
        se = math.sqrt(p * (1 - p) / x.size)
        assert abs(np.mean(x > t) - p) < 4 * se


def test_cdf_inversion_against_oracle():
    s = sigma_for(1.5)
    for t, p in TAIL_15.items():
        assert 2 * (1 - sum_cdf(t, 1.5, s, DeformationSpec("none"))) == pytest.approx(p, abs=1e-10)
    prm = EnsembleParams(N=1, a=1.5)
    for x, p in DEFORMED_TAIL_15.items():
        assert entry_tail_prob(x, prm) == pytest.approx(p, abs=1e-10)


def test_entry_with_trivial_deformation_is_stable_law():
    prm = EnsembleParams(N=1, a=1.5, deformation=DeformationSpec("none"))
    x = sample_entry(prm, 50_000, make_rng(5))
    y = sample_stable(StableLaw.normalized(1.5), 50_000, make_rng(6))
    assert stats.ks_2samp(x, y).statistic < 0.015


def test_entry_mean_zero():
    prm = EnsembleParams(N=64, a=1.5)
    x = sample_entry(prm, 100_000, make_rng(8))
    # heavy tails: the sample mean fluctuates on the scale n^{1/a - 1} N^{-1/a}
    assert abs(x.mean()) < 0.2 * 64 ** (-1 / 1.5)


def test_tail_envelope_stable_across_N():
    fitted = []
    for N in (128, 512):
        prm = EnsembleParams(N=N, a=1.5)
        d = np.abs(sample_entry(prm, 200_000, make_rng(N)))
        ts = np.geomspace(0.3, 30, 8) * N ** (-1 / 1.5)
        c1, c2, ratios = tail_envelope(d, N, 1.5, ts)
        assert 0 < c1 <= c2 < np.inf
        fitted.append((c1, c2))
    (a1, a2), (b1, b2) = fitted
    assert 0.5 < a1 / b1 < 2 and 0.5 < a2 / b2 < 2


def test_truncated_variance_scaling():
    a = 1.5
    vals = []
    for N in (128, 256, 512):
        prm = EnsembleParams(N=N, a=a)
        est = truncated_moment(prm, N ** (-prm.nu), 2, 1_000_000, make_rng(N))
        vals.append(N * est / N ** (prm.nu * (a - 2)))
    assert max(vals) / min(vals) < 2


def test_truncated_cauchy_second_moment_closed_form():
    N, R = 4, 3.0
    prm = EnsembleParams(N=N, a=1.0, b=0.6, nu=0.4, rho=0.3, deformation=DeformationSpec("none"))
    est, se = truncated_moment(prm, R, 2, 1_000_000, make_rng(11), return_stderr=True)
    s = math.pi / 2 / N  # Cauchy scale of D_11 = Z / N
    exact = 2 * s / math.pi * (R - s * math.atan(R / s))
    assert abs(est - exact) < 4 * se


def test_truncated_moment_preconditions():
    prm = EnsembleParams(N=16, a=1.5)
    rng = make_rng(0)
    with pytest.raises(DomainError):
        truncated_moment(prm, 1.0, 1.5, 10, rng)
    with pytest.raises(DomainError):
        truncated_moment(prm, np.inf, 2, 10, rng)
    with pytest.raises(DomainError):
        truncated_moment(prm, 0.5 * 16 ** (-1 / 1.5), 2, 10, rng)
