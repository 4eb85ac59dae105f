import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from gneitlab.errors import CDFUnavailable, DegenerateLadder, InvalidParams
from gneitlab.functional import jackknife_kstats
from gneitlab.geometry import GrowthSchedule
from gneitlab.stats import cumulant_compare, exponent_fit, ks_against, report

from golden import CHI2_KAPPA3


def test_ks_null_and_power():
    rng = np.random.default_rng(0)
    x = rng.standard_normal(10_000)
    stat, p = ks_against(x)
    assert p > 0.001
    ref = stats.kstest(x, "norm")
    assert stat == pytest.approx(ref.statistic, rel=1e-12)
    _, p = ks_against(x + 0.5)
    assert p < 1e-6


def test_ks_preconditions():
    with pytest.raises(InvalidParams):
        ks_against([])
    with pytest.raises(InvalidParams):
        ks_against(np.zeros(50))
    with pytest.raises(CDFUnavailable):
        ks_against(np.zeros(200), "rosenblatt")


def test_cumulant_compare_chi_square():
    rng = np.random.default_rng(1)
    y = (rng.standard_normal(200_000) ** 2 - 1) / math.sqrt(2)
    z = cumulant_compare(jackknife_kstats(y), {3: CHI2_KAPPA3, 4: 12.0})
    assert abs(z[3]) < 3


def test_cumulant_compare_rejects_mismatched_law():
    y = np.random.default_rng(2).standard_normal(20_000)
    z = cumulant_compare(jackknife_kstats(y), [0.0, 1.0, 2.5])
    assert abs(z[3]) > 5
    z = cumulant_compare(jackknife_kstats(y), {3: 0.0, 4: 0.0})
    assert abs(z[3]) < 4 and abs(z[4]) < 4


def test_exponent_fit_exact_power_law():
    t = np.array([32.0, 64.0, 128.0, 256.0])
    rows = [(ti, 7 * ti**2.84, 0.01 * 7 * ti**2.84) for ti in t]
    fit = exponent_fit(rows, GrowthSchedule())
    assert abs(fit.slope - 2.84) < 1e-10
    assert fit.r2 == pytest.approx(1.0)
    assert np.max(np.abs(fit.residuals)) < 1e-12


def test_exponent_fit_contaminated():
    t = np.geomspace(32, 512, 5)
    rows = [(ti, ti**1.4 * np.log(ti) ** 0.3, 1.0) for ti in t]
    assert abs(exponent_fit(rows).slope - 1.4) < 0.1


def test_exponent_fit_preconditions():
    with pytest.raises(DegenerateLadder):
        exponent_fit([(1, 1, 1), (2, 2, 1)])
    with pytest.raises(DegenerateLadder):
        exponent_fit([(4, 1, 1), (2, 2, 1), (8, 3, 1), (16, 4, 1)])


def test_report_layout():
    r = report("clt", 0.01, 0.05, True, p_value=0.3, z_scores={3: 1.0})
    assert set(r) == {"test", "statistic", "threshold", "pass", "p_value", "z_scores"}


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.2, 3.0))
def test_ks_invariant_under_monotone_transform(seed, power):
    x = np.random.default_rng(seed).standard_normal(300)
    s1, _ = ks_against(x)
    g = lambda v: np.sign(v) * np.abs(v) ** power
    ginv = lambda v: np.sign(v) * np.abs(v) ** (1 / power)
    s2, _ = ks_against(g(x), cdf=lambda v: stats.norm.cdf(ginv(v)))
    assert s2 == pytest.approx(s1, abs=1e-12)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.1, 10), st.floats(-5, 5))
def test_z_scores_affine_invariant(seed, a, b):
    y = np.random.default_rng(seed).gamma(3.0, size=400)
    z1 = cumulant_compare(jackknife_kstats(y), {3: 1.0, 4: 1.0})
    z2 = cumulant_compare(jackknife_kstats(a * y + b), {3: 1.0, 4: 1.0})
    assert z2[3] == pytest.approx(z1[3], rel=1e-8)
    assert z2[4] == pytest.approx(z1[4], rel=1e-8)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.5, 4.0), st.floats(0.01, 100))
def test_exponent_fit_exact_for_any_power(e, c):
    rows = [(t, c * t**e, 1.0) for t in (8.0, 16.0, 32.0, 64.0, 128.0)]
    fit = exponent_fit(rows)
    assert fit.slope == pytest.approx(e, abs=1e-10)
    assert 0.0 <= fit.r2 <= 1.0
