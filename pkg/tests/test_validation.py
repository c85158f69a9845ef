import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats
from scipy.stats.contingency import association

from causal_twin.classifiers import GBT, GbtParams, train
from causal_twin.scm import sample
from causal_twin.validation import (ValidationError, chi2_rmsea, cramers_v, degrees_of_freedom,
                                    ks_2samp, parameter_count, validate_twin)

# Frozen from an independent hand evaluation:
# chi2 = (N-1) [ln|Sigma| - ln|S| + tr(Sigma^-1 S) - p] with S = I, Sigma = [[1, .5], [.5, 1]]
#      = 100 [ln 0.75 + 2/0.75 - 2] = 37.898459...
# RMSEA = sqrt((chi2 - 1) / (1 * 100)) = 0.607441...
CHI2_ORACLE = 37.898459
RMSEA_ORACLE = 0.607441


def test_chi2_rmsea_hand_example():
    fit = chi2_rmsea(np.eye(2), np.array([[1, 0.5], [0.5, 1]]), 101, 1)
    assert fit.chi2 == pytest.approx(CHI2_ORACLE, abs=1e-5)
    assert fit.rmsea == pytest.approx(RMSEA_ORACLE, abs=1e-5)


def test_perfect_fit_is_zero():
    s = np.array([[2.0, 0.3], [0.3, 1.0]])
    fit = chi2_rmsea(s, s.copy(), 50, 3)
    assert fit.chi2 == 0.0 and fit.rmsea == 0.0


def test_rmsea_clamped_when_chi2_below_df():
    s = np.array([[1.0, 0.01], [0.01, 1.0]])
    fit = chi2_rmsea(s, np.eye(2), 100, 5)
    assert 0 < fit.chi2 < 5 and fit.rmsea == 0.0


@pytest.mark.parametrize("s, sigma, n, df", [
    (np.array([[1.0, 2.0], [2.0, 1.0]]), np.eye(2), 100, 1),   # S not SPD
    (np.eye(2), np.eye(3), 100, 1),
    (np.eye(2), np.array([[1.0, 0.2], [0.3, 1.0]]), 100, 1),   # asymmetric
    (np.eye(2), np.eye(2), 1, 1),
    (np.eye(2), np.eye(2), 100, 0),
])
def test_chi2_rmsea_rejects_bad_input(s, sigma, n, df):
    with pytest.raises(ValidationError):
        chi2_rmsea(s, sigma, n, df)


def test_singular_model_covariance_gets_ridge(caplog):
    sigma = np.array([[1.0, 1.0], [1.0, 1.0]])
    fit = chi2_rmsea(np.eye(2), sigma, 100, 1)
    assert math.isfinite(fit.chi2)
    assert "ridge" in caplog.text


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.integers(5, 200), st.integers(5, 200))
def test_ks_matches_scipy(seed, n, m):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=n)
    b = rng.normal(0.3, 1.2, size=m)
    d, p = ks_2samp(a, b)
    assert d == pytest.approx(stats.ks_2samp(a, b).statistic, abs=1e-12)
    # p-value from the limiting Kolmogorov distribution
    assert p == pytest.approx(stats.kstwobign.sf(d * math.sqrt(n * m / (n + m))), rel=1e-12)


def test_ks_with_ties():
    a = np.array([0, 0, 1, 1, 1, 2.0])
    b = np.array([0, 1, 2, 2, 2, 2.0])
    assert ks_2samp(a, b)[0] == pytest.approx(stats.ks_2samp(a, b).statistic)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.integers(2, 5))
def test_cramers_v_matches_scipy(seed, k):
    rng = np.random.default_rng(seed)
    a = rng.integers(0, k, 150)
    b = rng.integers(0, k, 120)
    table = np.vstack([np.bincount(a, minlength=k), np.bincount(b, minlength=k)])
    table = table[:, table.sum(0) > 0]
    if table.shape[1] < 2:
        return
    ref = association(table, method="cramer", correction=False)
    assert cramers_v(a, b, k) == pytest.approx(ref, abs=1e-12)


def test_degrees_of_freedom(toy_scm):
    p = len(toy_scm.names)
    assert degrees_of_freedom(toy_scm) == p * (p + 1) // 2 - parameter_count(toy_scm) or \
        degrees_of_freedom(toy_scm) == 1


def test_validate_twin_accepts_own_twin(toy, toy_scm):
    model = train(toy, "y", GBT, GbtParams(n_rounds=15, max_depth=2))
    valid = sample(toy_scm, 400, 99)
    rep = validate_twin(toy_scm, toy, valid, [model], "y", n_mc=20_000)
    assert rep.fit.rmsea <= 0.08
    assert all(m.passed for m in rep.marginals)
    assert rep.predictive[0].gap["f1"] < 0.05


def test_validation_report_csv(toy, toy_scm, tmp_path):
    rep = validate_twin(toy_scm, toy, n_mc=5000)
    p = tmp_path / "v.csv"
    rep.to_csv(p)
    lines = p.read_text().splitlines()
    assert lines[0] == "tier,item,statistic,threshold,pass"
    assert lines[-1].startswith("summary,accepted")
