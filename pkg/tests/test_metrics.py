import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from ppcokrig import DomainError, alci95, coverage95, crps_empirical, nsme, rmspe, summarize
from ppcokrig.metrics import mean_crps, report


def test_rmspe():
    y = np.array([[1.0, 2.0], [3.0, 4.0]])
    assert rmspe(y, y) == 0.0
    assert rmspe(np.array([1.0, -1, 1, -1]), np.zeros(4)) == 1.0
    assert rmspe([[3.0]], [[0.0]]) == 3.0
    with pytest.raises(DomainError):
        rmspe(np.empty(0), np.empty(0))
    with pytest.raises(DomainError):
        rmspe(np.zeros(3), np.zeros(4))


def test_coverage_and_length():
    truth = np.array([0.0, 1.0, 2.0])
    assert coverage95(truth - 1, truth + 1, truth) == 1.0
    assert coverage95(truth, truth, truth) == 1.0
    assert alci95(truth, truth) == 0.0
    assert alci95(np.array([0.0, 1.0]), np.array([0.2, 1.4])) == pytest.approx(0.3)
    assert coverage95(np.array([0.0, 5.0]), np.array([1.0, 6.0]), np.array([0.5, 7.0])) == 0.5
    with pytest.raises(DomainError):
        alci95(np.empty(0), np.empty(0))


def test_crps_examples():
    assert crps_empirical([1.0, 1.0, 1.0], 1.0) == 0.0
    assert crps_empirical([0.0, 2.0], 1.0) == 0.5
    assert crps_empirical([3.5], -1.0) == 4.5


def crps_pairs(x, y):
    x = np.asarray(x, dtype=float)
    return np.mean(np.abs(x - y)) - 0.5 * np.mean(np.abs(x[:, None] - x[None, :]))


@settings(max_examples=80, deadline=None)
@given(x=arrays(np.float64, st.integers(1, 40), elements=st.floats(-1e3, 1e3)),
       y=st.floats(-1e3, 1e3))
def test_crps_matches_pairwise_and_bounded(x, y):
    c = crps_empirical(x, y)
    assert c == pytest.approx(crps_pairs(x, y), rel=1e-9, abs=1e-9)
    assert c <= np.mean(np.abs(x - y)) + 1e-9
    assert c >= -1e-9


def test_nsme():
    y = np.array([[1.0, 3.0], [2.0, 5.0]])
    assert nsme(y, y, [0.0, 0.0]) == 1.0
    assert nsme(np.array([0.0, 2.0]), np.array([1.0, 1.0]), 0.0) == 0.5
    # conventional: D = sum (y - ybar)^2 = 2
    assert nsme(np.array([0.0, 2.0]), np.array([1.0, 1.0]), 0.0, "conventional") == 0.0
    with pytest.raises(DomainError):
        nsme(np.zeros(2), np.ones(2), 0.0)
    with pytest.raises(DomainError):
        nsme(np.zeros(2), np.ones(2), 0.0, "other")


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 30))
def test_rmspe_permutation_invariant(seed, n):
    rng = np.random.default_rng(seed)
    m, y = rng.standard_normal(n), rng.standard_normal(n)
    p = rng.permutation(n)
    assert rmspe(m[p], y[p]) == pytest.approx(rmspe(m, y), rel=1e-12)


def test_constant_draw_summary_metrics():
    s = summarize(np.full((30, 3), 2.5))
    truth = np.full(3, 2.5)
    assert coverage95(s.lower, s.upper, truth) == 1.0
    assert alci95(s.lower, s.upper) == 0.0


def test_report_keys():
    rng = np.random.default_rng(0)
    draws = rng.standard_normal((50, 4, 2))
    truth = rng.standard_normal((4, 2))
    mean = draws.mean(axis=0)
    lo, hi = np.quantile(draws, [0.025, 0.975], axis=0)
    rep = report(mean, lo, hi, truth, draws=draws, train_mean=np.zeros(2),
                 nsme_denominator="conventional")
    assert list(rep) == ["rmspe", "cvg95", "alci95", "crps", "nsme", "nsme_denominator"]
    assert rep["crps"] == pytest.approx(np.mean([crps_pairs(draws[:, i, j], truth[i, j])
                                                 for i in range(4) for j in range(2)]))
    assert rep["crps"] == pytest.approx(mean_crps(draws, truth))
