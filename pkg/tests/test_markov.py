"""Monte Carlo oracle tests.

The run-length simulator is validated against the step-by-step law three
ways: exact pattern frequencies on short chains, conditional click
frequencies on one long chain, and the lag-1 autocorrelation implied by the
transition probabilities.  The martingale identity and the coverage
machinery are exercised with deterministic seeds throughout.
"""
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qkdfluct import (MarkovClickModel, ParameterError, TrialReport,
                      coverage_test, martingale_verify, simulate_chain,
                      simulate_click_frequency, trial_report)


def test_model_validation():
    with pytest.raises(ParameterError):
        MarkovClickModel(1.1)
    with pytest.raises(ParameterError):
        MarkovClickModel(0.5, afterpulse_prob=1.0)
    with pytest.raises(ParameterError):
        MarkovClickModel(0.99, afterpulse_prob=0.04)  # stationary mean > 1
    with pytest.raises(ParameterError):
        MarkovClickModel(0.5, seed=-1)
    with pytest.raises(ParameterError):
        MarkovClickModel(0.5, seed=1.5)


@given(q=st.floats(1e-6, 0.5), p_ap=st.floats(0.0, 0.9))
def test_transition_probabilities_are_stationary(q, p_ap):
    model = MarkovClickModel(q, p_ap)
    p0 = model.p_click_after_noclick
    p1 = model.p_click_after_click
    d = model.stationary_mean
    # Stationary distribution of the two-state chain.
    assert p0 / (p0 + 1.0 - p1) == pytest.approx(d, rel=1e-12)
    # Flow balance between the states.
    assert (1.0 - d) * p0 == pytest.approx(d * (1.0 - p1), rel=1e-12)
    # A click adds p_ap worth of extra click probability to the next slot.
    assert p1 == pytest.approx(p0 + p_ap * (1.0 - p0), rel=1e-12)


def test_simulate_chain_shape_and_determinism():
    model = MarkovClickModel(0.1, 0.2, seed=11)
    bits = simulate_chain(model, 1000)
    assert bits.shape == (1000,)
    assert bits.dtype == np.uint8
    assert set(np.unique(bits)) <= {0, 1}
    assert np.array_equal(bits, simulate_chain(model, 1000))
    other = simulate_chain(MarkovClickModel(0.1, 0.2, seed=12), 1000)
    assert not np.array_equal(bits, other)


def test_simulate_chain_validation():
    model = MarkovClickModel(0.1)
    with pytest.raises(ParameterError):
        simulate_chain(model, 0)
    with pytest.raises(ParameterError):
        simulate_chain(model, 2.5)


def test_degenerate_chains():
    assert not simulate_chain(MarkovClickModel(0.0, 0.3, seed=1), 500).any()
    assert simulate_chain(MarkovClickModel(1.0, 0.0, seed=1), 500).all()
    cold = simulate_chain(MarkovClickModel(1.0, 0.0, seed=1, cold_start=True),
                          500)
    assert cold[0] == 0
    assert cold[1:].all()


def test_cold_start_first_slot_silent():
    model = MarkovClickModel(0.4, 0.3, seed=3, cold_start=True)
    for n in (1, 2, 50):
        assert simulate_chain(model, n)[0] == 0


def test_exact_three_slot_distribution():
    """Pattern frequencies over 3-slot chains match the step-by-step law
    computed directly from the transition matrix (5 sigma per pattern)."""
    model = MarkovClickModel(0.2, 0.5, seed=100)
    p0, p1 = model.p_click_after_noclick, model.p_click_after_click
    d = model.stationary_mean
    step = {0: {1: p0, 0: 1.0 - p0}, 1: {1: p1, 0: 1.0 - p1}}
    start = {1: d, 0: 1.0 - d}
    trials = 8000
    counts = {}
    for trial in range(trials):
        rng = np.random.default_rng((model.seed, trial))
        pattern = tuple(simulate_chain(model, 3, rng).tolist())
        counts[pattern] = counts.get(pattern, 0) + 1
    for pattern in [(a, b, c) for a in (0, 1) for b in (0, 1) for c in (0, 1)]:
        prob = (start[pattern[0]] * step[pattern[0]][pattern[1]]
                * step[pattern[1]][pattern[2]])
        observed = counts.get(pattern, 0) / trials
        sigma = math.sqrt(prob * (1.0 - prob) / trials)
        assert abs(observed - prob) <= 5.0 * sigma, (pattern, observed, prob)


def test_conditional_click_frequencies_match_transitions():
    model = MarkovClickModel(0.05, 0.3, seed=7)
    n = 200_000
    bits = simulate_chain(model, n).astype(np.int64)
    prev, cur = bits[:-1], bits[1:]
    n1 = int(prev.sum())
    n0 = prev.size - n1
    p1_hat = float(cur[prev == 1].mean())
    p0_hat = float(cur[prev == 0].mean())
    p0, p1 = model.p_click_after_noclick, model.p_click_after_click
    assert abs(p1_hat - p1) <= 5.0 * math.sqrt(p1 * (1.0 - p1) / n1)
    assert abs(p0_hat - p0) <= 5.0 * math.sqrt(p0 * (1.0 - p0) / n0)


def test_iid_chain_has_no_lag_one_correlation():
    model = MarkovClickModel(0.3, 0.0, seed=21)
    n = 100_000
    bits = simulate_chain(model, n).astype(np.float64)
    r = float(np.corrcoef(bits[:-1], bits[1:])[0, 1])
    assert abs(r) <= 4.0 / math.sqrt(n)


def test_correlated_chain_lag_one_matches_rho():
    model = MarkovClickModel(0.1, 0.2, seed=22)
    n = 200_000
    bits = simulate_chain(model, n).astype(np.float64)
    r = float(np.corrcoef(bits[:-1], bits[1:])[0, 1])
    rho = model.p_click_after_click - model.p_click_after_noclick
    assert abs(r - rho) <= 0.02


def test_stationary_mean_on_long_chain():
    model = MarkovClickModel(0.01, 0.04, seed=9)
    n = 1_000_000
    x_bar = simulate_click_frequency(model, n)
    d = model.stationary_mean
    rho = model.p_click_after_click - model.p_click_after_noclick
    sigma = math.sqrt(d * (1.0 - d) * (1.0 + rho) / (1.0 - rho) / n)
    assert abs(x_bar - d) <= 5.0 * sigma


def test_click_frequency_matches_materialized_bits():
    for q, p_ap, seed in ((0.01, 0.04, 0), (0.3, 0.5, 5), (0.001, 0.0, 9)):
        model = MarkovClickModel(q, p_ap, seed=seed)
        for n in (1, 7, 1000, 12345):
            freq = simulate_click_frequency(model, n,
                                            np.random.default_rng(42))
            bits = simulate_chain(model, n, np.random.default_rng(42))
            assert freq == float(bits.mean()), (q, p_ap, n)


def test_martingale_empirical_transition_is_exact():
    model = MarkovClickModel(0.01, 0.04, seed=13)
    check = martingale_verify(model, 10_000, 100, transition="empirical")
    assert check.max_abs_residual < 1e-12
    assert check.prefix_lengths.min() >= 1
    assert check.prefix_lengths.max() == 10_000
    assert check.prefix_lengths.size <= 100


def test_martingale_model_transition_decays():
    model = MarkovClickModel(0.01, 0.04, seed=13)
    check = martingale_verify(model, 10_000, 100, transition="model")
    ks = check.prefix_lengths
    res = np.abs(check.residuals)
    # The one-step residual is |p_state - M_k| / (k + 1) <= 1 / (k + 1).
    assert np.all(res <= 1.0 / ks)
    assert res[-1] < 5e-6


def test_martingale_validation():
    model = MarkovClickModel(0.1)
    with pytest.raises(ParameterError):
        martingale_verify(model, 100, 0)
    with pytest.raises(ParameterError):
        martingale_verify(model, 100, 10, transition="bogus")


def test_coverage_trivial_radius_never_fails():
    # epsilon = 2 e^-50 makes the Azuma radius exactly 1, so the interval
    # always contains the truth.
    eps = 2.0 * math.exp(-50.0)
    model = MarkovClickModel(0.3, 0.0, seed=1)
    assert coverage_test(model, 100, 100, eps, "AI") == 0.0


def test_coverage_sound_methods_quick():
    correlated = MarkovClickModel(0.01, 0.04, seed=2026)
    independent = MarkovClickModel(0.01, 0.0, seed=2026)
    threshold = 0.1 + 3.0 * math.sqrt(0.1 / 200)
    assert coverage_test(correlated, 20_000, 200, 0.1, "AI") <= threshold
    assert coverage_test(independent, 20_000, 200, 0.1, "LLN") <= threshold
    assert coverage_test(independent, 20_000, 200, 0.1, "HI") <= threshold


def test_coverage_sea_undersized_on_correlated_chain():
    """The Gaussian standard-error interval ignores correlations, so on a
    strongly after-pulsed chain its failure rate blows past the budget."""
    model = MarkovClickModel(0.01, 0.2, seed=77)
    rate = coverage_test(model, 10_000, 400, 1e-2, "SEA")
    assert rate > 0.02


def test_coverage_validation():
    model = MarkovClickModel(0.1)
    with pytest.raises(ParameterError):
        coverage_test(model, 1000, 99, 0.1, "AI")
    with pytest.raises(ParameterError):
        coverage_test(model, 1000, 100, 0.1, "XX")


def test_trial_report_matches_fast_path():
    model = MarkovClickModel(0.02, 0.1, seed=5)
    report = trial_report(model, 5000, trial_index=7, epsilon=1e-2,
                          prefix_checks=50)
    fast = simulate_click_frequency(model, 5000,
                                    np.random.default_rng((5, 7)))
    assert report.x_bar == fast
    assert set(report.intervals) == {"SEA", "LLN", "HI", "CB", "AI"}
    truth = model.stationary_mean
    for method, (lo, hi) in report.intervals.items():
        assert lo <= hi
        assert report.covered[method] == (lo <= truth <= hi)
    assert report.martingale_residuals is not None
    assert 1 <= report.martingale_residuals.size <= 50


def test_trial_report_validation():
    model = MarkovClickModel(0.02, 0.1, seed=5)
    with pytest.raises(ParameterError):
        trial_report(model, 100, trial_index=-1, epsilon=0.1)
    with pytest.raises(ParameterError):
        TrialReport(trial_index=0, n=10, x_bar=0.1, intervals={},
                    covered={}, martingale_residuals=np.array([]))
