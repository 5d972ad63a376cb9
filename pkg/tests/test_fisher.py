import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from qsense.errors import (
    DegenerateModelError,
    DomainError,
    InsensitiveObservableError,
    InvalidInputError,
)
from qsense.fisher import (
    DifferentiationConfig,
    ProbabilityDistribution,
    bernoulli_model,
    binned_model,
    binomial_model,
    classical_fidelity,
    constant_model,
    cramer_rao_bound,
    derivative,
    error_propagation,
    fidelity_expansion_check,
    fisher_information,
    poisson_model,
)

dist = ProbabilityDistribution.from_probabilities


def numeric(model):
    return dataclasses.replace(model, derivative=None)


# --- distributions ---------------------------------------------------------


def test_small_drift_is_renormalized_and_reported():
    d = dist([0.5, 0.5 + 5e-10])
    assert abs(d.probabilities.sum() - 1.0) < 1e-12
    assert d.adjustment == pytest.approx(5e-10, rel=1e-3)


@pytest.mark.parametrize("probs", [[0.5, 0.6], [1.2, -0.2], [np.nan, 1.0]])
def test_bad_distributions_rejected(probs):
    with pytest.raises(InvalidInputError):
        dist(probs)


# --- fidelity --------------------------------------------------------------


def test_fidelity_of_identical_distributions_is_one():
    p = dist([0.2, 0.3, 0.5])
    assert classical_fidelity(p, p) == pytest.approx(1.0, abs=1e-15)


def test_fidelity_of_disjoint_supports_is_zero():
    assert classical_fidelity(dist([1, 0]), dist([0, 1])) == 0.0


def test_fidelity_hand_value():
    # (sqrt(0.45) + sqrt(0.05))^2 = 0.5 + 2 * 0.15
    assert classical_fidelity(dist([0.5, 0.5]), dist([0.9, 0.1])) == pytest.approx(0.8, abs=1e-14)


def test_fidelity_outcome_sets_must_match():
    with pytest.raises(InvalidInputError):
        classical_fidelity(dist([0.5, 0.5]), dist([0.5, 0.5], labels=("a", "b")))


probability_vectors = st.lists(st.floats(0.0, 1.0), min_size=2, max_size=6).filter(
    lambda v: sum(v) > 1e-3
)


@given(probability_vectors, probability_vectors)
def test_fidelity_bounded_and_symmetric(a, b):
    n = min(len(a), len(b))
    p = dist(np.array(a[:n]) / sum(a[:n])) if sum(a[:n]) > 0 else dist(np.ones(n) / n)
    q = dist(np.array(b[:n]) / sum(b[:n])) if sum(b[:n]) > 0 else dist(np.ones(n) / n)
    f = classical_fidelity(p, q)
    assert 0.0 <= f <= 1.0
    assert f == pytest.approx(classical_fidelity(q, p), abs=1e-15)


# --- Fisher information ----------------------------------------------------


@pytest.mark.parametrize("p", [0.05, 0.3, 0.5, 0.77, 0.95])
def test_bernoulli_fisher_matches_closed_form(p):
    oracle = 1.0 / (p * (1.0 - p))
    assert fisher_information(bernoulli_model(), p) == pytest.approx(oracle, rel=1e-12)
    assert fisher_information(numeric(bernoulli_model()), p) == pytest.approx(oracle, rel=1e-6)


def test_bernoulli_fisher_at_half_is_four():
    assert fisher_information(bernoulli_model(), 0.5) == 4.0


@pytest.mark.parametrize("mu", [0.3, 2.0, 7.5, 20.0])
def test_poisson_fisher_matches_closed_form(mu):
    model = poisson_model()
    assert fisher_information(model, mu) == pytest.approx(1.0 / mu, rel=1e-10)
    assert fisher_information(numeric(model), mu) == pytest.approx(1.0 / mu, rel=1e-6)


def test_poisson_fisher_at_two_is_half():
    assert fisher_information(poisson_model(), 2.0) == pytest.approx(0.5, rel=1e-12)


@pytest.mark.parametrize("n", [1, 4, 9])
def test_binomial_fisher(n):
    assert fisher_information(binomial_model(n), 0.3) == pytest.approx(n / 0.21, rel=1e-12)


def test_constant_model_has_no_information():
    model = constant_model([0.25, 0.75])
    assert fisher_information(model, 0.1) == 0.0
    assert fisher_information(numeric(model), 0.1) == 0.0


def test_fisher_outside_domain():
    with pytest.raises(DomainError):
        fisher_information(bernoulli_model(), 1.5)


def test_numeric_stencil_must_stay_in_domain():
    with pytest.raises(DomainError):
        fisher_information(numeric(bernoulli_model()), 1.0)


def test_vanishing_outcome_contributes_nothing():
    # P = (1 - x^2, x^2): at x = 0 the second outcome and its slope both vanish
    model = dataclasses.replace(
        bernoulli_model(),
        probabilities=lambda x: np.array([1 - x * x, x * x]),
        derivative=lambda x: np.array([-2 * x, 2 * x]),
    )
    assert fisher_information(model, 0.0) == 0.0


def test_vanishing_outcome_with_slope_is_infinite():
    model = dataclasses.replace(
        bernoulli_model(),
        derivative=lambda x: np.array([-1.0, 1.0]),
    )
    assert fisher_information(model, 0.0) == math.inf


def test_underflowed_poisson_tail_is_ignored():
    # at mean 1 the far tail of a wide outcome set underflows to zero
    model = poisson_model(domain=(1e-9, 300.0))
    assert fisher_information(model, 1.0) == pytest.approx(1.0, rel=1e-10)


def test_gaussian_location_family_through_binning():
    # Fisher information of a Gaussian mean is 1/sigma^2
    sigma = 0.7
    edges = np.linspace(-8, 8, 3201)
    model = binned_model(lambda xi, x: stats.norm.cdf(xi, loc=x, scale=sigma), edges, (-1.0, 1.0))
    assert fisher_information(model, 0.2) == pytest.approx(1 / sigma**2, rel=1e-3)


@given(st.floats(0.01, 0.99))
@settings(max_examples=30)
def test_fisher_non_negative(p):
    assert fisher_information(numeric(bernoulli_model()), p) >= 0.0


# --- fidelity expansion ----------------------------------------------------


def test_expansion_remainder_at_half():
    assert fidelity_expansion_check(bernoulli_model(), 0.5, 1e-3) <= 1e-8


def test_expansion_zero_step():
    assert fidelity_expansion_check(bernoulli_model(), 0.5, 0.0) == 0.0


def test_expansion_constant_model():
    assert fidelity_expansion_check(constant_model([0.1, 0.9]), 0.0, 0.3) <= 1e-14


@pytest.mark.parametrize(
    "model,x", [(bernoulli_model(), 0.3), (bernoulli_model(), 0.5), (poisson_model(), 2.0)]
)
def test_expansion_remainder_is_at_least_cubic(model, x):
    steps = [2e-2, 1e-2, 5e-3]
    rem = [fidelity_expansion_check(model, x, h) for h in steps]
    for big, small in zip(rem, rem[1:]):
        assert big / small >= 7.5


# --- Cramer-Rao ------------------------------------------------------------


@pytest.mark.parametrize("f,n,bound", [(4.0, 100, 0.05), (1.0, 1, 1.0)])
def test_cramer_rao_values(f, n, bound):
    assert cramer_rao_bound(f, n).bound == pytest.approx(bound, rel=1e-15)


def test_cramer_rao_composed_with_bernoulli():
    f = fisher_information(bernoulli_model(), 0.5)
    assert cramer_rao_bound(f, 10_000).bound == pytest.approx(0.005, rel=1e-15)


@pytest.mark.parametrize("f", [0.0, -1.0])
def test_cramer_rao_degenerate(f):
    with pytest.raises(DegenerateModelError):
        cramer_rao_bound(f, 10)


@given(st.floats(1e-6, 1e6), st.floats(1e-6, 1e6), st.integers(1, 10**6), st.integers(1, 10**6))
def test_cramer_rao_monotone(f1, f2, n1, n2):
    lo_f, hi_f = sorted((f1, f2))
    lo_n, hi_n = sorted((n1, n2))
    assert cramer_rao_bound(hi_f, lo_n).bound <= cramer_rao_bound(lo_f, lo_n).bound
    assert cramer_rao_bound(lo_f, hi_n).bound <= cramer_rao_bound(lo_f, lo_n).bound


# --- error propagation -----------------------------------------------------


def test_error_propagation_linear_mean():
    n_bar = 10.0
    got = error_propagation(lambda g: (1 - g) * n_bar, lambda g: 1.0, 0.3)
    assert got == pytest.approx(0.1, rel=1e-12)


def test_error_propagation_noiseless():
    assert error_propagation(lambda g: 3 * g, lambda g: 0.0, 0.3) == 0.0


def test_error_propagation_flat_mean():
    with pytest.raises(InsensitiveObservableError):
        error_propagation(lambda g: 2.0, lambda g: 1.0, 0.3)


def test_richardson_derivative_accuracy():
    cfg = DifferentiationConfig(step=1e-2, richardson_levels=3)
    assert derivative(np.sin, 0.4, cfg) == pytest.approx(math.cos(0.4), rel=1e-12)
