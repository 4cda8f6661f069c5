from fractions import Fraction
from itertools import combinations
from math import comb

import pytest
from hypothesis import given, settings, strategies as st

from shuffle_gossip.analytic import (UndefinedPointError, binom, correction_gamma,
                                     correction_gamma_product, difference_sequence,
                                     drop_given_overlaps, forward_difference, optimal_s, p_drop,
                                     p_drop_corrected, p_drop_exact, p_drop_reduced,
                                     p_drop_simplified, p_select, prob_k_duplicates,
                                     prob_shared_given_k)
from shuffle_gossip.params import ParameterError, ProtocolParams

from oracles import brute_force_drop


def P(n, c, s, N=2):
    return ProtocolParams(n=n, c=c, s=s, N=N)


def all_params(max_n):
    for n in range(1, max_n + 1):
        for c in range(1, n + 1):
            for s in range(1, c + 1):
                yield n, c, s


# hand-derived subset counts -----------------------------------------------

def test_binom_zero_extension():
    assert binom(5, 2) == 10
    assert binom(3, 4) == 0
    assert binom(3, -1) == 0
    assert binom(0, 0) == 1


@pytest.mark.parametrize("n,c,s,expected", [
    (500, 100, 50, Fraction(1, 2)),
    (10, 5, 5, Fraction(1)),
    (500, 100, 1, Fraction(1, 100)),
])
def test_p_select(n, c, s, expected):
    assert p_select(P(n, c, s)) == expected


def test_prob_k_duplicates_enumeration():
    # fixed 2-item cache {0, 1} in a 4-item universe, all 2-subsets as buffer
    subsets = list(combinations(range(4), 2))
    both_inside = sum(set(x) <= {0, 1} for x in subsets)
    assert Fraction(both_inside, len(subsets)) == Fraction(1, 6)
    assert prob_k_duplicates(P(4, 2, 2), 2) == Fraction(1, 6)


@pytest.mark.parametrize("c,s", [(3, 1), (5, 2), (6, 6)])
def test_prob_k_duplicates_full_universe(c, s):
    assert prob_k_duplicates(P(c, c, s), s) == 1


def test_prob_k_duplicates_sum():
    params = P(7, 4, 2)
    assert sum(prob_k_duplicates(params, k) for k in range(3)) == 1


def test_prob_shared_given_k_enumeration():
    # B's buffer is {0, 1} inside a 4-item cache; one received duplicate
    buf = {0, 1}
    singles = list(combinations(range(4), 1))
    shared0 = Fraction(sum(len(buf & set(x)) == 0 for x in singles), len(singles))
    shared1 = Fraction(sum(len(buf & set(x)) == 1 for x in singles), len(singles))
    assert shared0 == shared1 == Fraction(1, 2)
    params = P(10, 4, 2)
    assert prob_shared_given_k(params, 1, 0) == shared0
    assert prob_shared_given_k(params, 1, 1) == shared1


def test_prob_shared_given_k_sum():
    params = P(12, 5, 2)
    assert sum(prob_shared_given_k(params, 2, h) for h in range(3)) == 1


@pytest.mark.parametrize("s,k,s_hat,expected", [
    (2, 2, 0, 0), (2, 2, 1, 0), (2, 2, 2, 0),
    (2, 0, 0, 1),
    (3, 1, 1, 1),
    (3, 1, 0, Fraction(2, 3)),
])
def test_drop_given_overlaps(s, k, s_hat, expected):
    assert drop_given_overlaps(s, k, s_hat) == expected


def test_drop_given_overlaps_rejects_bad_counts():
    with pytest.raises(ParameterError):
        drop_given_overlaps(2, 1, 2)


# exact expectation ---------------------------------------------------------

@pytest.mark.parametrize("n,c", [(4, 2), (9, 3), (30, 7)])
def test_exact_single_item_buffer(n, c):
    assert p_drop_exact(P(n, c, 1)) == Fraction(n - c, n)


def test_exact_spec_value():
    assert p_drop_exact(P(4, 2, 1)) == Fraction(1, 2)


@pytest.mark.parametrize("c,s", [(1, 1), (5, 2), (6, 6)])
def test_exact_zero_when_universe_fits(c, s):
    assert p_drop_exact(P(c, c, s)) == 0


def test_exact_matches_enumeration_6_4_2():
    assert p_drop_exact(P(6, 4, 2)) == brute_force_drop(6, 4, 2)


def test_fixed_cache_enumeration_is_equivalent():
    for n, c, s in [(5, 3, 2), (6, 4, 3), (7, 3, 1)]:
        assert brute_force_drop(n, c, s, fix_cache=True) == brute_force_drop(n, c, s)


@pytest.mark.parametrize("n,c,s", list(all_params(6)))
def test_exact_matches_enumeration_small(n, c, s):
    assert p_drop_exact(P(n, c, s)) == brute_force_drop(n, c, s, fix_cache=True)


def test_reduced_form_agrees():
    for n, c, s in all_params(25):
        if 2 * s <= c <= n - s:
            assert p_drop_reduced(P(n, c, s)) == p_drop_exact(P(n, c, s)), (n, c, s)


def test_reduced_form_domain():
    with pytest.raises(ParameterError):
        p_drop_reduced(P(10, 3, 2))


# simplified and corrected ------------------------------------------------

def test_simplified_values():
    assert p_drop_simplified(P(500, 100, 50)) == Fraction(8, 9)
    assert p_drop_simplified(P(500, 100, 1)) == Fraction(400, 499)
    assert p_drop_exact(P(500, 100, 1)) == Fraction(400, 500)
    assert p_drop_simplified(P(20, 20, 5)) == 0


def test_simplified_undefined_when_s_equals_n():
    with pytest.raises(ParameterError):
        p_drop_simplified(P(3, 3, 3))


def test_gamma_single_item():
    for n in range(1, 15):
        cf = correction_gamma(n, 1)
        assert cf.gamma == 1 and cf.theta == 1


def test_gamma_finite_sum_value():
    # Σ_{d<2} C(7,d) / (2 C(1,d)) = 1/2 + 7/2
    expected = Fraction(comb(7, 0), 2 * comb(1, 0)) + Fraction(comb(7, 1), 2 * comb(1, 1))
    assert expected == 4
    assert correction_gamma(7, 2).gamma == 4
    assert correction_gamma(7, 2).theta == Fraction(1, 4)


def test_gamma_two_forms_agree():
    for n in range(1, 21):
        for s in range(1, n + 1):
            assert correction_gamma(n, s).gamma == correction_gamma_product(n, s), (n, s)


def test_corrected_values():
    assert p_drop_corrected(P(4, 2, 1)) == Fraction(1, 2)
    assert p_drop_corrected(P(9, 9, 4)) == 0


def test_corrected_equals_exact_moderate_grid():
    for n, c, s in all_params(18):
        params = P(n, c, s)
        assert p_drop_corrected(params) == p_drop_exact(params), (n, c, s)


def test_dispatch_by_variant():
    params = P(500, 100, 50)
    assert p_drop(params, "simplified") == Fraction(8, 9)
    assert p_drop(params, "exact") == p_drop(params, "corrected")
    with pytest.raises(ValueError):
        p_drop(params, "bogus")


# difference sequence ---------------------------------------------------

def test_difference_sequence_matches_closed_form():
    # independent evaluation: e = (E^-1 - S^-1)^-1 from the two exact values
    for c, s in [(4, 2), (6, 3), (8, 3)]:
        ns = list(range(c + 1, c + 8))
        seq = difference_sequence(c, s, ns)
        for n, e in zip(ns, seq):
            E = p_drop_exact(P(n, c, s))
            S = Fraction(n - c, n - s)
            assert e == 1 / (1 / E - 1 / S)


def test_difference_sequence_is_gamma_times_gap():
    for c, s in [(4, 2), (6, 2), (6, 3)]:
        for n, e in zip(range(c + 1, c + 9), difference_sequence(c, s, range(c + 1, c + 9))):
            assert e == (n - c) * correction_gamma(n, s).gamma


def test_difference_sequence_undefined_at_n_equals_c():
    with pytest.raises(UndefinedPointError) as info:
        difference_sequence(4, 2, [5, 4])
    assert info.value.n == 4


def test_difference_sequence_single_item_buffer():
    # s = 1: E = (n-c)/n and S = (n-c)/(n-1), so e = n - c
    assert difference_sequence(3, 1, [5]) == [Fraction(2)]


def test_forward_difference():
    seq = [Fraction(v) for v in (1, 4, 9, 16, 25)]
    assert forward_difference(seq) == [3, 5, 7, 9]
    assert forward_difference(seq, 2) == [2, 2, 2]
    assert forward_difference(seq, 0) == seq


# optimum -------------------------------------------------------------------

def test_optimal_s_formula():
    real, integer = optimal_s(500, 100)
    assert real == pytest.approx(500 - 200000 ** 0.5)
    assert real == pytest.approx(52.79, abs=0.01)
    assert integer == 53


def test_optimal_s_degenerate():
    assert optimal_s(40, 40) == (40.0, 40)


def test_optimal_s_domain():
    with pytest.raises(ParameterError):
        optimal_s(100, 0)


def test_optimal_s_maximises_duplication_term():
    n, c = 80, 20
    real, integer = optimal_s(n, c)
    value = [Fraction(s, c) * Fraction(c - s, n - s) for s in range(1, c + 1)]
    best = max(range(1, c + 1), key=lambda s: value[s - 1])
    assert abs(best - real) < 1


# properties ------------------------------------------------------------------

valid = st.integers(1, 40).flatmap(
    lambda n: st.integers(1, n).flatmap(
        lambda c: st.tuples(st.just(n), st.just(c), st.integers(1, c))))


@given(valid)
@settings(max_examples=150, deadline=None)
def test_duplicate_distribution_sums_to_one(ncs):
    params = P(*ncs)
    assert sum(prob_k_duplicates(params, k) for k in range(params.s + 1)) == 1


@given(valid, st.data())
@settings(max_examples=150, deadline=None)
def test_shared_distribution_sums_to_one(ncs, data):
    params = P(*ncs)
    k = data.draw(st.integers(0, params.s))
    if prob_k_duplicates(params, k) == 0:
        return
    assert sum(prob_shared_given_k(params, k, h) for h in range(k + 1)) == 1


@given(valid)
@settings(max_examples=150, deadline=None)
def test_drop_probabilities_in_unit_interval(ncs):
    params = P(*ncs)
    exact = p_drop_exact(params)
    assert 0 <= exact <= 1
    assert p_drop_corrected(params) == exact
    if params.n > params.s:
        # the simplified form never underestimates the exact value
        assert p_drop_simplified(params) >= exact


@given(st.integers(1, 60), st.integers(1, 60))
def test_optimal_s_in_range(n, c):
    if c > n:
        n, c = c, n
    real, integer = optimal_s(n, c)
    assert 0 < real <= c + 1e-9
    assert 1 <= integer <= c
