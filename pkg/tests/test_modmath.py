from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from s2qsp.modmath import (Modulus, derive_vn, mod_inv, prop2_condition, prop2_count_bruteforce,
                           prop2_probability, prop2_sweep, solution_set, two_adic)


@pytest.mark.parametrize("a, d, inv", [(13, 4, 5), (1, 4, 1), (7, 4, 7), (3, 3, 3), (5, 8, 205)])
def test_mod_inv_examples(a, d, inv):
    assert mod_inv(a, d) == inv


def test_mod_inv_rejects_even():
    with pytest.raises(ValueError, match="no inverse modulo power of two"):
        mod_inv(6, 4)


@given(st.integers(1, 12), st.integers(0, 1 << 12))
def test_mod_inv_is_inverse(d, a):
    a = (2 * a + 1) % (1 << d)
    b = mod_inv(a, d)
    assert (a * b) % (1 << d) == 1 and b % 2 == 1


@pytest.mark.parametrize("a, expected", [(12, (2, 3)), (0, (4, 1)), (7, (0, 7)), (8, (3, 1))])
def test_two_adic_examples(a, expected):
    t = two_adic(a, 4)
    assert (t.exponent, t.cofactor) == expected


@given(st.integers(1, 16), st.integers(0, 1 << 16))
def test_two_adic_reconstructs(d, a):
    a %= 1 << d
    t = two_adic(a, d)
    assert t.cofactor % 2 == 1
    assert (t.cofactor << t.exponent) % (1 << d) == a


@pytest.mark.parametrize("v, shares, m, expected", [(3, [14, 10, 15], 2, 0), (1, [0, 11, 15], 2, 3),
                                                    (0, [0], 1, 0)])
def test_derive_vn_examples(v, shares, m, expected):
    assert derive_vn(v, shares, m) == expected


@given(st.integers(1, 6), st.data())
def test_derive_vn_congruence(m, data):
    N, D = 1 << m, 1 << (m + 2)
    v = data.draw(st.integers(0, N - 1))
    shares = data.draw(st.lists(st.integers(0, N - 1), max_size=6))
    vn = derive_vn(v, shares, m)
    assert 0 <= vn < N
    assert (4 * (sum(shares) + vn) - 4 * v) % D == 0


@pytest.mark.parametrize("a, c, p, count", [(4, 8, Fraction(1, 4), 4), (8, 4, Fraction(0), 0),
                                            (1, 5, Fraction(1, 16), 1), (1, 0, Fraction(1, 16), 1)])
def test_prop2_examples(a, c, p, count):
    assert prop2_probability(a, c, 4) == p
    assert prop2_count_bruteforce(a, c, 4) == count


def test_prop2_probability_is_exact_rational():
    assert isinstance(prop2_probability(4, 8, 4), Fraction)


def test_prop2_exhaustive_to_d8():
    for d in range(1, 9):
        D = 1 << d
        for a in range(D):
            for c in range(D):
                assert prop2_probability(a, c, d) * D == prop2_count_bruteforce(a, c, d)


def test_prop2_sweep_reports_no_mismatch():
    cases, bad = prop2_sweep(5)
    assert cases == sum(4 ** d for d in range(1, 6)) and bad == 0


def test_bruteforce_guard():
    with pytest.raises(ValueError):
        prop2_count_bruteforce(1, 1, 13)


@given(st.integers(1, 7), st.data())
def test_prop2_condition_matches_products(d, data):
    D = 1 << d
    a, b, c = (data.draw(st.integers(0, D - 1)) for _ in range(3))
    assert prop2_condition(a, b, c, d) == ((a * b - c) % D == 0)


def test_solution_set():
    assert solution_set(4, 8, 4) == [2, 6, 10, 14]
    assert solution_set(8, 4, 4) == []


def test_modulus_bounds():
    assert Modulus(4).D == 16 and list(Modulus(2).odd()) == [1, 3]
    with pytest.raises(ValueError):
        Modulus(0)
