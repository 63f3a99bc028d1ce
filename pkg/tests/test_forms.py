import itertools
import random
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from oracles import has_padic_zero, hilbert_bruteforce
from quadsieve.arith import distinct_prime_factors, split_valuation
from quadsieve.errors import DegenerateForm
from quadsieve.forms import (
    Box,
    FinitePrime,
    QuadraticForm,
    QuadricInstance,
    Real,
    diagonalize,
    hasse_invariant,
    hilbert_symbol,
    is_isotropic_local,
    represents_global,
    represents_local,
)

PLACES = [Real, FinitePrime(2), FinitePrime(3), FinitePrime(5), FinitePrime(7)]
nonzero = st.integers(-60, 60).filter(bool)


def check_certificate(q):
    diag, T = diagonalize(q)
    n = q.n
    G = q.gram
    for i in range(n):
        for j in range(n):
            v = sum(T[a][i] * G[a][b] * T[b][j] for a in range(n) for b in range(n))
            assert v == (diag[i] if i == j else 0)
    assert all(a != 0 for a in diag)


# -- construction and diagonalization ----------------------------------------


def test_identity_is_already_diagonal():
    diag, T = diagonalize(QuadraticForm.diagonal([1, 1, 1]))
    assert diag == (1, 1, 1)
    assert T == tuple(tuple(Fraction(int(i == j)) for j in range(3)) for i in range(3))


def test_diagonalize_cross_term():
    q = QuadraticForm(((1, 1, 0), (1, 3, 0), (0, 0, 1)))
    diag, T = diagonalize(q)
    assert diag == (1, 2, 1)
    assert T == ((1, -1, 0), (0, 1, 0), (0, 0, 1))
    check_certificate(q)


def test_rejects_non_integral_and_degenerate():
    with pytest.raises(ValueError):
        QuadraticForm(((0, Fraction(1, 2)), (Fraction(1, 2), 0)))
    with pytest.raises(DegenerateForm):
        QuadraticForm(((1, 1), (1, 1)))
    with pytest.raises(ValueError):
        QuadraticForm(((1, 2), (0, 1)))
    q = QuadraticForm.parse("1,-1")  # integral model of 2xy
    assert q.det == -1


def test_parse_literals():
    assert QuadraticForm.parse("1,1,1,-1").diagonal_coefficients == (1, 1, 1, -1)
    assert QuadraticForm.parse("[[1,1],[1,3]]").gram == ((1, 1), (1, 3))
    with pytest.raises(ValueError):
        QuadraticForm.parse("1,,1")


def test_zero_pivot_diagonalization():
    q = QuadraticForm(((0, 1, 0), (1, 0, 0), (0, 0, 3)))
    check_certificate(q)


@given(st.integers(2, 4), st.integers(0, 2**32))
def test_certificate_random_forms(n, seed):
    rnd = random.Random(seed)
    while True:
        G = [[0] * n for _ in range(n)]
        for i in range(n):
            for j in range(i, n):
                G[i][j] = G[j][i] = rnd.randint(-4, 4)
        try:
            q = QuadraticForm(tuple(map(tuple, G)))
            break
        except DegenerateForm:
            continue
    check_certificate(q)


# -- Hilbert symbols -----------------------------------------------------------


def test_hilbert_examples():
    for v in PLACES:
        assert hilbert_symbol(1, 7, v) == 1
    assert hilbert_symbol(-1, -1, FinitePrime(2)) == -1
    assert hilbert_bruteforce(-1, -1, 2) == -1
    assert hilbert_symbol(-1, -1, Real) == -1


def test_hilbert_matches_bruteforce():
    vals = [a for a in range(-12, 13) if a]
    for p in (2, 3, 5, 7):
        for a in vals:
            for b in vals:
                if b < a:
                    continue
                assert hilbert_symbol(a, b, p) == hilbert_bruteforce(a, b, p), (a, b, p)


def test_hilbert_rational_arguments():
    assert hilbert_symbol(Fraction(1, 3), 5, 3) == hilbert_symbol(3, 5, 3)
    assert hilbert_symbol(Fraction(-4, 9), -1, Real) == -1


@pytest.mark.parametrize("v", PLACES, ids=str)
def test_bimultiplicative(v):
    rnd = random.Random(7 + (v.p or 0))
    for _ in range(200):
        a, a2, b = (rnd.choice([x for x in range(-200, 201) if x]) for _ in range(3))
        assert hilbert_symbol(a * a2, b, v) == hilbert_symbol(a, b, v) * hilbert_symbol(a2, b, v)
        assert hilbert_symbol(a, b, v) == hilbert_symbol(b, a, v)


def product_over_places(a, b):
    s = hilbert_symbol(a, b, Real)
    for p in distinct_prime_factors(2 * a * b):
        s *= hilbert_symbol(a, b, p)
    return s


@given(nonzero, nonzero)
def test_product_formula_property(a, b):
    assert product_over_places(a, b) == 1


def test_product_formula_200_pairs():
    rnd = random.Random(11)
    for _ in range(200):
        a = rnd.choice([-1, 1]) * rnd.randint(1, 10**6)
        b = rnd.choice([-1, 1]) * rnd.randint(1, 10**6)
        assert product_over_places(a, b) == 1


# -- Hasse invariants and isotropy --------------------------------------------


def test_hasse_examples():
    for v in PLACES:
        assert hasse_invariant(QuadraticForm.diagonal([1, 1, 1, 1]), v) == 1
    assert hasse_invariant([-1, -1], FinitePrime(2)) == -1
    q = QuadraticForm.diagonal([1, 1, 1, -7])
    expected = hilbert_symbol(1, -7, 7) ** 3
    assert hasse_invariant(q, FinitePrime(7)) == expected == 1
    assert is_isotropic_local(q, FinitePrime(7)) == has_padic_zero([1, 1, 1, -7], 7)


def random_unimodular(n, rnd):
    U = [[int(i == j) for j in range(n)] for i in range(n)]
    for _ in range(3 * n):
        i, j = rnd.sample(range(n), 2)
        c = rnd.randint(-2, 2)
        for r in range(n):
            U[r][i] += c * U[r][j]
    return U


@given(st.lists(st.integers(-9, 9).filter(bool), min_size=2, max_size=4), st.integers(0, 2**32))
def test_hasse_basis_independent(coeffs, seed):
    rnd = random.Random(seed)
    q = QuadraticForm.diagonal(coeffs)
    q2 = q.transform(random_unimodular(q.n, rnd))
    for v in PLACES:
        assert hasse_invariant(q, v) == hasse_invariant(q2, v)
        assert is_isotropic_local(q, v) == is_isotropic_local(q2, v)


def test_isotropy_examples():
    assert not is_isotropic_local(QuadraticForm.diagonal([1, 1, 1]), Real)
    assert is_isotropic_local(QuadraticForm.diagonal([1, 1, 1, 1, 1]), FinitePrime(3))
    q = QuadraticForm.diagonal([1, 1, -3])
    assert is_isotropic_local(q, FinitePrime(3)) == has_padic_zero([1, 1, -3], 3, k=5)


def test_five_variables_always_isotropic_at_finite_places():
    rnd = random.Random(5)
    for _ in range(100):
        coeffs = [rnd.choice([x for x in range(-30, 31) if x]) for _ in range(5)]
        for p in (2, 3, 5, 7, 11):
            assert is_isotropic_local(coeffs, p)


NONZERO10 = [a for a in range(-10, 11) if a]
ORACLE_PRIMES = (2, 3, 5, 7, 11)


@pytest.mark.parametrize("n", [2, 3])
def test_isotropy_full_grid_small_n(n):
    # isotropy is invariant under permuting coefficients, so multisets cover the grid
    for coeffs in itertools.combinations_with_replacement(NONZERO10, n):
        for p in ORACLE_PRIMES:
            assert is_isotropic_local(coeffs, p) == has_padic_zero(coeffs, p), (coeffs, p)


def square_class_representatives(p):
    """One coefficient from [-10, 10] per Q_p square class that occurs there."""
    reps = {}
    for a in NONZERO10:
        v, u = split_valuation(a, p)
        key = (v % 2, u % 8 if p == 2 else pow(u, (p - 1) // 2, p))
        reps.setdefault(key, a)
    return sorted(reps.values())


@pytest.mark.parametrize("p", ORACLE_PRIMES)
def test_isotropy_n4_square_classes(p):
    # over Q_p only the square class of each coefficient matters, so these multisets
    # represent every diagonal form with |a_i| <= 10
    for coeffs in itertools.combinations_with_replacement(square_class_representatives(p), 4):
        assert is_isotropic_local(coeffs, p) == has_padic_zero(coeffs, p), coeffs


@given(st.lists(st.sampled_from(NONZERO10), min_size=4, max_size=4), st.sampled_from(ORACLE_PRIMES))
def test_isotropy_n4_random(coeffs, p):
    assert is_isotropic_local(coeffs, p) == has_padic_zero(coeffs, p)


def test_real_isotropy():
    assert is_isotropic_local([1, -1, 1], Real)
    assert not is_isotropic_local([-1, -2, -3], Real)


# -- representability -----------------------------------------------------------


def test_represents_local_examples():
    q = QuadraticForm.diagonal([1, 1, 1, 1])
    assert not represents_local(q, -1, Real)
    assert represents_local(q, 6, FinitePrime(5))
    assert has_padic_zero([1, 1, 1, 1, -6], 5)
    with pytest.raises(ValueError):
        represents_local(QuadraticForm.diagonal([1, 1, -1]), 0, Real)


def test_represents_local_matches_oracle():
    for coeffs in itertools.combinations_with_replacement([1, -1, 2, 3, -5], 3):
        q = QuadraticForm.diagonal(coeffs)
        for m in (1, -2, 3, 6, 7):
            for p in (2, 3, 5, 7):
                assert represents_local(q, m, p) == has_padic_zero(list(coeffs) + [-m], p), (coeffs, m, p)


def test_represents_global_examples():
    assert represents_global(QuadraticForm.diagonal([1, 1, 1, 1]), 7)
    assert 4 + 1 + 1 + 1 == 7
    assert not represents_global(QuadraticForm.diagonal([1, 1]), 3)
    assert all(represents_global(QuadraticForm.diagonal([1, -1]), k) for k in range(-20, 21) if k)


def test_represents_global_agrees_with_small_search():
    # a rational solution with small height exists for each of these, or none at all
    forms = [[1, 1, 1], [1, 1, -3], [1, 2, 5], [1, 1]]
    for coeffs in forms:
        q = QuadraticForm.diagonal(coeffs)
        for m in range(1, 16):
            found = any(
                sum(a * Fraction(x, d) ** 2 for a, x in zip(coeffs, xs)) == m
                for d in range(1, 4)
                for xs in itertools.product(range(-3 * d, 3 * d + 1), repeat=len(coeffs))
            )
            if found:
                assert represents_global(q, m), (coeffs, m)


# -- instances and boxes ----------------------------------------------------------


def test_instance_validation():
    q = QuadraticForm.diagonal([1, 1, 1])
    with pytest.raises(ValueError):
        QuadricInstance(q, 0)
    with pytest.raises(ValueError):
        QuadricInstance(q, 1, p0=4)
    with pytest.raises(ValueError):
        QuadricInstance(q, 1, region=Box.cube(2, 1))
    with pytest.raises(ValueError):
        Box((0, 1), (0, 2))
    b = Box.parse("-1.5:3/2,0:1")
    assert b.lo == (Fraction(-3, 2), 0) and b.hi == (Fraction(3, 2), 1)
    assert b.contains((0, Fraction(1, 2)))
