import math
import random
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from oracles import count_mod
from quadsieve.arith import factorize, primes_upto
from quadsieve.enumeration import IntegralPoint, integral_chunks, naive_oracle
from quadsieve.errors import InvalidDensity, MissingPrime, NotSquarefree
from quadsieve.forms import QuadraticForm, QuadricInstance
from quadsieve.poly import Polynomial
from quadsieve.sieve import (
    DensityTable,
    SieveSequence,
    almost_prime_search,
    build_sequence,
    build_sequence_from_chunks,
    density_from_counts,
    dimension_check,
    fundamental_lemma_report,
    legendre_sum,
    mertens_product,
    remainder_ledger,
    sift,
    subsequence_count,
    verify_almost_prime,
)

D = QuadraticForm.diagonal


def unit(N, sprime=()):
    return SieveSequence.from_weights({b: 1 for b in range(1, N + 1)}, sprime)


def lin(n, coeffs, const=0):
    terms = {tuple(int(i == j) for i in range(n)): c for j, c in enumerate(coeffs) if c}
    if const:
        terms[tuple([0] * n)] = const
    return Polynomial.from_dict(n, terms)


def test_sift_examples():
    A = unit(30)
    r = sift(A, 6)
    assert r.value == 8 and r.survivors == [1, 7, 11, 13, 17, 19, 23, 29]
    assert sift(A, 2).value == 30
    assert sift(SieveSequence.from_weights({1: 5}), 1000).value == 5
    with pytest.raises(ValueError):
        sift(A, 1)


def test_subsequence_count():
    A = unit(30)
    assert subsequence_count(A, 1) == 30
    assert subsequence_count(A, 6) == 5
    with pytest.raises(NotSquarefree):
        subsequence_count(A, 4)


def test_sequence_rejects_bad_index():
    with pytest.raises(ValueError):
        SieveSequence.from_weights({4: 1}, {2})


def test_build_sequence_examples():
    pts = [IntegralPoint((1, 0, 0, 0)), IntegralPoint((0, 1, 0, 0))]
    f = lin(4, [1], 2)
    assert build_sequence(pts, f).entries == {3: 1, 2: 1}
    assert build_sequence(pts, f, {2}).entries == {3: 1, 1: 1}


def test_build_sequence_conservation():
    inst = QuadricInstance(D([1, 1, 1, -1]), 1)
    f = lin(4, [1])
    pts = list(naive_oracle(inst, N=30))
    A = build_sequence(pts, f, {2})
    assert A.total + A.zero_bucket == len(pts)
    assert A.zero_bucket == sum(1 for p in pts if p.coords[0] == 0)
    B = build_sequence_from_chunks(integral_chunks(inst, 30), f, {2})
    assert B.entries == A.entries and B.zero_bucket == A.zero_bucket


def test_density_from_counts():
    q = D([1, 1, 1, 1])
    slice_count = count_mod([1, 1, 1], 1, 3)
    assert slice_count == 6
    T = density_from_counts(q, 1, lin(4, [1]), [3])
    assert T[3] == Fraction(3 * slice_count, count_mod([1, 1, 1, 1], 1, 3))
    assert density_from_counts(q, 1, lin(4, [], 5), [3, 7, 11]).omega == {3: 0, 7: 0, 11: 0}
    with pytest.raises(InvalidDensity):
        density_from_counts(q, 1, lin(4, [], 5), [5])
    # p | det goes through brute force
    q2 = D([1, 1, 1, 3])
    T2 = density_from_counts(q2, 1, lin(4, [1]), [3])
    assert T2[3] == Fraction(3 * count_mod([1, 1, 3], 1, 3), count_mod([1, 1, 1, 3], 1, 3))


def test_density_table_validation():
    with pytest.raises(InvalidDensity):
        DensityTable({3: 3})
    with pytest.raises(ValueError):
        DensityTable({4: 1})
    T = DensityTable.constant(1, [2, 3])
    with pytest.raises(MissingPrime):
        T[5]
    T = DensityTable({2: 1, 3: 2, 5: Fraction(1, 2)})
    for d1, d2 in ((2, 3), (2, 5), (3, 5), (6, 5)):
        assert T.of(d1 * d2) == T.of(d1) * T.of(d2)
    with pytest.raises(NotSquarefree):
        T.of(12)


def test_mertens_product():
    T = DensityTable.constant(1, primes_upto(100))
    assert mertens_product(T, 6) == Fraction(4, 15)
    assert mertens_product(T, 2) == 1
    with pytest.raises(MissingPrime):
        mertens_product(DensityTable.constant(1, [2, 3]), 6)


def test_dimension_check():
    ps = primes_upto(10**4)
    ok, k2 = dimension_check(DensityTable.constant(0, ps), 2, 10**4, 1)
    assert ok and k2 == 1
    ok, k2 = dimension_check(DensityTable.constant(1, ps), 2, 10**4, 1)
    assert ok and 1 <= k2 < 10
    ok, k2 = dimension_check(DensityTable({p: Fraction(2) if p > 2 else Fraction(1) for p in ps}), 3, 10**4, 2)
    assert ok and k2 < 50


def test_remainder_ledger():
    Q = 10**4
    A = unit(Q)
    T = DensityTable.constant(1, primes_upto(100))
    led = remainder_ledger(A, T, Q, 100, 100)
    nsq = sum(1 for d in range(1, 101) if all(d % (p * p) for p in (2, 3, 5, 7)))
    assert led.total < nsq
    assert all(dev < 1 for _, _, _, dev in led.rows)
    assert len(led.rows) == nsq
    small = remainder_ledger(A, T, Q + 7, 1, 100)
    assert small.total == pytest.approx(7) and len(small.rows) == 1


def test_fundamental_lemma_report():
    Q = 10**4
    T = DensityTable.constant(1, primes_upto(100))
    rep = fundamental_lemma_report(unit(Q), T, Q, 100, 10)
    assert rep.S == sum(1 for n in range(1, Q + 1) if math.gcd(n, 210) == 1) == 2285
    assert rep.V == Fraction(48, 210)
    assert rep.tau_hat == pytest.approx(2285 / (Q * 48 / 210))
    assert not rep.degenerate
    empty = fundamental_lemma_report(SieveSequence.from_weights({}), T, 1, 10, 10)
    assert empty.S == 0 and empty.degenerate


@given(st.integers(0, 10**6), st.integers(1, 6))
def test_legendre_identity(seed, nprimes):
    rnd = random.Random(seed)
    A = SieveSequence.from_weights({rnd.randint(1, 10**5): rnd.randint(0, 9) for _ in range(rnd.randint(0, 200))})
    z = primes_upto(20)[nprimes - 1] + 1
    assert sift(A, z).value == legendre_sum(A, z)


@given(st.integers(0, 10**6))
def test_sift_monotone(seed):
    rnd = random.Random(seed)
    A = SieveSequence.from_weights({rnd.randint(1, 10**4): rnd.randint(1, 5) for _ in range(100)})
    vals = [sift(A, z).value for z in range(2, 40)]
    assert vals[0] == A.total
    assert all(a >= b for a, b in zip(vals, vals[1:]))


def test_factorize():
    assert factorize(1) == []
    assert factorize(2**10) == [2] * 10
    assert factorize(10**9 + 7) == [10**9 + 7]
    big = (2**61 - 1) * (10**9 + 7) * 3**4
    fs = factorize(big)
    assert math.prod(fs) == big and sorted(fs) == fs


def test_almost_prime_constant_f():
    inst = QuadricInstance(D([1, 1, 1, -1]), 1)
    res = almost_prime_search(inst, lin(4, [], 1), [2, 3], 50, 0, N=5)
    assert res.found and res.distinct == 0 and res.examined == 1 and res.verified


def test_almost_prime_search_example():
    inst = QuadricInstance(D([1, 1, 1, -1]), 1)
    f = lin(4, [1, 1], 3)
    res = almost_prime_search(inst, f, [2, 3], 50, 2, N=500)
    assert res.found and res.verified
    x = res.point
    assert inst.form(x) == 1 and f(x) == res.value
    assert verify_almost_prime(res.value, [2, 3], 50, 2)
    assert all(p > 50 for p in res.primes) and res.distinct <= 2


def test_almost_prime_exhausted():
    inst = QuadricInstance(D([1, 1, 1, -1]), 1)
    res = almost_prime_search(inst, lin(4, [1, 1], 3), [], 10**9, 0, N=3)
    assert (not res.found) or abs(res.value) == 1
    assert res.examined + 0 >= 1 and sum(res.histogram.values()) + res.zero_values == res.examined


def test_verify_almost_prime():
    assert verify_almost_prime(101 * 103, [], 100, 2)
    assert not verify_almost_prime(101 * 103 * 107, [], 100, 2)
    assert not verify_almost_prime(7 * 101, [], 100, 2)
    assert verify_almost_prime(2**5 * 101, [2], 100, 1)
    assert not verify_almost_prime(0, [], 1, 5)
