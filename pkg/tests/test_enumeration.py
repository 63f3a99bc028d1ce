import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from oracles import box_points
from quadsieve.enumeration import (
    count_chunks,
    enumerate_integral,
    enumerate_s_integral,
    height_padic,
    height_real,
    integral_chunks,
    naive_oracle,
    scan_chunks,
)
from quadsieve.errors import BoxTooLarge, DenominatorNotPPower
from quadsieve.forms import Box, QuadraticForm, QuadricInstance


def inst(coeffs, m, **kw):
    return QuadricInstance(QuadraticForm.diagonal(coeffs), m, **kw)


def coords(points):
    return [p.coords for p in points]


def test_heights():
    assert height_real((0, 0, 0)) == 0
    assert height_real((3, 4)) == 5
    assert height_real((1, 1, 1, 1)) == 2
    assert height_padic((1, 2, 3), 5) == 0
    assert height_padic((Fraction(1, 5), 2, 3), 5) == 1
    assert height_padic((Fraction(1, 4), Fraction(1, 2), 8), 2) == 2
    with pytest.raises(DenominatorNotPPower):
        height_padic((Fraction(1, 3), 1), 2)


def test_unit_vectors():
    pts = coords(enumerate_integral(inst([1, 1, 1, 1], 1), 1))
    assert len(pts) == 8
    assert sorted(pts) == pts
    assert all(sum(abs(c) for c in p) == 1 for p in pts)


def test_frozen_counts():
    assert len(list(enumerate_integral(inst([1, 1, 1, 1], 6), 3))) == 96
    pts = coords(enumerate_integral(inst([1, 1, 1, -1], 1), 1))
    assert len(pts) == 6 and all(p[3] == 0 for p in pts)
    assert len(list(naive_oracle(inst([1, 1], 25), 5))) == 12
    assert list(enumerate_integral(inst([1, 1, 1], 7), 10)) == []


def test_s_integral_examples():
    region = Box.cube(4, Fraction(3, 2))
    assert len(list(enumerate_s_integral(inst([1, 1, 1, 1], 1, p0=2, h=0, region=region)))) == 8
    pts = coords(enumerate_s_integral(inst([1, 1, 1, 1], 1, p0=2, h=1, region=region)))
    assert len(pts) == 24
    assert (Fraction(1, 2),) * 4 in pts and (1, 0, 0, 0) in pts
    pts3 = list(enumerate_s_integral(inst([1, 1, 1], 2, p0=3, h=1, region=Box.cube(3, 2))))
    assert len(pts3) == len(box_points([1, 1, 1], 18, 6)) == 36
    assert all(sum(c * c for c in p.coords) == 2 for p in pts3)


def test_rescaling_round_trip():
    q = QuadraticForm.diagonal([1, 2, -3, 1])
    region = Box((-2, -1, -1, Fraction(-1, 2)), (2, 1, Fraction(3, 2), 1))
    for h in range(4):
        got = coords(enumerate_s_integral(QuadricInstance(q, 3, 2, h, region)))
        s = 2**h
        lo = [math.ceil(a * s) for a in region.lo]
        hi = [math.floor(b * s) for b in region.hi]
        ref = [
            tuple(Fraction(c, s) for c in y)
            for y in itertools.product(*[range(a, b + 1) for a, b in zip(lo, hi)])
            if q(y) == 3 * s * s
        ]
        assert got == ref
        assert all(region.contains(x) and q(x) == 3 for x in got)


NONZERO5 = [a for a in range(-5, 6) if a]


def check_equivalence(coeffs, m, N, sup_norm=False):
    I = inst(coeffs, m)
    fast = coords(enumerate_integral(I, N, sup_norm))
    ref = coords(naive_oracle(I, N, sup_norm))
    assert fast == ref == sorted(ref)
    assert all(sum(a * x * x for a, x in zip(coeffs, p)) == m for p in fast)


@given(
    st.lists(st.sampled_from(NONZERO5), min_size=3, max_size=4),
    st.integers(-20, 20).filter(bool),
    st.integers(1, 12),
    st.booleans(),
)
def test_oracle_equivalence_random(coeffs, m, N, sup_norm):
    check_equivalence(coeffs, m, N, sup_norm)


def random_gram(rnd, n):
    while True:
        G = [[0] * n for _ in range(n)]
        for i in range(n):
            for j in range(i, n):
                G[i][j] = G[j][i] = rnd.randint(-3, 3)
        try:
            return QuadraticForm(tuple(map(tuple, G)))
        except ValueError:
            continue


@given(st.integers(0, 2**32), st.integers(1, 4), st.integers(-15, 15).filter(bool))
def test_non_diagonal_matches_oracle(seed, n, m):
    import random

    q = random_gram(random.Random(seed), n)
    I = QuadricInstance(q, m)
    assert coords(enumerate_integral(I, 6)) == coords(naive_oracle(I, 6))


def test_threads_do_not_change_output():
    I = inst([1, 1, 1, -1], 1)
    a = [c.tolist() for c in integral_chunks(I, 40, threads=1)]
    b = [c.tolist() for c in integral_chunks(I, 40, threads=4)]
    assert a == b


def test_big_values_use_exact_fallback():
    q = QuadraticForm.diagonal([10**12, 1, -(10**12)])
    rows = [tuple(r) for c in scan_chunks(q, 1, [-3, -3, -3], [3, 3, 3]) for r in c.tolist()]
    assert rows == [tuple(x) for x in box_points([10**12, 1, -(10**12)], 1, 3)]
    q2 = QuadraticForm.diagonal([2**40, 1])
    rows = [tuple(r) for c in scan_chunks(q2, 2**42 + 9, [-3, -3], [3, 3]) for r in c.tolist()]
    assert rows == [(-2, -3), (-2, 3), (2, -3), (2, 3)]


def test_monotone_in_N_and_h():
    I = inst([1, 1, -1, 2], 2)
    counts = [count_chunks(integral_chunks(I, N)) for N in range(1, 25)]
    assert counts == sorted(counts)
    region = Box.cube(4, Fraction(3, 2))
    hs = [len(list(enumerate_s_integral(inst([1, 1, 1, -1], 1, p0=2, h=h, region=region)))) for h in range(5)]
    assert hs == sorted(hs)
    assert hs == [30, 126, 474, 1770, 6186]


def test_naive_oracle_cap():
    with pytest.raises(BoxTooLarge):
        list(naive_oracle(inst([1, 1, 1, 1], 1), 100, cap=1000))


def test_one_and_two_variables():
    assert coords(enumerate_integral(inst([3], 12), 5)) == [(-2,), (2,)]
    assert coords(enumerate_integral(inst([1, -1], 0 + 3), 5)) == coords(naive_oracle(inst([1, -1], 3), 5))
