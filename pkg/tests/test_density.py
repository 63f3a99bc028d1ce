import math
from fractions import Fraction

import pytest

from oracles import count_mod
from quadsieve.density import (
    NotSolvable,
    euler_factors,
    hl_prediction,
    local_density,
    padic_ball_volume,
    real_density,
    volume_exponent_fit,
)
from quadsieve.errors import DegenerateFit
from quadsieve.forms import Box, QuadraticForm

D = QuadraticForm.diagonal


def test_local_density_good_prime():
    d = local_density(D([1, 1, 1, 1]), 1, 7)
    assert d.value == Fraction(48, 49) == Fraction(count_mod([1, 1, 1, 1], 1, 7), 7**3)
    assert d.stabilized and d.k_used >= 2


def test_local_density_at_two():
    d = local_density(D([1, 1, 1, 1]), 1, 2)
    # k0 = 2 v_2(2) + 1 = 3; brute-force counts at k = 4 agree
    assert d.k_used >= 4
    assert d.value == Fraction(count_mod([1, 1, 1, 1], 1, 16), 16**3) == 1


def test_local_density_rejects_zero_target():
    with pytest.raises(ValueError):
        local_density(D([1, 1, 1]), 0, 3)


def test_good_prime_density_is_ffield_ratio():
    q = D([1, 1, 1, -1])
    for p in (3, 5, 7, 11, 13, 101):
        assert local_density(q, 1, p).value == 1 - Fraction(-1 if p % 4 == 3 else 1, p * p)


def test_padic_ball_volume():
    q = D([1, 1, 1, 1])
    assert padic_ball_volume(q, 1, 3, 0) == local_density(q, 1, 3).value
    # sigma_3(9) = (N_1(0) - 1)/27 + sigma_3(1)/9 = 32/27 + 24/243 = 104/81
    assert local_density(q, 9, 3).value == Fraction(104, 81)
    assert padic_ball_volume(q, 1, 3, 1) == 9 * Fraction(104, 81)
    vols = [padic_ball_volume(D([1, 1, 1, -1]), 1, 2, h) / 4**h for h in range(7)]
    assert max(vols) / min(vols) < 2


def test_real_density_circle_and_sphere():
    r = real_density(D([1, 1]), 1, region=Box.cube(2, 2))
    assert abs(r.value - math.pi) < 0.01 * math.pi
    r3 = real_density(D([1, 1, 1]), 1, region=Box.cube(3, 2))
    assert abs(r3.value - 2 * math.pi) < 0.01 * 2 * math.pi
    assert r3.error < 1e-3


def test_real_density_empty_region_and_box_independence():
    assert real_density(D([1, 1]), 1, region=Box((2, 2), (3, 3))).value == 0
    a = real_density(D([1, 1]), 1, region=Box.cube(2, Fraction(11, 10))).value
    b = real_density(D([1, 1]), 1, region=Box.cube(2, 5)).value
    assert abs(a - b) < 1e-3


def test_real_density_refinement_shrinks_error():
    q = D([1, 1, -1])
    region = Box.cube(3, 2)
    errs = [real_density(q, 1, region=region, level=L).error for L in (5, 7, 9)]
    assert errs[0] > errs[1] > errs[2]


def test_real_density_ball():
    # sphere of radius 1 inside the ball of radius 1: full 2*pi
    r = real_density(D([1, 1, 1]), 1, radius=1)
    assert abs(r.value - 2 * math.pi) < 0.02 * 2 * math.pi


def test_prediction_gates():
    with pytest.raises(ValueError, match="n >= 4"):
        hl_prediction(D([1, 1, 1]), 1, Box.cube(3, 2))
    with pytest.raises(NotSolvable):
        hl_prediction(D([1, 1, 1, 1]), -1, Box.cube(4, 2))


def test_prediction_structure():
    q = D([1, 1, 1, -1])
    pred = hl_prediction(q, 1, Box.cube(4, Fraction(3, 2)), 2, 2, p_cut=97)
    assert 2 not in pred.factors and 97 in pred.factors
    assert pred.low <= pred.total <= pred.high
    assert pred.tail_low < 1 < pred.tail_high
    assert pred.tail_constant == pytest.approx(1.0)


def test_euler_product_cauchy():
    q = D([1, 1, 1, -1])
    f = euler_factors(q, 1, 400)
    partial = []
    prod = Fraction(1)
    for p in sorted(f):
        prod *= f[p]
        partial.append(float(prod))
    tail_moves = [abs(partial[-1] - partial[i]) for i in (20, 40, 60)]
    assert tail_moves[0] > tail_moves[1] > tail_moves[2]
    assert tail_moves[-1] < 1e-3


def test_volume_fit():
    exact = [(h, 2.0 ** (2 * h)) for h in range(6)]
    fit = volume_exponent_fit(exact, 2)
    assert fit.slope == pytest.approx(2) and fit.residual == pytest.approx(0, abs=1e-12)
    with pytest.raises(DegenerateFit):
        volume_exponent_fit([(0, 1.0)], 2)
    series = [(h, float(padic_ball_volume(D([1, 1, 1, -1]), 1, 2, h))) for h in range(7)]
    assert abs(volume_exponent_fit(series, 2).slope - 2) < 0.2
