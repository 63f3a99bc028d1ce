"""Local densities, the real density over a box, p0-adic ball volumes and the
Hardy-Littlewood main term for q = m (n >= 4, density function identically 1).

Measures use the gauge form omega with omega ^ dq = dx_1 ^ ... ^ dx_n.  On the
chart solving for x_i it is dx_1..^dx_i..dx_n / |dq/dx_i|.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .arith import is_prime, primes_upto, distinct_prime_factors, valuation
from .errors import ChartDegenerate, DegenerateFit, NotStabilized
from .forms import Box, QuadraticForm, represents_global
from .modular import PadicQuadric

DEFAULT_P_CUT = 997
DEFAULT_CELL_BUDGET = 2**21


class NotSolvable(ValueError):
    pass


@dataclass(frozen=True)
class LocalDensity:
    p: int
    value: Fraction
    k_used: int
    stabilized: bool

    def to_json(self):
        return {
            "prime": self.p,
            "value_num": self.value.numerator,
            "value_den": self.value.denominator,
            "k_used": self.k_used,
        }


def stabilization_start(q: QuadraticForm, m: int, p: int) -> int:
    return 2 * int(valuation(2 * q.det * m, p)) + 1


def local_density(q: QuadraticForm, m: int, p: int, max_extra: int = 12) -> LocalDensity:
    """sigma_p = count(p^k)/p^{k(n-1)} at the first two consecutive agreeing k >= k0+1,
    k0 = 2 v_p(2 det m) + 1."""
    if m == 0:
        raise ValueError("m must be nonzero")
    if not is_prime(p):
        raise ValueError(f"{p} is not prime")
    pq = PadicQuadric(q, p)
    n = q.n
    k = stabilization_start(q, m, p) + 1
    prev = Fraction(pq.count(m, k), p ** (k * (n - 1)))
    for k in range(k + 1, k + max_extra + 1):
        cur = Fraction(pq.count(m, k), p ** (k * (n - 1)))
        if cur == prev:
            return LocalDensity(p, cur, k, True)
        prev = cur
    raise NotStabilized(f"sigma_{p} did not stabilize by k={k}")


def padic_ball_volume(q: QuadraticForm, m: int, p0: int, h: int) -> Fraction:
    """Measure of {x in X(Q_p0) : max |x_i|_p0 <= p0^h}: rescaling y = p0^h x gives
    p0^{h(n-2)} times the density of q = p0^{2h} m over Z_p0."""
    if h < 0:
        raise ValueError("h must be nonnegative")
    dens = local_density(q, m * p0 ** (2 * h), p0)
    return Fraction(p0) ** (h * (q.n - 2)) * dens.value


# ---------------------------------------------------------------------------
# real density
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RealDensity:
    value: float
    error: float
    level: int
    coarse: float


def _chart_sum(a, m, lo, hi, L, radius_sq=None) -> float:
    """Midpoint rule with 2^L cells per axis for the partition-of-unity integrand.

    Chart i solves for x_i and carries weight (a_i x_i)^2 / sum_j (a_j x_j)^2, so its
    integrand is |a_i x_i| / (2 sum_j (a_j x_j)^2); the weights sum to one on X."""
    n = len(a)
    total = 0.0
    cells = 2**L
    for i in range(n):
        others = [j for j in range(n) if j != i]
        axes, vol = [], 1.0
        for j in others:
            w = (hi[j] - lo[j]) / cells
            axes.append(lo[j] + w * (np.arange(cells) + 0.5))
            vol *= w
        grids = np.meshgrid(*axes, indexing="ij") if axes else []
        flat = [g.ravel() for g in grids]
        rest = np.zeros(flat[0].shape if flat else (1,))
        grad_rest = np.zeros_like(rest)
        sq_rest = np.zeros_like(rest)
        for j, x in zip(others, flat):
            rest += a[j] * x * x
            grad_rest += (a[j] * x) ** 2
            sq_rest += x * x
        t = (m - rest) / a[i]
        ok = t >= 0
        xi = np.sqrt(np.where(ok, t, 0.0))
        dens = np.abs(a[i] * xi) / (2.0 * (grad_rest + (a[i] * xi) ** 2))
        for sign in (1.0, -1.0):
            x = sign * xi
            keep = ok & (x >= lo[i]) & (x <= hi[i])
            if radius_sq is not None:
                keep &= sq_rest + xi * xi <= radius_sq
            total += float(dens[keep].sum()) * vol
    return total


def real_density(
    q: QuadraticForm, m, region: Optional[Box] = None, radius=None, level: Optional[int] = None
) -> RealDensity:
    """Gauge-form measure of {q = m} inside a box (or Euclidean ball of given radius),
    by chartwise midpoint quadrature; error = difference from the next coarser grid."""
    if not q.is_diagonal:
        raise ValueError("real_density needs a diagonal form; use diagonalize() first")
    if (region is None) == (radius is None):
        raise ValueError("give exactly one of region, radius")
    n = q.n
    a = [float(c) for c in q.diagonal_coefficients]
    if radius is not None:
        r = float(radius)
        lo, hi, rsq = [-r] * n, [r] * n, r * r
    else:
        lo, hi, rsq = [float(v) for v in region.lo], [float(v) for v in region.hi], None
    if m == 0 and all(l <= 0 <= h_ for l, h_ in zip(lo, hi)):
        raise ChartDegenerate("region contains the origin, where the gradient vanishes")
    if n == 1:
        raise ValueError("need n >= 2")
    if level is None:
        level = max(3, int(math.log2(DEFAULT_CELL_BUDGET) // (n - 1)))
    fine = _chart_sum(a, float(m), lo, hi, level, rsq)
    coarse = _chart_sum(a, float(m), lo, hi, level - 1, rsq)
    return RealDensity(fine, abs(fine - coarse), level, coarse)


# ---------------------------------------------------------------------------
# Hardy-Littlewood prediction
# ---------------------------------------------------------------------------


@dataclass
class HLPrediction:
    sigma_inf: float
    sigma_inf_err: float
    ball_volume: Fraction
    factors: Dict[int, Fraction]
    euler_product: float
    tail_constant: float
    tail_low: float
    tail_high: float
    total: float
    p0: Optional[int] = None
    h: Optional[int] = None
    p_cut: int = DEFAULT_P_CUT

    @property
    def low(self) -> float:
        return (self.sigma_inf - self.sigma_inf_err) * float(self.ball_volume) * self.euler_product * self.tail_low

    @property
    def high(self) -> float:
        return (self.sigma_inf + self.sigma_inf_err) * float(self.ball_volume) * self.euler_product * self.tail_high


def _check_prediction_gate(q: QuadraticForm, m: int):
    if q.n < 4:
        raise ValueError(
            "density predictions need n >= 4: for n = 3 the density function can take the values 0 and 2, "
            "so the constant-1 main term does not apply"
        )
    if not represents_global(q, m):
        raise NotSolvable(f"q = {m} has no rational points; no prediction")


def euler_factors(q: QuadraticForm, m: int, p_cut: int = DEFAULT_P_CUT, skip=()) -> Dict[int, Fraction]:
    """sigma_p for every p <= p_cut and every p | 2 det m, except those in skip."""
    ps = set(primes_upto(p_cut)) | set(distinct_prime_factors(2 * q.det * m))
    return {p: local_density(q, m, p).value for p in sorted(ps) if p not in skip}


def tail_envelope(q: QuadraticForm, m: int, factors: Dict[int, Fraction], p_cut: int) -> float:
    """Fitted C with |sigma_p - 1| <= C/p^2 on primes not dividing 2 det m, from the
    upper half of the computed range."""
    bad = set(distinct_prime_factors(2 * q.det * m))
    good = [p for p in factors if p not in bad and p > p_cut // 2]
    if not good:
        good = [p for p in factors if p not in bad]
    return max((abs(float(factors[p]) - 1.0) * p * p for p in good), default=1.0)


def hl_prediction(
    q: QuadraticForm,
    m: int,
    region: Box,
    p0: Optional[int] = None,
    h: int = 0,
    p_cut: int = DEFAULT_P_CUT,
    level: Optional[int] = None,
) -> HLPrediction:
    """sigma_inf(region) * vol(p0-ball of exponent h) * prod_{p <= p_cut, p != p0} sigma_p.

    The omitted tail prod_{p > p_cut} sigma_p lies in [exp(-2C/p_cut), exp(2C/p_cut)]
    when |sigma_p - 1| <= C/p^2 (sum over p > P of 1/p^2 is < 1/P)."""
    _check_prediction_gate(q, m)
    rd = real_density(q, m, region=region, level=level)
    if p0 is not None:
        vol = padic_ball_volume(q, m, p0, h)
        skip = (p0,)
    else:
        if h:
            raise ValueError("h > 0 needs p0")
        vol, skip = Fraction(1), ()
    factors = euler_factors(q, m, p_cut, skip)
    prod = Fraction(1)
    for v in factors.values():
        prod *= v
    C = tail_envelope(q, m, factors, p_cut)
    eps = 2.0 * C / p_cut
    euler = float(prod)
    total = rd.value * float(vol) * euler
    return HLPrediction(
        rd.value, rd.error, vol, factors, euler, C, math.exp(-eps), math.exp(eps), total, p0, h, p_cut
    )


# ---------------------------------------------------------------------------
# exponent fits
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class VolumeFit:
    slope: float
    intercept: float
    residual: float
    band: float


def volume_exponent_fit(series: Sequence[Tuple[int, float]], p0: int, expected_slope=None) -> VolumeFit:
    """Least-squares slope of log(volume) against h*log(p0).  band is max/min of
    volume/p0^(h*s) with s the expected slope (or the fitted one)."""
    pts = [(int(h), float(v)) for h, v in series]
    if len(pts) < 3 or len({h for h, _ in pts}) < 2:
        raise DegenerateFit("need at least 3 points with distinct h")
    if any(v <= 0 for _, v in pts):
        raise DegenerateFit("volumes must be positive")
    x = np.array([h * math.log(p0) for h, _ in pts])
    y = np.array([math.log(v) for _, v in pts])
    A = np.stack([x, np.ones_like(x)], axis=1)
    (slope, icpt), *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = float(np.sqrt(np.mean((A @ np.array([slope, icpt]) - y) ** 2)))
    s = float(slope) if expected_slope is None else float(expected_slope)
    ratios = [v / p0 ** (h * s) for h, v in pts]
    return VolumeFit(float(slope), float(icpt), resid, max(ratios) / min(ratios))
