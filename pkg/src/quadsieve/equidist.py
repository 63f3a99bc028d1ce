"""Counts in congruence classes x = xi mod l against the adelic main term,
and power-saving fits of the discrepancy."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from functools import reduce
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .arith import prime_power_parts
from .density import DEFAULT_P_CUT, HLPrediction, hl_prediction, stabilization_start
from .errors import DegenerateFit, NotStabilized
from .enumeration import _ball_bounds, s_integral_chunks, s_integral_setup, scan_chunks
from .forms import QuadraticForm, QuadricInstance
from .modular import PadicQuadric, residues_on_quadric


@dataclass(frozen=True)
class CongruenceNeighborhood:
    """Points x with x = xi (mod l), l coprime to p0.  xi is stored mod l; the
    per-prime residues xi mod p^e are derived from it."""

    modulus: int
    residue: Tuple[int, ...]

    def __post_init__(self):
        if self.modulus < 1:
            raise ValueError("modulus must be positive")
        object.__setattr__(self, "residue", tuple(int(r) % self.modulus for r in self.residue))

    @classmethod
    def make(cls, q: QuadraticForm, m: int, modulus: int, residue, p0: Optional[int] = None):
        nb = cls(modulus, tuple(residue))
        if len(nb.residue) != q.n:
            raise ValueError("residue has the wrong dimension")
        if p0 is not None and math.gcd(modulus, p0) != 1:
            raise ValueError(f"modulus {modulus} must be coprime to p0={p0}")
        if (q(nb.residue) - m) % modulus:
            raise ValueError(f"residue {nb.residue} is not on q = {m} mod {modulus}")
        return nb

    @property
    def factored(self) -> Dict[int, int]:
        return dict(prime_power_parts(self.modulus)) if self.modulus > 1 else {}

    def local_residue(self, p: int) -> Tuple[int, ...]:
        pe = p ** self.factored[p]
        return tuple(r % pe for r in self.residue)


def _inverse_scale(inst: QuadricInstance, modulus: int) -> int:
    scale = s_integral_setup(inst)[0]
    return pow(scale, -1, modulus) if modulus > 1 else 0


def count_in_neighborhood(inst: QuadricInstance, nbhd: CongruenceNeighborhood, N=None, threads=1) -> int:
    """Number of enumerated points with x = xi mod l.  Without N: p0-integral points of
    the instance (region, p0, h); with N: integral points of Euclidean height <= N."""
    l = nbhd.modulus
    if N is not None:
        lo, hi, rsq = _ball_bounds(inst.n, N, False)
        res = None if l == 1 else (nbhd.residue, l)
        return sum(len(c) for c in scan_chunks(inst.form, inst.m, lo, hi, rsq, res, threads))
    scale = s_integral_setup(inst)[0]
    res = None if l == 1 else (tuple(scale * r % l for r in nbhd.residue), l)
    return sum(len(c) for c in s_integral_chunks(inst, threads, res))


def class_counts(inst: QuadricInstance, modulus: int, threads=1) -> Dict[Tuple[int, ...], int]:
    """Counts of the instance's p0-integral points in every class mod l, one enumeration pass."""
    inv = _inverse_scale(inst, modulus)
    n = inst.n
    weights = np.array([modulus**i for i in range(n - 1, -1, -1)], dtype=object)
    totals: Dict[int, int] = {}
    for chunk in s_integral_chunks(inst, threads):
        red = (np.asarray(chunk, dtype=object) % modulus) * inv % modulus
        keys = (red * weights).sum(axis=1) if len(red) else []
        ks, cs = np.unique(np.asarray(keys, dtype=np.int64), return_counts=True)
        for k, c in zip(ks.tolist(), cs.tolist()):
            totals[k] = totals.get(k, 0) + c
    out = {}
    for k, c in sorted(totals.items()):
        digits = []
        for _ in range(n):
            k, r = divmod(k, modulus)
            digits.append(r)
        out[tuple(reversed(digits))] = c
    return out


# ---------------------------------------------------------------------------
# main terms
# ---------------------------------------------------------------------------


def class_density(q: QuadraticForm, m: int, p: int, xi, e: int, max_extra: int = 12) -> Fraction:
    """Measure of {x in Z_p^n : q(x) = m, x = xi mod p^e}: lift counts mod p^k normalized
    by p^{k(n-1)}, returned once two consecutive k agree."""
    pq = PadicQuadric(q, p)
    n = q.n
    k = max(e, stabilization_start(q, m, p)) + 1
    prev = Fraction(pq.count(m, k, xi, e), p ** (k * (n - 1)))
    for k in range(k + 1, k + max_extra + 1):
        cur = Fraction(pq.count(m, k, xi, e), p ** (k * (n - 1)))
        if cur == prev:
            return cur
        prev = cur
    raise NotStabilized(f"class measure at p={p} did not stabilize")


@dataclass
class MainTerm:
    value: float
    local_factors: Dict[int, Fraction]
    base: HLPrediction


def main_term(
    inst: QuadricInstance,
    nbhd: CongruenceNeighborhood,
    base: Optional[HLPrediction] = None,
    p_cut: int = DEFAULT_P_CUT,
) -> MainTerm:
    """Hardy-Littlewood main term with sigma_p replaced, at each p | l, by the measure
    of the class x = xi mod p^e."""
    if base is None:
        base = hl_prediction(inst.form, inst.m, inst.region, inst.p0, inst.h or 0, p_cut)
    value = base.total
    local = {}
    for p, e in nbhd.factored.items():
        c = class_density(inst.form, inst.m, p, nbhd.local_residue(p), e)
        local[p] = c
        value *= float(c / base.factors[p])
    return MainTerm(value, local, base)


def all_classes(q: QuadraticForm, m: int, modulus: int, smooth_only: bool = False):
    """Residues xi mod l on q = m mod l (CRT over the prime powers of l); with smooth_only,
    only classes whose gradient is nonzero mod every p | l."""
    parts = list(prime_power_parts(modulus).items()) if modulus > 1 else []
    per = []
    for p, e in parts:
        rs = residues_on_quadric(q, m, p, e)
        if smooth_only:
            rs = [r for r in rs if any(g % p for g in q.gradient(r))]
        per.append((p**e, rs))
    out = [tuple([0] * q.n)]
    mod = 1
    for pe, rs in per:
        nxt = []
        for a in out:
            for b in rs:
                nxt.append(tuple(_crt(x, mod, y, pe) for x, y in zip(a, b)))
        out, mod = nxt, mod * pe
    return sorted(out)


def _crt(a, m1, b, m2):
    return (a + m1 * ((b - a) * pow(m1, -1, m2) % m2)) % (m1 * m2)


# ---------------------------------------------------------------------------
# discrepancy
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DiscrepancyRecord:
    height: float
    count: int
    main: float
    modulus: int = 1

    @property
    def abs_err(self) -> float:
        return abs(self.count - self.main)

    @property
    def rel_err(self) -> float:
        return self.abs_err / self.main


@dataclass
class DiscrepancyFit:
    records: List[DiscrepancyRecord]
    slope: float
    delta_hat: float
    residual: float
    low_confidence: bool


def fit_discrepancy(records: Sequence[DiscrepancyRecord], min_points: int = 4) -> DiscrepancyFit:
    """Least squares of log|count - main| on log(main): slope = 1 - delta_hat.
    Records with zero error are dropped; a flat or poorly determined fit is flagged."""
    records = list(records)
    if len(records) < min_points:
        raise DegenerateFit(f"need at least {min_points} schedule points")
    if any(r.main <= 0 for r in records):
        raise DegenerateFit("main terms must be positive")
    use = [r for r in records if r.abs_err > 0]
    if len(use) < 2 or len({r.main for r in use}) < 2:
        raise DegenerateFit("not enough nonzero errors to fit")
    x = np.log([r.main for r in use])
    y = np.log([r.abs_err for r in use])
    A = np.stack([x, np.ones_like(x)], axis=1)
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    slope = float(coef[0])
    resid = float(np.sqrt(np.mean((A @ coef - y) ** 2)))
    low = abs(slope) < 0.05 or resid > 0.5 or len(use) < min_points or not (0.0 < 1.0 - slope < 1.0)
    return DiscrepancyFit(records, slope, 1.0 - slope, resid, low)


def discrepancy_series(
    inst: QuadricInstance,
    nbhd: CongruenceNeighborhood,
    heights: Sequence[int],
    threads: int = 1,
    p_cut: int = DEFAULT_P_CUT,
) -> DiscrepancyFit:
    """Records over a schedule of p0-adic exponents h, and the fitted exponent."""
    recs = []
    for h in heights:
        sub = replace(inst, h=int(h))
        mt = main_term(sub, nbhd, p_cut=p_cut)
        recs.append(DiscrepancyRecord(h, count_in_neighborhood(sub, nbhd, threads=threads), mt.value, nbhd.modulus))
    return fit_discrepancy(recs)
