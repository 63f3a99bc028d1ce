"""Points whose reduction mod some prime p in (N1, N2] lands on Z = X n (f = g = 0),
plus the Ekedahl-type gcd count and the half-dimensional representability count.

Everything runs on the rescaled points y = p0^h x of q = p0^{2h} m.  For p != p0,
x mod p lies on Z(F_p) iff p divides both f_h(y) and g_h(y), where
f_h(y) = p0^{h deg f} f(y / p0^h); the quadric relation holds exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import nnls

from .arith import factorize, is_prime, primes_between, smallest_prime_factor_table
from .enumeration import s_integral_chunks, s_integral_setup
from .errors import CapExceeded, DegenerateFit
from .forms import QuadricInstance
from .modular import DEFAULT_SCAN_CAP, SubvarietySpec, subvariety_points_ffield
from .poly import Polynomial

INF = math.inf


@dataclass(frozen=True)
class BadPointRecord:
    point: Tuple[int, ...]  # rescaled y = p0^h x
    scale: int
    witnesses: Tuple[int, ...]
    generic: bool = False

    @property
    def x(self) -> Tuple[Fraction, ...]:
        return tuple(Fraction(c, self.scale) for c in self.point)


@dataclass
class BadPointResult:
    count: int
    total: int
    generic: int
    records: List[BadPointRecord]
    range: Tuple[float, float]


def _in_range(p, N1, N2, p0):
    return N1 < p <= N2 and p != p0


def _range_has_prime(N1, N2, p0) -> bool:
    if N2 == INF:
        return True
    return any(p != p0 for p in primes_between(int(N1), int(N2)))


def _gcd_array(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if a.dtype == object or b.dtype == object:
        return np.array([math.gcd(int(u), int(v)) for u, v in zip(a, b)], dtype=object)
    return np.gcd(a, b)


def _cleared(spec: SubvarietySpec, scale: int) -> List[Polynomial]:
    return [f.cleared(scale) for f in spec.polys]


def bad_point_count(inst: QuadricInstance, spec: SubvarietySpec, N1, N2=INF, threads=1, keep_records=True) -> BadPointResult:
    """V(N1, N2): points with a witness prime N1 < p <= N2 (p != p0).  Witnesses are the
    prime factors in range of gcd(f_h(y), g_h(y)); points with f_h = g_h = 0 are bad for
    every prime and are counted once, flagged generic."""
    if inst.p0 is not None and N1 < inst.p0:
        raise ValueError("need N1 >= p0")
    scale = s_integral_setup(inst)[0]
    polys = _cleared(spec, scale)
    p0 = inst.p0
    generic_ok = _range_has_prime(N1, N2, p0)
    count = total = generic = 0
    records: List[BadPointRecord] = []
    for chunk in s_integral_chunks(inst, threads):
        total += len(chunk)
        g = np.abs(polys[0].eval_array(chunk))
        for f in polys[1:]:
            g = _gcd_array(g, np.abs(f.eval_array(chunk)))
        zero = g == 0
        for i in np.flatnonzero(zero):
            if generic_ok:
                count += 1
                generic += 1
                if keep_records:
                    records.append(BadPointRecord(tuple(int(c) for c in chunk[i]), scale, (), True))
        cand = np.flatnonzero(~zero & (g > N1))
        for i in cand:
            ws = tuple(p for p in sorted(set(factorize(int(g[i])))) if _in_range(p, N1, N2, p0))
            if ws:
                count += 1
                if keep_records:
                    records.append(BadPointRecord(tuple(int(c) for c in chunk[i]), scale, ws))
    return BadPointResult(count, total, generic, records, (N1, N2))


def verify_record(inst: QuadricInstance, spec: SubvarietySpec, rec: BadPointRecord) -> bool:
    """Re-check a record from scratch: reduce y mod each witness p, evaluate f_h, g_h and
    the rescaled quadric relation mod p.  Generic records need f_h(y) = g_h(y) = 0."""
    scale, target = s_integral_setup(inst)[:2]
    polys = _cleared(spec, scale)
    y = rec.point
    if inst.form(y) != target:
        return False
    if rec.generic:
        return all(f(y) == 0 for f in polys)
    if not rec.witnesses:
        return False
    for p in rec.witnesses:
        if not is_prime(p) or p == inst.p0:
            return False
        r = tuple(c % p for c in y)
        if any(f(r) % p for f in polys):
            return False
        if (inst.form(r) - target) % p:
            return False
    return True


def naive_bad_points(inst: QuadricInstance, spec: SubvarietySpec, N1, N2=INF):
    """Per-prime reduction filter over every prime in (N1, min(N2, bound)], bound the
    largest |f_h(y)| or |g_h(y)| seen.  Returns the set of bad y."""
    scale = s_integral_setup(inst)[0]
    polys = _cleared(spec, scale)
    pts = [tuple(int(c) for c in row) for chunk in s_integral_chunks(inst) for row in chunk.tolist()]
    vals = [[f(y) for f in polys] for y in pts]
    bound = max((abs(v) for row in vals for v in row), default=0)
    top = bound if N2 == INF else min(bound, int(N2))
    primes = [p for p in primes_between(int(N1), max(int(top), int(N1))) if p != inst.p0]
    generic_ok = _range_has_prime(N1, N2, inst.p0)
    bad = set()
    for y, row in zip(pts, vals):
        if all(v == 0 for v in row):
            if generic_ok:
                bad.add(y)
            continue
        for p in primes:
            r = tuple(c % p for c in y)
            if all(f(r) % p == 0 for f in polys):
                bad.add(y)
                break
    return bad


# ---------------------------------------------------------------------------
# bound shapes
# ---------------------------------------------------------------------------


def _term(name: str, p0=None) -> Callable[[float], float]:
    if name == "const":
        return lambda t: 1.0
    if name == "inv_MlogM":
        return lambda M: 1.0 / (M * math.log(M))
    if name == "inv_sqrt_hlogp0":
        if p0 is None:
            raise ValueError("inv_sqrt_hlogp0 needs p0")
        return lambda h: 1.0 / math.sqrt(h * math.log(p0))
    if name == "logB_over_M":
        return lambda t: t
    raise ValueError(f"unknown model term {name!r}")


@dataclass
class BoundShapeFit:
    series: List[Tuple[float, float]]
    terms: List[str]
    coefficients: List[float]
    residual: float
    nonincreasing: bool


def bound_shape_check(series: Sequence[Tuple[float, float]], model: Sequence[str] = ("inv_MlogM", "const"), p0=None) -> BoundShapeFit:
    """Nonnegative least squares of the ratios against the model terms."""
    series = [(float(a), float(b)) for a, b in series]
    if len(series) < 4:
        raise DegenerateFit("need at least 4 series points")
    if any(r < 0 for _, r in series):
        raise ValueError("ratios must be nonnegative")
    fns = [_term(t, p0) for t in model]
    A = np.array([[fn(x) for fn in fns] for x, _ in series])
    b = np.array([r for _, r in series])
    coef, res = nnls(A, b)
    rs = [r for _, r in sorted(series)]
    mono = all(u >= v for u, v in zip(rs, rs[1:]))
    return BoundShapeFit(series, list(model), [float(c) for c in coef], float(res), mono)


# ---------------------------------------------------------------------------
# medium primes
# ---------------------------------------------------------------------------


def medium_prime_count(inst: QuadricInstance, spec: SubvarietySpec, p: int, cap=DEFAULT_SCAN_CAP, threads=1) -> int:
    """Points of the instance with x mod p in Z(F_p), counted class by class: for each
    lambda in Z(F_p) enumerate y = p0^h lambda (mod p) on the rescaled quadric.  Each
    such y = lam_h + p z satisfies z . grad q(lam_h) = (target - q(lam_h))/p (mod p),
    which is asserted on every point."""
    if p == inst.p0 or not is_prime(p):
        raise ValueError("p must be a prime different from p0")
    if p**inst.n > cap:
        raise CapExceeded(f"scan of Z(F_{p}) needs {p}^{inst.n} > {cap}")
    scale, target = s_integral_setup(inst)[:2]
    q = inst.form
    total = 0
    for lam in subvariety_points_ffield(spec, q, inst.m, p, cap):
        lam_h = tuple(scale * c % p for c in lam)
        grad = q.gradient(lam_h)
        rhs_num = target - q(lam_h)
        if rhs_num % p:
            raise AssertionError("class is not on the rescaled quadric mod p")
        rhs = (rhs_num // p) % p
        for chunk in s_integral_chunks(inst, threads, residue=(lam_h, p)):
            z = (np.asarray(chunk, dtype=object) - np.array(lam_h, dtype=object)) // p
            lhs = (z * np.array(grad, dtype=object)).sum(axis=1) % p
            if len(chunk) and not all(int(v) == rhs for v in lhs):
                raise AssertionError("lattice condition violated")
            total += len(chunk)
    return total


def naive_prime_filter_count(inst: QuadricInstance, spec: SubvarietySpec, p: int) -> int:
    scale = s_integral_setup(inst)[0]
    polys = _cleared(spec, scale)
    c = 0
    for chunk in s_integral_chunks(inst):
        ok = np.ones(len(chunk), dtype=bool)
        for f in polys:
            ok &= f.eval_mod(np.asarray(chunk, dtype=np.int64) % p, p) == 0
        c += int(ok.sum())
    return c


# ---------------------------------------------------------------------------
# Ekedahl-type gcd count
# ---------------------------------------------------------------------------


@dataclass
class EkedahlResult:
    count: int
    all_zero: int
    total: int


def _largest_prime_factor(g: np.ndarray) -> np.ndarray:
    g = g.astype(np.int64)
    top = int(g.max(initial=1))
    spf = smallest_prime_factor_table(max(top, 2))
    out = np.zeros_like(g)
    cur = g.copy()
    while True:
        act = cur > 1
        if not act.any():
            return out
        p = spf[cur[act]]
        out[act] = np.maximum(out[act], p)
        cur[act] = cur[act] // p


def ekedahl_count(polys: Sequence[Polynomial], B: int, M, cap: int = 10**8) -> EkedahlResult:
    """#{Y in Z^d, |Y|_inf <= B : some prime p >= M divides every poly(Y)}.  Y where all
    polys vanish count as bad (0 is divisible by every prime) and are tallied separately."""
    d = polys[0].nvars
    if (2 * B + 1) ** d > cap:
        raise CapExceeded(f"(2B+1)^d = {(2 * B + 1) ** d} > {cap}")
    axis = np.arange(-B, B + 1, dtype=np.int64)
    rest = np.meshgrid(*[axis] * (d - 1), indexing="ij") if d > 1 else []
    tail = np.stack([r.ravel() for r in rest], axis=1) if d > 1 else np.zeros((1, 0), dtype=np.int64)
    count = zeros = 0
    for y1 in axis:
        pts = np.concatenate([np.full((len(tail), 1), y1, dtype=np.int64), tail], axis=1)
        g = np.abs(polys[0].eval_array(pts))
        for f in polys[1:]:
            g = _gcd_array(g, np.abs(f.eval_array(pts)))
        z = g == 0
        zeros += int(z.sum())
        rest_g = g[~z & (g >= M)]
        if len(rest_g):
            if rest_g.dtype == object or int(rest_g.max()) > 5 * 10**7:
                lp = np.array([max(factorize(int(v))) for v in rest_g])
            else:
                lp = _largest_prime_factor(rest_g)
            count += int((lp >= M).sum())
    return EkedahlResult(count + zeros, zeros, (2 * B + 1) ** d)


# ---------------------------------------------------------------------------
# half-dimensional count
# ---------------------------------------------------------------------------


@dataclass
class HalfDimResult:
    count: int
    total: int
    negative_target_only: bool = False

    @property
    def fraction(self) -> float:
        return self.count / self.total if self.total else 0.0


def representable(t: int, a: int) -> bool:
    """Is t = u^2 + a v^2 for integers u, v?  Scan v <= sqrt(t/a) with an isqrt test."""
    if t < 0:
        return False
    v = 0
    while a * v * v <= t:
        r = t - a * v * v
        if math.isqrt(r) ** 2 == r:
            return True
        v += 1
    return False


def representable_table(T: int, a: int) -> np.ndarray:
    """rep[t] for 0 <= t <= T, marking every u^2 + a v^2 <= T."""
    rep = np.zeros(T + 1, dtype=bool)
    v = 0
    while a * v * v <= T:
        base = a * v * v
        u = np.arange(math.isqrt(T - base) + 1, dtype=np.int64)
        rep[u * u + base] = True
        v += 1
    return rep


def halfdim_count(a: int, tail: Sequence[int], c: int, B: int) -> HalfDimResult:
    """#{Y in Z^d, |Y|_inf <= B : c - sum a_i Y_i^2 = u^2 + a v^2 is solvable}."""
    if a < 1 or B < 1:
        raise ValueError("need a >= 1 and B >= 1")
    d = len(tail)
    total = (2 * B + 1) ** d
    # squares are symmetric: tabulate multiplicities of each |Y_i|
    ys = np.arange(0, B + 1, dtype=np.int64)
    mult = np.where(ys == 0, 1, 2)
    tmax = c - sum(min(0, ai) * B * B for ai in tail)
    if tmax < 0:
        return HalfDimResult(0, total, True)
    rep = representable_table(int(tmax), a)
    vals = np.array([c], dtype=np.int64)
    weights = np.array([1], dtype=np.int64)
    count = 0
    if d == 0:
        return HalfDimResult(int(rep[c]) if c >= 0 else 0, 1)
    # fold all but the last coordinate, then count the last one vectorized
    for ai in tail[:-1]:
        nv = (vals[:, None] - ai * ys[None, :] ** 2).ravel()
        nw = (weights[:, None] * mult[None, :]).ravel()
        uv, inv = np.unique(nv, return_inverse=True)
        vals, weights = uv, np.bincount(inv, weights=nw).astype(np.int64)
    last = tail[-1]
    for v0, w0 in zip(vals.tolist(), weights.tolist()):
        t = v0 - last * ys * ys
        ok = t >= 0
        hits = np.zeros(len(t), dtype=bool)
        hits[ok] = rep[t[ok]]
        count += w0 * int((hits * mult).sum())
    return HalfDimResult(count, total)
