"""Integral and p0-integral points of q = m in height balls.

The fast path for diagonal forms is a meet-in-the-middle join: the values of
the two-variable tail a_{n-1} u^2 + a_n v^2 over the box are tabulated and
sorted once, then every prefix (x_1..x_{n-2}) looks up its residual target by
binary search.  Non-diagonal forms scan x_1..x_{n-1} and solve the quadratic
in x_n exactly.  Points come out in lexicographic order, one numpy chunk per
value of x_1, so downstream consumers can stream millions of points.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, List, Optional, Sequence, Tuple

import numpy as np

from .errors import BoxTooLarge, DenominatorNotPPower
from .forms import Box, QuadraticForm, QuadricInstance

INT64_SAFE = 2**62
DEFAULT_ORACLE_CAP = 10**9


@dataclass(frozen=True)
class IntegralPoint:
    coords: Tuple[Fraction, ...]
    provenance: str = "enumerate"

    @property
    def n(self) -> int:
        return len(self.coords)


@dataclass(frozen=True)
class HeightBall:
    """Real bound (Euclidean radius or box) plus optional p0-adic bound p0^h."""

    radius: Optional[Fraction] = None
    region: Optional[Box] = None
    p0: Optional[int] = None
    h: int = 0

    def __post_init__(self):
        if self.radius is not None and self.radius <= 0:
            raise ValueError("radius must be positive")
        if self.h < 0:
            raise ValueError("h must be nonnegative")


def height_real(x) -> float:
    """Euclidean norm of a point with rational coordinates."""
    return math.sqrt(sum(Fraction(c) ** 2 for c in x))


def height_padic(x, p0: int):
    """Exponent e with max_i |x_i|_{p0} = p0^e; -inf for the zero vector."""
    best = -math.inf
    for c in x:
        c = Fraction(c)
        if c == 0:
            continue
        den = c.denominator
        e = 0
        while den % p0 == 0:
            den //= p0
            e += 1
        if den != 1:
            raise DenominatorNotPPower(f"denominator of {c} is not a power of {p0}")
        num = c.numerator
        while e == 0 and num % p0 == 0:
            num //= p0
            e -= 1
        best = max(best, e)
    return best


# ---------------------------------------------------------------------------
# scanning engine
# ---------------------------------------------------------------------------


def _axis(lo: int, hi: int, residue) -> np.ndarray:
    if residue is None:
        return np.arange(lo, hi + 1, dtype=np.int64)
    r, p = residue
    start = lo + ((r - lo) % p)
    return np.arange(start, hi + 1, p, dtype=np.int64)


def _value_bound(form: QuadraticForm, lo, hi, target) -> int:
    b = max(max(abs(a), abs(c)) for a, c in zip(lo, hi))
    g = sum(abs(x) for row in form.gram for x in row)
    return 2 * g * max(b, 1) ** 2 + abs(target) + 2 * form.n * max(b, 1) ** 2


class _Scanner:
    """Solutions y in Z^n of q(y) = target, lo <= y <= hi, optional sum y_i^2 <= radius_sq,
    optional congruence y_i = r_i mod p."""

    def __init__(self, form, target, lo, hi, radius_sq=None, residue=None):
        self.form = form
        self.n = form.n
        self.target = int(target)
        self.lo = [int(a) for a in lo]
        self.hi = [int(b) for b in hi]
        self.radius_sq = None if radius_sq is None else int(radius_sq)
        self.residue = residue  # (tuple r, p) or None
        self.empty = any(a > b for a, b in zip(self.lo, self.hi))
        self.big = _value_bound(form, self.lo, self.hi, self.target) >= INT64_SAFE
        self.diag = form.is_diagonal and self.n >= 2 and not self.big
        if self.diag and not self.empty:
            self._build_tail()

    def _res(self, i):
        if self.residue is None:
            return None
        r, p = self.residue
        return (r[i] % p, p)

    def first_axis(self) -> List[int]:
        if self.empty:
            return []
        if self.n == 1 or (self.n == 2 and self.diag):
            return [None]
        return [int(v) for v in _axis(self.lo[0], self.hi[0], self._res(0))]

    def _build_tail(self):
        n = self.n
        a, b = self.form.gram[n - 2][n - 2], self.form.gram[n - 1][n - 1]
        u = _axis(self.lo[n - 2], self.hi[n - 2], self._res(n - 2))
        v = _axis(self.lo[n - 1], self.hi[n - 1], self._res(n - 1))
        U, V = np.meshgrid(u, v, indexing="ij")
        U, V = U.ravel(), V.ravel()
        if self.radius_sq is not None:
            keep = U * U + V * V <= self.radius_sq
            U, V = U[keep], V[keep]
        vals = a * U * U + b * V * V
        order = np.lexsort((V, U, vals))
        self.t_vals, self.t_u, self.t_v = vals[order], U[order], V[order]
        self.t_sq = self.t_u * self.t_u + self.t_v * self.t_v

    # -- slabs ---------------------------------------------------------------

    def slab(self, x1) -> np.ndarray:
        if self.empty:
            return np.zeros((0, self.n), dtype=np.int64)
        if self.big:
            return self._slab_python(x1)
        if self.diag:
            return self._slab_diag(x1)
        return self._slab_general(x1)

    def _prefix_grid(self, x1, upto):
        """Rows (x1, x_2..x_upto-1) in lexicographic order."""
        cache = self.__dict__.setdefault("_mid", {})
        mid = cache.get(upto)
        if mid is None:
            # coordinates 2..upto-1 do not depend on x1; build their grid once
            axes = [_axis(self.lo[i], self.hi[i], self._res(i)) for i in range(1, upto)]
            if any(len(ax) == 0 for ax in axes):
                mid = np.zeros((0, upto - 1), dtype=np.int64)
            elif axes:
                mid = np.stack([g.ravel() for g in np.meshgrid(*axes, indexing="ij")], axis=1)
            else:
                mid = np.zeros((1, 0), dtype=np.int64)
            cache[upto] = mid
        return np.concatenate([np.full((len(mid), 1), x1, dtype=np.int64), mid], axis=1)

    def _slab_diag(self, x1) -> np.ndarray:
        n = self.n
        if n == 2:
            pre = np.zeros((1, 0), dtype=np.int64)
        else:
            pre = self._prefix_grid(x1, n - 2)
        coeffs = np.array(self.form.diagonal_coefficients[: n - 2], dtype=np.int64)
        pre_sq = (pre * pre).sum(axis=1)
        if self.radius_sq is not None and len(pre):
            keep = pre_sq <= self.radius_sq
            pre, pre_sq = pre[keep], pre_sq[keep]
        resid = self.target - (pre * pre * coeffs).sum(axis=1)
        left = np.searchsorted(self.t_vals, resid, side="left")
        right = np.searchsorted(self.t_vals, resid, side="right")
        counts = right - left
        total = int(counts.sum())
        if total == 0:
            return np.zeros((0, n), dtype=np.int64)
        rows = np.repeat(np.arange(len(pre)), counts)
        starts = np.repeat(left - np.concatenate(([0], np.cumsum(counts)[:-1])), counts)
        tidx = starts + np.arange(total)
        out = np.empty((total, n), dtype=np.int64)
        out[:, : n - 2] = pre[rows]
        out[:, n - 2] = self.t_u[tidx]
        out[:, n - 1] = self.t_v[tidx]
        if self.radius_sq is not None:
            out = out[pre_sq[rows] + self.t_sq[tidx] <= self.radius_sq]
        return out

    def _slab_general(self, x1) -> np.ndarray:
        n = self.n
        G = np.array(self.form.gram, dtype=np.int64)
        if n == 1:
            pre = np.zeros((1, 0), dtype=np.int64)
        else:
            pre = self._prefix_grid(x1, n - 1)
        if len(pre) == 0:
            return np.zeros((0, n), dtype=np.int64)
        A = G[: n - 1, : n - 1]
        qpre = np.einsum("ki,ij,kj->k", pre, A, pre) if n > 1 else np.zeros(1, dtype=np.int64)
        b = pre @ G[n - 1, : n - 1] if n > 1 else np.zeros(1, dtype=np.int64)
        c = qpre - self.target
        a = int(G[n - 1, n - 1])
        lo, hi = self.lo[n - 1], self.hi[n - 1]
        cand_rows, cand_y = [], []
        if a != 0:
            disc = b * b - a * c
            ok = disc >= 0
            idx = np.flatnonzero(ok)
            s = np.floor(np.sqrt(disc[idx].astype(np.float64))).astype(np.int64)
            d = disc[idx]
            s = np.where(s * s > d, s - 1, s)
            s = np.where((s + 1) * (s + 1) <= d, s + 1, s)
            sq = s * s == d
            idx, s = idx[sq], s[sq]
            for sign in (-1, 1):
                num = -b[idx] + sign * s
                good = num % a == 0
                if sign == 1:
                    good &= s != 0
                cand_rows.append(idx[good])
                cand_y.append(num[good] // a)
        else:
            nz = b != 0
            idx = np.flatnonzero(nz)
            num = -c[idx]
            good = num % (2 * b[idx]) == 0
            cand_rows.append(idx[good])
            cand_y.append(num[good] // (2 * b[idx][good]))
            for k in np.flatnonzero(~nz & (c == 0)):
                ys = np.arange(lo, hi + 1, dtype=np.int64)
                cand_rows.append(np.full(len(ys), k))
                cand_y.append(ys)
        rows = np.concatenate(cand_rows) if cand_rows else np.zeros(0, dtype=np.int64)
        ys = np.concatenate(cand_y) if cand_y else np.zeros(0, dtype=np.int64)
        keep = (ys >= lo) & (ys <= hi)
        if self.residue is not None:
            r, p = self._res(n - 1)
            keep &= ys % p == r
        rows, ys = rows[keep], ys[keep]
        order = np.lexsort((ys, rows))
        rows, ys = rows[order], ys[order]
        out = np.empty((len(rows), n), dtype=np.int64)
        out[:, : n - 1] = pre[rows]
        out[:, n - 1] = ys
        if self.radius_sq is not None:
            out = out[(out * out).sum(axis=1) <= self.radius_sq]
        return out

    def _slab_python(self, x1) -> np.ndarray:
        form, n = self.form, self.n
        G = form.gram
        axes = []
        if n > 1:
            axes = [[x1]] + [
                [int(v) for v in _axis(self.lo[i], self.hi[i], self._res(i))] for i in range(1, n - 1)
            ]
        found = []
        a = G[n - 1][n - 1]
        for pre in itertools.product(*axes) if n > 1 else [()]:
            qp = form(tuple(pre) + (0,))
            b = sum(G[n - 1][i] * pre[i] for i in range(n - 1))
            c = qp - self.target
            ys = set()
            if a != 0:
                disc = b * b - a * c
                if disc >= 0:
                    s = math.isqrt(disc)
                    if s * s == disc:
                        for num in (-b - s, -b + s):
                            if num % a == 0:
                                ys.add(num // a)
            elif b != 0:
                if (-c) % (2 * b) == 0:
                    ys.add(-c // (2 * b))
            elif c == 0:
                ys.update(range(self.lo[n - 1], self.hi[n - 1] + 1))
            for y in sorted(ys):
                pt = tuple(pre) + (y,)
                if not self.lo[n - 1] <= y <= self.hi[n - 1]:
                    continue
                if self.residue is not None:
                    r, p = self.residue
                    if y % p != r[n - 1] % p:
                        continue
                if self.radius_sq is not None and sum(t * t for t in pt) > self.radius_sq:
                    continue
                found.append(pt)
        return np.array(found, dtype=object).reshape(len(found), n)


def _run_slabs(scanner: _Scanner, threads: int = 1) -> Iterator[np.ndarray]:
    axis = scanner.first_axis()
    if threads <= 1:
        for x1 in axis:
            chunk = scanner.slab(x1)
            if len(chunk):
                yield chunk
        return
    window = 4 * threads
    with ThreadPoolExecutor(max_workers=threads) as pool:
        for i in range(0, len(axis), window):
            for chunk in pool.map(scanner.slab, axis[i : i + window]):
                if len(chunk):
                    yield chunk


def scan_chunks(form, target, lo, hi, radius_sq=None, residue=None, threads=1) -> Iterator[np.ndarray]:
    """Lexicographically ordered chunks of integer solutions of form(y) = target."""
    return _run_slabs(_Scanner(form, target, lo, hi, radius_sq, residue), threads)


# ---------------------------------------------------------------------------
# public enumerators
# ---------------------------------------------------------------------------


def _ball_bounds(n, N, sup_norm):
    N = Fraction(N)
    if N <= 0:
        raise ValueError("height bound must be positive")
    B = math.floor(N)
    radius_sq = None if sup_norm else math.floor(N * N)
    return [-B] * n, [B] * n, radius_sq


def integral_chunks(inst: QuadricInstance, N, sup_norm=False, threads=1) -> Iterator[np.ndarray]:
    """Integer points of q = m with height <= N (Euclidean, or sup-norm), as int arrays."""
    lo, hi, rsq = _ball_bounds(inst.n, N, sup_norm)
    return scan_chunks(inst.form, inst.m, lo, hi, rsq, threads=threads)


def scaled_box(region: Box, scale: int):
    lo = [math.ceil(a * scale) for a in region.lo]
    hi = [math.floor(b * scale) for b in region.hi]
    return lo, hi


def s_integral_setup(inst: QuadricInstance):
    """(scale, target, lo, hi) of the rescaled problem y = p0^h x on q = p0^{2h} m."""
    if inst.region is None:
        raise ValueError("p0-integral enumeration needs a bounded region")
    h = inst.h or 0
    p0 = inst.p0 if inst.p0 is not None else 1
    if h and inst.p0 is None:
        raise ValueError("h > 0 needs p0")
    scale = p0**h
    lo, hi = scaled_box(inst.region, scale)
    return scale, scale * scale * inst.m, lo, hi


def s_integral_chunks(inst: QuadricInstance, threads=1, residue=None) -> Iterator[np.ndarray]:
    """Rescaled points y = p0^h x (integer arrays) for x in X(Z[1/p0]) in the region and p0-ball."""
    scale, target, lo, hi = s_integral_setup(inst)
    return scan_chunks(inst.form, target, lo, hi, residue=residue, threads=threads)


def _to_points(chunks, scale, provenance) -> Iterator[IntegralPoint]:
    for chunk in chunks:
        for row in chunk.tolist():
            yield IntegralPoint(tuple(Fraction(int(c), scale) for c in row), provenance)


def enumerate_integral(inst: QuadricInstance, N, sup_norm=False, threads=1) -> Iterator[IntegralPoint]:
    return _to_points(integral_chunks(inst, N, sup_norm, threads), 1, "enumerate_integral")


def enumerate_s_integral(inst: QuadricInstance, threads=1) -> Iterator[IntegralPoint]:
    scale = s_integral_setup(inst)[0]
    return _to_points(s_integral_chunks(inst, threads), scale, "enumerate_s_integral")


def count_chunks(chunks) -> int:
    return sum(len(c) for c in chunks)


def naive_oracle(inst: QuadricInstance, N=None, sup_norm=False, cap=DEFAULT_ORACLE_CAP) -> Iterator[IntegralPoint]:
    """Full box scan checking q(x) = m exactly.  With N: integral points of height <= N;
    without N: the p0-integral points of the instance's region and p0-ball."""
    n = inst.n
    if N is not None:
        lo, hi, rsq = _ball_bounds(n, N, sup_norm)
        scale, target = 1, inst.m
    else:
        scale, target, lo, hi = s_integral_setup(inst)
        rsq = None
    sizes = [max(b - a + 1, 0) for a, b in zip(lo, hi)]
    total = math.prod(sizes)
    if total > cap:
        raise BoxTooLarge(f"naive oracle box has {total} candidates > cap {cap}")
    if total == 0:
        return iter(())
    rows = list(_oracle_rows(inst.form, target, lo, hi, rsq))
    return _to_points([np.array(rows, dtype=object).reshape(len(rows), n)], scale, "naive_oracle")


def _oracle_rows(form, target, lo, hi, rsq):
    n = form.n
    if _value_bound(form, lo, hi, target) >= INT64_SAFE:
        for x in itertools.product(*[range(a, b + 1) for a, b in zip(lo, hi)]):
            if form(x) == target and (rsq is None or sum(t * t for t in x) <= rsq):
                yield x
        return
    G = np.array(form.gram, dtype=np.int64)
    rest = [np.arange(a, b + 1, dtype=np.int64) for a, b in zip(lo[1:], hi[1:])]
    if rest:
        grids = np.meshgrid(*rest, indexing="ij")
        tail = np.stack([g.ravel() for g in grids], axis=1)
    else:
        tail = np.zeros((1, 0), dtype=np.int64)
    for x1 in range(lo[0], hi[0] + 1):
        pts = np.concatenate([np.full((len(tail), 1), x1, dtype=np.int64), tail], axis=1)
        vals = np.einsum("ki,ij,kj->k", pts, G, pts)
        ok = vals == target
        if rsq is not None:
            ok &= (pts * pts).sum(axis=1) <= rsq
        for row in pts[ok].tolist():
            yield tuple(row)
