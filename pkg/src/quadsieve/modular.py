"""Reductions and exact point counts mod p and mod p^k.

Counts mod p^k beyond brute-force range come from a recursion over p-adic
balls x0 + p^j Z_p^n.  On a ball where the gradient valuation g = v(grad q(x0))
is smaller than j, q is a submersion with constant Jacobian valuation, so the
ball's contribution is closed-form (Hensel); other balls are split into their
p^n children and balls whose image cannot reach m are pruned.  The same
recursion gives the exact p-adic measure of {q = m} under the gauge form with
omega ^ dq = dx_1 ^ ... ^ dx_n.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .arith import is_prime, legendre, valuation
from .errors import BadPrime, CapExceeded, DenominatorDivisibleByP, NotCoprime, NotStabilized
from .forms import QuadraticForm
from .poly import Polynomial

DEFAULT_SCAN_CAP = 10**8
_NODE_EXPANSION_CAP = 10**7
_MAX_DEPTH = 400


@dataclass(frozen=True)
class ResiduePoint:
    p: int
    k: int
    coords: Tuple[int, ...]
    on_quadric: Optional[bool] = None

    @property
    def modulus(self) -> int:
        return self.p**self.k


@dataclass(frozen=True)
class SubvarietySpec:
    """Z = X n (f_1 = ... = f_r = 0), usually r = 2 with f, g coprime."""

    polys: Tuple[Polynomial, ...]

    def __post_init__(self):
        polys = tuple(self.polys)
        object.__setattr__(self, "polys", polys)
        if not polys:
            raise ValueError("need at least one polynomial")
        if any(f.is_zero for f in polys):
            raise ValueError("polynomials must be nonzero")
        if len({f.nvars for f in polys}) != 1:
            raise ValueError("polynomials must share the ambient variables")
        self._advisory_coprimality()

    def _advisory_coprimality(self):
        import sympy

        n = self.nvars
        xs = sympy.symbols(f"x1:{n + 1}")
        exprs = [f.to_sympy(xs) for f in self.polys]
        for a, b in itertools.combinations(exprs, 2):
            g = sympy.gcd(a, b)
            if sympy.Poly(g, *xs).total_degree() > 0:
                raise NotCoprime(f"common factor {g}")

    @property
    def nvars(self) -> int:
        return self.polys[0].nvars

    @property
    def f(self) -> Polynomial:
        return self.polys[0]

    @property
    def g(self) -> Polynomial:
        return self.polys[1]

    def cleared(self, scale: int) -> "SubvarietySpec":
        out = object.__new__(SubvarietySpec)
        object.__setattr__(out, "polys", tuple(f.cleared(scale) for f in self.polys))
        return out


def reduce_point(x, p: int, k: int = 1, q: Optional[QuadraticForm] = None, m=None) -> ResiduePoint:
    """Coordinatewise reduction mod p^k of a point with p-integral rational coordinates."""
    mod = p**k
    coords = []
    for c in x:
        c = Fraction(c)
        if c.denominator % p == 0:
            raise DenominatorDivisibleByP(f"{c} is not {p}-integral")
        coords.append(c.numerator * pow(c.denominator, -1, mod) % mod)
    on = None
    if q is not None and m is not None:
        on = (q(coords) - m) % mod == 0
        if q(x) == m and not on:
            raise AssertionError("reduction broke the quadric relation")
    return ResiduePoint(p, k, tuple(coords), on)


# ---------------------------------------------------------------------------
# finite-field counts
# ---------------------------------------------------------------------------


def _residue_grid_chunks(n: int, mod: int, cap: int):
    total = mod**n
    if total > cap:
        raise CapExceeded(f"scan of {mod}^{n} = {total} tuples exceeds cap {cap}")
    if n == 1:
        yield np.arange(mod, dtype=np.int64).reshape(-1, 1)
        return
    rest = np.meshgrid(*[np.arange(mod, dtype=np.int64)] * (n - 1), indexing="ij")
    tail = np.stack([g.ravel() for g in rest], axis=1)
    for x1 in range(mod):
        yield np.concatenate([np.full((len(tail), 1), x1, dtype=np.int64), tail], axis=1)


def _form_values_mod(G: np.ndarray, pts: np.ndarray, mod: int) -> np.ndarray:
    n = G.shape[0]
    out = np.zeros(len(pts), dtype=np.int64)
    for i in range(n):
        for j in range(i, n):
            c = G[i, j] * (1 if i == j else 2) % mod
            if c:
                out = (out + c * (pts[:, i] * pts[:, j] % mod)) % mod
    return out


def value_distribution_scan(q: QuadraticForm, p: int, k: int = 1, cap=DEFAULT_SCAN_CAP) -> np.ndarray:
    """counts[t] = #{x in (Z/p^k)^n : q(x) = t mod p^k}, by scanning every tuple."""
    mod = p**k
    G = np.array(q.gram, dtype=np.int64) % mod
    counts = np.zeros(mod, dtype=np.int64)
    for pts in _residue_grid_chunks(q.n, mod, cap):
        counts += np.bincount(_form_values_mod(G, pts, mod), minlength=mod)
    return counts


def value_distribution_convolve(q: QuadraticForm, p: int, k: int = 1) -> List[int]:
    """Same table as value_distribution_scan for a diagonal form, summing over all
    tuples coordinate by coordinate (cyclic convolution of the one-variable tables)."""
    if not q.is_diagonal:
        raise ValueError("convolution path needs a diagonal form")
    mod = p**k
    xs = np.arange(mod, dtype=np.int64)
    total = np.zeros(mod, dtype=object)
    total[0] = 1
    for a in q.diagonal_coefficients:
        one = np.bincount((a % mod) * (xs * xs % mod) % mod, minlength=mod)
        nxt = np.zeros(mod, dtype=object)
        for r in np.flatnonzero(one):
            nxt += np.roll(total, int(r)) * int(one[r])
        total = nxt
    return [int(c) for c in total]


def count_quadric_ffield_brute(q: QuadraticForm, m: int, p: int, cap=DEFAULT_SCAN_CAP) -> int:
    """#{x in F_p^n : q(x) = m} by full scan."""
    return int(value_distribution_scan(q, p, 1, cap)[m % p])


def count_quadric_ffield_exact(q: QuadraticForm, m: int, p: int) -> int:
    """Closed-form #{x in F_p^n : q(x) = m} for odd p not dividing det(q)."""
    if p == 2 or q.det % p == 0:
        raise BadPrime(f"closed form needs odd p not dividing det; got p={p}, det={q.det}")
    n = q.n
    d = q.det
    if n % 2:
        if m % p == 0:
            return p ** (n - 1)
        return p ** (n - 1) + p ** ((n - 1) // 2) * legendre((-1) ** ((n - 1) // 2) * m * d, p)
    eta = legendre((-1) ** (n // 2) * d, p)
    nu = p - 1 if m % p == 0 else -1
    return p ** (n - 1) + nu * p ** ((n - 2) // 2) * eta


def count_subvariety_ffield(spec: SubvarietySpec, q: QuadraticForm, m: int, p: int, cap=DEFAULT_SCAN_CAP) -> int:
    """#{x in F_p^n : q(x) = m and every polynomial of spec vanishes} by scan."""
    G = np.array(q.gram, dtype=np.int64) % p
    total = 0
    for pts in _residue_grid_chunks(q.n, p, cap):
        ok = _form_values_mod(G, pts, p) == m % p
        for f in spec.polys:
            ok &= f.eval_mod(pts, p) == 0
        total += int(ok.sum())
    return total


def subvariety_points_ffield(spec: SubvarietySpec, q: QuadraticForm, m: int, p: int, cap=DEFAULT_SCAN_CAP):
    G = np.array(q.gram, dtype=np.int64) % p
    out = []
    for pts in _residue_grid_chunks(q.n, p, cap):
        ok = _form_values_mod(G, pts, p) == m % p
        for f in spec.polys:
            ok &= f.eval_mod(pts, p) == 0
        out.extend(tuple(r) for r in pts[ok].tolist())
    return out


# ---------------------------------------------------------------------------
# p-adic ball recursion
# ---------------------------------------------------------------------------


def _v(x: int, p: int):
    return math.inf if x == 0 else valuation(x, p)


class PadicQuadric:
    """q over Z_p, for exact counts mod p^k and measures of p-adic balls."""

    def __init__(self, q: QuadraticForm, p: int):
        if not is_prime(p):
            raise ValueError(f"{p} is not prime")
        self.q = q
        self.p = p
        self.n = q.n
        G = q.gram
        self.content = min(
            [_v(G[i][i], p) for i in range(self.n)]
            + [_v(2 * G[i][j], p) for i in range(self.n) for j in range(i + 1, self.n)]
        )
        self.good = p != 2 and q.det % p != 0

    def _grad_val(self, x0) -> float:
        return min(_v(g, self.p) for g in self.q.gradient(x0))

    def _children(self, x0, j):
        n, p = self.n, self.p
        if p**n > _NODE_EXPANSION_CAP:
            raise CapExceeded(f"ball expansion of {p}^{n} children exceeds cap")
        step = p**j
        for e in itertools.product(range(p), repeat=n):
            yield tuple(a + step * b for a, b in zip(x0, e))

    # -- counts mod p^k -----------------------------------------------------

    def count(self, m: int, k: int, start=None, depth: int = 0) -> int:
        """#{x mod p^k : x = start mod p^depth, q(x) = m mod p^k}."""
        if k < 0:
            raise ValueError("k must be >= 0")
        if depth > k:
            raise ValueError("depth exceeds k")
        if start is None and depth == 0 and self.good:
            return self._count_good(m, k)
        x0 = tuple(start) if start is not None else (0,) * self.n
        return self._count_node(m, k, x0, depth)

    def _count_good(self, m: int, k: int) -> int:
        p, n = self.p, self.n
        if k == 0:
            return 1
        smooth = count_quadric_ffield_exact(self.q, m, p) - (1 if m % p == 0 else 0)
        total = smooth * p ** ((k - 1) * (n - 1))
        if k == 1:
            return total + (1 if m % p == 0 else 0)
        if m % (p * p) == 0:
            total += p**n * self._count_good(m // (p * p), k - 2)
        return total

    def _count_node(self, m, k, x0, j) -> int:
        p, n = self.p, self.n
        r = m - self.q(x0)
        if j == k:
            return 1 if r % p**k == 0 else 0
        g = self._grad_val(x0)
        bound = min(j + g, 2 * j + self.content, k)
        if r % p ** int(bound) != 0:
            return 0
        if g < j:
            R = k - j
            g = int(g)
            if R <= g:
                return p ** (R * n)
            return p ** (R * n - R + g)
        return sum(self._count_node(m, k, c, j + 1) for c in self._children(x0, j))

    # -- exact measures -----------------------------------------------------

    def measure(self, m: int, start=None, depth: int = 0) -> Fraction:
        """Gauge-form measure of {x in Z_p^n : x = start mod p^depth, q(x) = m}."""
        if m == 0:
            raise ValueError("m must be nonzero")
        if start is None and depth == 0 and self.good:
            return self._measure_good(m)
        x0 = tuple(start) if start is not None else (0,) * self.n
        return self._measure_node(m, x0, depth)

    def _measure_good(self, m: int) -> Fraction:
        p, n = self.p, self.n
        smooth = count_quadric_ffield_exact(self.q, m, p) - (1 if m % p == 0 else 0)
        out = Fraction(smooth, p ** (n - 1))
        if m % (p * p) == 0:
            out += Fraction(p * p, p**n) * self._measure_good(m // (p * p))
        return out

    def _measure_node(self, m, x0, j) -> Fraction:
        if j > _MAX_DEPTH:
            raise NotStabilized("p-adic recursion did not terminate")
        p, n = self.p, self.n
        r = m - self.q(x0)
        g = self._grad_val(x0)
        if g < j:
            g = int(g)
            if r % p ** (j + g):
                return Fraction(0)
            return Fraction(p**g, p ** (j * (n - 1)))
        bound = min(j + g, 2 * j + self.content)
        if r % p ** int(bound):
            return Fraction(0)
        return sum((self._measure_node(m, c, j + 1) for c in self._children(x0, j)), Fraction(0))


def count_prime_power(q: QuadraticForm, m: int, p: int, k: int, method="auto", cap=DEFAULT_SCAN_CAP) -> int:
    """#{x in (Z/p^k)^n : q(x) = m mod p^k}.  method: "scan", "lift" or "auto"."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if method == "scan":
        return int(value_distribution_scan(q, p, k, cap)[m % p**k])
    if method not in ("auto", "lift"):
        raise ValueError(f"unknown method {method!r}")
    return PadicQuadric(q, p).count(m, k)


def smooth_residues(q: QuadraticForm, m: int, p: int, e: int, cap=DEFAULT_SCAN_CAP):
    """Residues xi mod p^e with q(xi) = m mod p^e and grad q(xi) nonzero mod p (scan)."""
    mod = p**e
    G = np.array(q.gram, dtype=np.int64) % mod
    out = []
    for pts in _residue_grid_chunks(q.n, mod, cap):
        ok = _form_values_mod(G, pts, mod) == m % mod
        grad = (2 * (pts[ok] @ G.T)) % p
        rows = pts[ok][(grad != 0).any(axis=1)]
        out.extend(tuple(r) for r in rows.tolist())
    return out


def residues_on_quadric(q: QuadraticForm, m: int, p: int, e: int, cap=DEFAULT_SCAN_CAP):
    mod = p**e
    G = np.array(q.gram, dtype=np.int64) % mod
    out = []
    for pts in _residue_grid_chunks(q.n, mod, cap):
        ok = _form_values_mod(G, pts, mod) == m % mod
        out.extend(tuple(r) for r in pts[ok].tolist())
    return out
