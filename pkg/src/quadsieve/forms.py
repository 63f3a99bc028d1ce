"""Exact quadratic-form algebra over Q: diagonal models, local invariants,
isotropy and representability over R and Q_p.

Gram convention: q(x) = x^T G x with G an integral symmetric matrix, so G[i][i]
is the coefficient of x_i^2 and 2*G[i][j] the coefficient of x_i*x_j.  A form
with odd cross coefficients (e.g. xy) has no integral Gram; model it by 2q,
which has the same isotropy behaviour.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import List, Optional, Sequence, Tuple, Union

import sympy

from .arith import is_prime, legendre, split_valuation
from .errors import DegenerateForm

REAL = "real"


@dataclass(frozen=True)
class Place:
    """A place of Q: Place(None) is the real place, Place(p) the p-adic one."""

    p: Optional[int] = None

    def __post_init__(self):
        if self.p is not None and not is_prime(self.p):
            raise ValueError(f"{self.p} is not prime")

    @property
    def is_real(self) -> bool:
        return self.p is None

    def __str__(self):
        return "inf" if self.p is None else str(self.p)


Real = Place(None)


def FinitePrime(p: int) -> Place:
    return Place(p)


def as_place(v) -> Place:
    if isinstance(v, Place):
        return v
    if v is None or v == REAL or v == "inf":
        return Real
    return Place(int(v))


def _det(rows: Sequence[Sequence[int]]) -> int:
    return int(sympy.Matrix(rows).det())


@dataclass(frozen=True)
class QuadraticForm:
    """Nondegenerate integral quadratic form given by its Gram matrix."""

    gram: Tuple[Tuple[int, ...], ...]
    det: int = field(init=False, compare=False)

    def __post_init__(self):
        rows = []
        for row in self.gram:
            r = []
            for a in row:
                if isinstance(a, bool) or Fraction(a).denominator != 1:
                    raise ValueError(f"Gram entry {a!r} is not an integer")
                r.append(int(a))
            rows.append(tuple(r))
        n = len(rows)
        if n == 0 or any(len(r) != n for r in rows):
            raise ValueError("Gram matrix must be square and nonempty")
        for i in range(n):
            for j in range(i):
                if rows[i][j] != rows[j][i]:
                    raise ValueError("Gram matrix must be symmetric")
        object.__setattr__(self, "gram", tuple(rows))
        d = _det(rows)
        if d == 0:
            raise DegenerateForm("det(gram) = 0")
        object.__setattr__(self, "det", d)

    @classmethod
    def diagonal(cls, coeffs: Sequence[int]) -> "QuadraticForm":
        n = len(coeffs)
        return cls(tuple(tuple(int(coeffs[i]) if i == j else 0 for j in range(n)) for i in range(n)))

    @classmethod
    def parse(cls, text: str) -> "QuadraticForm":
        """Diagonal shorthand "1,1,1,-1" or a JSON row-major Gram matrix."""
        text = text.strip()
        if text.startswith("["):
            return cls(tuple(tuple(r) for r in json.loads(text)))
        parts = text.split(",")
        if any(not s.strip() for s in parts):
            raise ValueError(f"malformed form literal {text!r}")
        return cls.diagonal([int(s) for s in parts])

    @property
    def n(self) -> int:
        return len(self.gram)

    @property
    def is_diagonal(self) -> bool:
        return all(self.gram[i][j] == 0 for i in range(self.n) for j in range(self.n) if i != j)

    @property
    def diagonal_coefficients(self) -> Tuple[int, ...]:
        return tuple(self.gram[i][i] for i in range(self.n))

    def __call__(self, x) -> Union[int, Fraction]:
        g = self.gram
        n = self.n
        s = 0
        for i in range(n):
            if x[i] == 0:
                continue
            s += g[i][i] * x[i] * x[i]
            for j in range(i + 1, n):
                if g[i][j]:
                    s += 2 * g[i][j] * x[i] * x[j]
        return s

    def gradient(self, x):
        g = self.gram
        return tuple(2 * sum(g[i][j] * x[j] for j in range(self.n)) for i in range(self.n))

    def literal(self) -> str:
        if self.is_diagonal:
            return ",".join(str(a) for a in self.diagonal_coefficients)
        return json.dumps([list(r) for r in self.gram])

    def transform(self, U) -> "QuadraticForm":
        """The form x -> q(U x) for an integral matrix U."""
        n = self.n
        g = self.gram
        rows = [
            [sum(U[a][i] * g[a][b] * U[b][j] for a in range(n) for b in range(n)) for j in range(n)]
            for i in range(n)
        ]
        return QuadraticForm(tuple(tuple(r) for r in rows))

    def diagonal_model(self):
        """Cached (diag, T) with T^T G T = diag(diag)."""
        cached = self.__dict__.get("_diag")
        if cached is None:
            cached = _diagonalize(self.gram)
            object.__setattr__(self, "_diag", cached)
        return cached


def _diagonalize(gram):
    n = len(gram)
    A = [[Fraction(a) for a in row] for row in gram]
    T = [[Fraction(int(i == j)) for j in range(n)] for i in range(n)]

    def add_col(dst, src, c):
        # x_dst' basis change: column dst += c * column src, applied congruently
        for r in range(n):
            T[r][dst] += c * T[r][src]
        for r in range(n):
            A[r][dst] += c * A[r][src]
        for r in range(n):
            A[dst][r] += c * A[src][r]

    def swap(i, j):
        for r in range(n):
            T[r][i], T[r][j] = T[r][j], T[r][i]
        A[i], A[j] = A[j], A[i]
        for r in range(n):
            A[r][i], A[r][j] = A[r][j], A[r][i]

    for k in range(n):
        if A[k][k] == 0:
            piv = next((i for i in range(k + 1, n) if A[i][i] != 0), None)
            if piv is not None:
                swap(k, piv)
            else:
                j = next((j for j in range(k + 1, n) if A[k][j] != 0), None)
                if j is None:
                    raise DegenerateForm("zero row during diagonalization")
                add_col(k, j, Fraction(1))
        for j in range(k + 1, n):
            if A[k][j] != 0:
                add_col(j, k, -A[k][j] / A[k][k])
    diag = [A[i][i] for i in range(n)]
    if any(a == 0 for a in diag):
        raise DegenerateForm("degenerate form")
    return tuple(diag), tuple(tuple(r) for r in T)


def diagonalize(q: QuadraticForm):
    """Return (diag, T): rationals a_1..a_n and a matrix T with T^T G T = diag(a)."""
    return q.diagonal_model()


def _square_class(a) -> int:
    """Integer in the same square class as the nonzero rational a."""
    a = Fraction(a)
    if a == 0:
        raise ValueError("zero has no square class")
    return a.numerator * a.denominator


def hilbert_symbol(a, b, v) -> int:
    """Hilbert symbol (a, b)_v of nonzero rationals."""
    v = as_place(v)
    a, b = _square_class(a), _square_class(b)
    if v.is_real:
        return -1 if (a < 0 and b < 0) else 1
    p = v.p
    al, u = split_valuation(a, p)
    be, w = split_valuation(b, p)
    if p != 2:
        s = -1 if (al * be * ((p - 1) // 2)) % 2 else 1
        if be % 2:
            s *= legendre(u, p)
        if al % 2:
            s *= legendre(w, p)
        return s

    def eps(x):
        return ((x - 1) // 2) % 2

    def omega(x):
        return ((x * x - 1) // 8) % 2

    e = eps(u) * eps(w) + al * omega(w) + be * omega(u)
    return -1 if e % 2 else 1


def _hasse_of_diag(diag, v) -> int:
    s = 1
    for i in range(len(diag)):
        for j in range(i + 1, len(diag)):
            s *= hilbert_symbol(diag[i], diag[j], v)
    return s


def hasse_invariant(q, v) -> int:
    diag = q.diagonal_model()[0] if isinstance(q, QuadraticForm) else tuple(q)
    return _hasse_of_diag(diag, v)


def _is_local_square(a, p: int) -> bool:
    a = _square_class(a)
    v, u = split_valuation(a, p)
    if v % 2:
        return False
    if p == 2:
        return u % 8 == 1
    return legendre(u, p) == 1


def _diag_isotropic(diag, v) -> bool:
    v = as_place(v)
    n = len(diag)
    if v.is_real:
        return any(a > 0 for a in diag) and any(a < 0 for a in diag)
    if n <= 1:
        return False
    d = Fraction(1)
    for a in diag:
        d *= a
    if n == 2:
        return _is_local_square(-d, v.p)
    eps = _hasse_of_diag(diag, v)
    if n == 3:
        return hilbert_symbol(-1, -d, v) == eps
    if n == 4:
        if not _is_local_square(d, v.p):
            return True
        return eps == hilbert_symbol(-1, -1, v)
    return True


def is_isotropic_local(q, v) -> bool:
    """True iff q has a nontrivial zero over Q_v."""
    diag = q.diagonal_model()[0] if isinstance(q, QuadraticForm) else tuple(Fraction(a) for a in q)
    return _diag_isotropic(diag, v)


def represents_local(q, m, v) -> bool:
    """True iff q(x) = m is solvable over Q_v (m nonzero)."""
    if m == 0:
        raise ValueError("target m must be nonzero")
    diag = q.diagonal_model()[0] if isinstance(q, QuadraticForm) else tuple(Fraction(a) for a in q)
    return _diag_isotropic(tuple(diag) + (-Fraction(m),), v)


def global_check_places(q: QuadraticForm, m: int) -> List[Place]:
    from .arith import distinct_prime_factors

    ps = set(distinct_prime_factors(2 * m * q.det))
    return [Real] + [Place(p) for p in sorted(ps)]


def represents_global(q: QuadraticForm, m: int) -> bool:
    """Hasse-Minkowski: local solvability at R and at every p | 2*m*det(q)."""
    if m == 0:
        raise ValueError("target m must be nonzero")
    return all(represents_local(q, m, v) for v in global_check_places(q, m))


@dataclass(frozen=True)
class Box:
    """Axis-aligned box with rational bounds lo_i < hi_i."""

    lo: Tuple[Fraction, ...]
    hi: Tuple[Fraction, ...]

    def __post_init__(self):
        lo = tuple(Fraction(a) for a in self.lo)
        hi = tuple(Fraction(b) for b in self.hi)
        if len(lo) != len(hi) or not lo:
            raise ValueError("box bounds must have equal nonzero length")
        if any(a >= b for a, b in zip(lo, hi)):
            raise ValueError("box must have nonempty interior (lo < hi on every axis)")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def cube(cls, n: int, r) -> "Box":
        r = Fraction(r)
        return cls((-r,) * n, (r,) * n)

    @classmethod
    def parse(cls, text: str) -> "Box":
        """"-2:2,-1.5:3/2,..." (decimals or fractions)."""
        lo, hi = [], []
        for part in text.split(","):
            a, b = part.split(":")
            lo.append(Fraction(a.strip()))
            hi.append(Fraction(b.strip()))
        return cls(tuple(lo), tuple(hi))

    @property
    def n(self) -> int:
        return len(self.lo)

    def contains(self, x) -> bool:
        return all(a <= xi <= b for a, xi, b in zip(self.lo, x, self.hi))

    def literal(self) -> str:
        return ",".join(f"{a}:{b}" for a, b in zip(self.lo, self.hi))


@dataclass(frozen=True)
class QuadricInstance:
    """The affine quadric q = m, with optional p0-adic data (p0, h) and real box region."""

    form: QuadraticForm
    m: int
    p0: Optional[int] = None
    h: Optional[int] = None
    region: Optional[Box] = None

    def __post_init__(self):
        if self.m == 0:
            raise ValueError("m must be nonzero")
        if self.p0 is not None and not is_prime(self.p0):
            raise ValueError(f"p0={self.p0} is not prime")
        if self.h is not None and self.h < 0:
            raise ValueError("h must be nonnegative")
        if self.region is not None and self.region.n != self.form.n:
            raise ValueError("region dimension does not match the form")

    @property
    def n(self) -> int:
        return self.form.n

    def with_height(self, h: int) -> "QuadricInstance":
        return QuadricInstance(self.form, self.m, self.p0, h, self.region)
