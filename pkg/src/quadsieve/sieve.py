"""Sifting functions, multiplicative densities, remainder ledgers and the
almost-prime point search.

Over Q an ideal of Z_{S'} is represented by its positive generator coprime to
every prime of S'; its norm is the integer itself.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Dict, Iterable, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from .arith import factorize, is_prime, is_squarefree, mobius, primes_upto, squarefree_divisors
from .errors import InvalidDensity, MissingPrime, NotSquarefree, ZeroDenominator
from .enumeration import IntegralPoint, integral_chunks, s_integral_chunks, s_integral_setup
from .forms import QuadraticForm, QuadricInstance
from .modular import SubvarietySpec, count_quadric_ffield_brute, count_quadric_ffield_exact, count_subvariety_ffield
from .poly import Polynomial

__all__ = [
    "SieveSequence",
    "DensityTable",
    "SieveReport",
    "build_sequence",
    "build_sequence_from_chunks",
    "sift",
    "subsequence_count",
    "density_from_counts",
    "mertens_product",
    "dimension_check",
    "remainder_ledger",
    "fundamental_lemma_report",
    "factorize",
    "almost_prime_search",
    "verify_almost_prime",
]


# ---------------------------------------------------------------------------
# sequences
# ---------------------------------------------------------------------------


@dataclass
class SieveSequence:
    sprime: frozenset
    entries: Dict[int, int]
    zero_bucket: int = 0

    def __post_init__(self):
        self.sprime = frozenset(int(p) for p in self.sprime)
        for b, w in self.entries.items():
            if b < 1 or w < 0:
                raise ValueError(f"bad entry {b}: {w}")
            if any(b % p == 0 for p in self.sprime):
                raise ValueError(f"index {b} is not coprime to S'")

    @classmethod
    def from_weights(cls, entries, sprime=()):
        return cls(frozenset(sprime), dict(entries))

    @property
    def total(self) -> int:
        return sum(self.entries.values())

    def arrays(self):
        idx = sorted(self.entries)
        return np.array(idx, dtype=object), np.array([self.entries[i] for i in idx], dtype=object)


def strip_primes(t: int, primes) -> int:
    t = abs(int(t))
    for p in primes:
        while t and t % p == 0:
            t //= p
    return t


def build_sequence(points: Iterable[IntegralPoint], f: Polynomial, sprime=()) -> SieveSequence:
    """a_b = #{x : |f(x)| with its S'-part removed equals b}; f(x) = 0 goes to the zero bucket.
    f(x) may be rational when every denominator prime lies in S'."""
    sprime = frozenset(sprime)
    entries: Counter = Counter()
    zero = 0
    for pt in points:
        v = Fraction(f(pt.coords))
        if v == 0:
            zero += 1
            continue
        den = strip_primes(v.denominator, sprime)
        if den != 1:
            raise ValueError(f"f(x) = {v} is not integral away from S'")
        entries[strip_primes(v.numerator, sprime)] += 1
    return SieveSequence(sprime, dict(entries), zero)


def _strip_array(vals: np.ndarray, primes) -> np.ndarray:
    vals = np.abs(vals)
    for p in primes:
        while True:
            hit = (vals % p == 0) & (vals != 0)
            if not hit.any():
                break
            vals = np.where(hit, vals // p, vals)
    return vals


def build_sequence_from_chunks(chunks: Iterable[np.ndarray], f: Polynomial, sprime=(), scale_power=None) -> SieveSequence:
    """Bulk version on integer point arrays.  f is evaluated on the rows as given (for
    rescaled points pass the cleared polynomial; its extra p0 powers must lie in S')."""
    sprime = sorted(set(sprime))
    entries: Counter = Counter()
    zero = 0
    for chunk in chunks:
        vals = f.eval_array(chunk)
        z = vals == 0
        zero += int(z.sum())
        vals = _strip_array(vals[~z], sprime)
        if vals.dtype == object:
            entries.update(int(v) for v in vals)
        else:
            ks, cs = np.unique(vals, return_counts=True)
            for k, c in zip(ks.tolist(), cs.tolist()):
                entries[k] += c
    return SieveSequence(frozenset(sprime), dict(entries), zero)


# ---------------------------------------------------------------------------
# sifting
# ---------------------------------------------------------------------------


def sieving_primes(z, sprime=(), predicate: Optional[Callable[[int], bool]] = None) -> List[int]:
    """Primes p < z outside S' (and accepted by the predicate)."""
    ps = [p for p in primes_upto(max(int(math.ceil(z)) - 1, 1)) if p < z and p not in set(sprime)]
    if predicate is not None:
        ps = [p for p in ps if predicate(p)]
    return ps


@dataclass
class SiftResult:
    value: int
    survivors: List[int]
    primes: List[int]


def sift(A: SieveSequence, z, predicate=None) -> SiftResult:
    """S(A, P, z): total weight of indices coprime to every sieving prime below z."""
    if z < 2:
        raise ValueError("z must be >= 2")
    ps = sieving_primes(z, A.sprime, predicate)
    survivors = [b for b in sorted(A.entries) if all(b % p for p in ps)]
    return SiftResult(sum(A.entries[b] for b in survivors), survivors, ps)


def subsequence_count(A: SieveSequence, d: int) -> int:
    """#A_d = total weight of indices divisible by d."""
    if not is_squarefree(d):
        raise NotSquarefree(f"{d} is not squarefree")
    if any(d % p == 0 for p in A.sprime):
        raise ValueError(f"{d} is not coprime to S'")
    return sum(w for b, w in A.entries.items() if b % d == 0)


def _multiples_table(A: SieveSequence, ds: Sequence[int]) -> Dict[int, int]:
    """#A_d for many d at once (vectorized when the indices fit in int64)."""
    idx, w = A.arrays()
    if not len(idx):
        return {d: 0 for d in ds}
    if max(A.entries) < 2**62:
        idx = idx.astype(np.int64)
        w = w.astype(np.int64)
        return {d: int(w[idx % d == 0].sum()) for d in ds}
    return {d: sum(v for b, v in A.entries.items() if b % d == 0) for d in ds}


def legendre_sum(A: SieveSequence, z, predicate=None) -> int:
    """sum_{d | P(z)} mu(d) #A_d (inclusion-exclusion form of the sifting function)."""
    ps = sieving_primes(z, A.sprime, predicate)
    ds = squarefree_divisors(ps)
    counts = _multiples_table(A, ds)
    return sum(mobius(d) * counts[d] for d in ds)


# ---------------------------------------------------------------------------
# densities
# ---------------------------------------------------------------------------


@dataclass
class DensityTable:
    omega: Dict[int, Fraction]
    provenance: str = "user"

    def __post_init__(self):
        clean = {}
        for p, w in self.omega.items():
            p, w = int(p), Fraction(w)
            if not is_prime(p):
                raise ValueError(f"{p} is not prime")
            if w < 0 or w >= p:
                raise InvalidDensity(f"omega({p}) = {w} violates 0 <= omega(p)/p < 1")
            clean[p] = w
        self.omega = clean

    @classmethod
    def constant(cls, value, primes) -> "DensityTable":
        return cls({p: Fraction(value) for p in primes}, "constant")

    def __getitem__(self, p: int) -> Fraction:
        try:
            return self.omega[p]
        except KeyError:
            raise MissingPrime(p) from None

    def of(self, d: int) -> Fraction:
        """omega extended multiplicatively to squarefree d."""
        if not is_squarefree(d):
            raise NotSquarefree(f"{d} is not squarefree")
        out = Fraction(1)
        for p in factorize(d) if d > 1 else []:
            out *= self[p]
        return out


def _count_on_quadric(q: QuadraticForm, m: int, p: int, cap) -> int:
    if p != 2 and q.det % p:
        return count_quadric_ffield_exact(q, m, p)
    return count_quadric_ffield_brute(q, m, p, cap)


def density_from_counts(q: QuadraticForm, m: int, f: Polynomial, primes, cap=10**8) -> DensityTable:
    """omega(p) = p * #{x in X(F_p) : f(x) = 0} / #X(F_p)."""
    spec = _single(f)
    omega = {}
    for p in primes:
        total = _count_on_quadric(q, m, p, cap)
        if total == 0:
            raise ZeroDenominator(f"#X(F_{p}) = 0; put {p} into S'")
        on_f = count_subvariety_ffield(spec, q, m, p, cap) if not f.is_constant else (0 if f(tuple([0] * q.n)) % p else total)
        w = Fraction(p * on_f, total)
        if w >= p:
            raise InvalidDensity(f"omega({p}) = {w} violates omega(p)/p < 1")
        omega[p] = w
    return DensityTable(omega, "finite-field counts")


def _single(f: Polynomial) -> SubvarietySpec:
    spec = object.__new__(SubvarietySpec)
    object.__setattr__(spec, "polys", (f,))
    return spec


def mertens_product(T: DensityTable, z, sprime=(), predicate=None) -> Fraction:
    """V(z) = prod_{p | P(z)} (1 - omega(p)/p), exact."""
    out = Fraction(1)
    for p in sieving_primes(z, sprime, predicate):
        out *= 1 - T[p] / p
    return out


def dimension_check(T: DensityTable, w1, w2, kappa1, grid_size: int = 2000):
    """Smallest kappa2 with prod_{u <= p < v} (1 - omega(p)/p)^-1 <= kappa2 (log v / log u)^kappa1
    for all u <= v from a grid of [w1, w2] (primes in range plus the endpoints)."""
    if not 2 <= w1 <= w2:
        raise ValueError("need 2 <= w1 <= w2")
    ps = [p for p in primes_upto(int(w2)) if p >= w1]
    logs = np.array([-math.log1p(-float(T[p]) / p) for p in ps])
    grid = sorted(set([float(w1), float(w2)] + [float(p) for p in ps]))
    if len(grid) > grid_size:
        pick = np.unique(np.linspace(0, len(grid) - 1, grid_size).round().astype(int))
        grid = [grid[i] for i in pick]
    g = np.array(grid)
    parr = np.array(ps, dtype=float)
    cum = np.concatenate(([0.0], np.cumsum(logs)))
    # log of prod over u <= p < v
    pos = np.searchsorted(parr, g, side="left")
    U, V = np.meshgrid(np.arange(len(g)), np.arange(len(g)), indexing="ij")
    mask = U <= V
    logprod = cum[pos[V]] - cum[pos[U]]
    rhs = kappa1 * (np.log(np.log(g[V]) / np.log(g[U])))
    ratio = np.where(mask, logprod - rhs, -np.inf)
    kappa2 = float(np.exp(ratio.max())) if len(g) else 1.0
    return math.isfinite(kappa2), max(kappa2, 1.0)


@dataclass
class Ledger:
    total: float
    rows: List[Tuple[int, int, float, float]]


def remainder_ledger(A: SieveSequence, T: DensityTable, X, y, z, predicate=None) -> Ledger:
    """R = sum over squarefree d <= y, d | P(z) of |#A_d - omega(d) X / d|, with per-d rows."""
    ps = sieving_primes(z, A.sprime, predicate)
    for p in ps:
        T[p]
    ds = [d for d in squarefree_divisors(ps, max(int(y), 1)) if d <= y] or [1]
    counts = _multiples_table(A, ds)
    rows = []
    total = 0.0
    for d in ds:
        expected = float(T.of(d) / d) * float(X)
        dev = abs(counts[d] - expected)
        rows.append((d, counts[d], expected, dev))
        total += dev
    return Ledger(total, rows)


@dataclass
class SieveReport:
    z: float
    y: float
    X: float
    S: int
    V: Fraction
    main: float
    R: float
    tau_hat: Optional[float]
    survivors: List[int]
    degenerate: bool
    ledger: List[Tuple[int, int, float, float]] = field(default_factory=list)

    def summary(self):
        return {
            "z": self.z,
            "y": self.y,
            "X": self.X,
            "S": self.S,
            "V_num": self.V.numerator,
            "V_den": self.V.denominator,
            "main": self.main,
            "R": self.R,
            "tau_hat": self.tau_hat,
            "survivor_count": len(self.survivors),
            "degenerate": self.degenerate,
        }


def fundamental_lemma_report(A: SieveSequence, T: DensityTable, X, y, z, predicate=None) -> SieveReport:
    """S(A, P, z) against X V(z) with the remainder ledger; tau_hat = S / (X V(z)) is a
    measured constant, no inequality is asserted."""
    s = sift(A, z, predicate)
    V = mertens_product(T, z, A.sprime, predicate)
    led = remainder_ledger(A, T, X, y, z, predicate)
    main = float(X) * float(V)
    degenerate = A.total == 0 or main == 0
    tau = None if main == 0 else s.value / main
    return SieveReport(float(z), float(y), float(X), s.value, V, main, led.total, tau, s.survivors, degenerate, led.rows)


# ---------------------------------------------------------------------------
# almost primes
# ---------------------------------------------------------------------------


@dataclass
class AlmostPrimeResult:
    found: bool
    point: Optional[Tuple[Fraction, ...]]
    value: Optional[int]
    primes: List[int]
    distinct: int
    with_multiplicity: int
    examined: int
    histogram: Dict[int, int]
    verified: bool = False
    zero_values: int = 0


def _qualifies(value: int, sprime, M, r, factor=factorize):
    t = strip_primes(value, sprime)
    fs = factor(t) if t > 1 else []
    ok = all(p > M for p in fs) and len(set(fs)) <= r
    return ok, fs


def _trial_factor(t: int) -> List[int]:
    out = []
    t = abs(t)
    d = 2
    while d * d <= t:
        while t % d == 0:
            out.append(d)
            t //= d
        d += 1 if d == 2 else 2
    if t > 1:
        out.append(t)
    return out


def verify_almost_prime(value: int, sprime, M, r) -> bool:
    """Independent check by trial division: every prime outside S' dividing value
    exceeds M, and there are at most r distinct ones."""
    if value == 0:
        return False
    t = strip_primes(value, sprime)
    if t.bit_length() > 80:
        fs = factorize(t)
    else:
        fs = _trial_factor(t)
    if (math.prod(fs) if fs else 1) != t:
        return False
    return all(p > M and is_prime(p) for p in fs) and len(set(fs)) <= r


def almost_prime_search(
    inst: QuadricInstance,
    f: Polynomial,
    sprime,
    M,
    r: int,
    N=None,
    budget: int = 10**7,
    threads: int = 1,
) -> AlmostPrimeResult:
    """First point in enumeration order whose f-value, with S'-part removed, has only
    prime factors > M and at most r distinct ones.  Points come from the Euclidean
    ball of radius N, or (without N) from the instance's p0-integral points, where
    p0 must lie in S'.  f(x) = 0 never qualifies."""
    sprime = sorted(set(sprime))
    if N is not None:
        chunks = integral_chunks(inst, N, threads=threads)
        scale, g = 1, f
    else:
        scale = s_integral_setup(inst)[0]
        if scale > 1 and inst.p0 not in sprime:
            raise ValueError("p0-integral points need p0 in S'")
        chunks = s_integral_chunks(inst, threads)
        g = f.cleared(scale)
    hist: Counter = Counter()
    examined = zeros = 0
    for chunk in chunks:
        vals = g.eval_array(chunk)
        for row, v in zip(chunk.tolist(), vals.tolist()):
            if examined >= budget:
                return AlmostPrimeResult(False, None, None, [], 0, 0, examined, dict(sorted(hist.items())), False, zeros)
            examined += 1
            v = int(v)
            if v == 0:
                zeros += 1
                continue
            ok, fs = _qualifies(v, sprime, M, r)
            hist[len(set(fs))] += 1
            if ok:
                pt = tuple(Fraction(int(c), scale) for c in row)
                return AlmostPrimeResult(
                    True,
                    pt,
                    v,
                    sorted(set(fs)),
                    len(set(fs)),
                    len(fs),
                    examined,
                    dict(sorted(hist.items())),
                    verify_almost_prime(v, sprime, M, r),
                    zeros,
                )
    return AlmostPrimeResult(False, None, None, [], 0, 0, examined, dict(sorted(hist.items())), False, zeros)
