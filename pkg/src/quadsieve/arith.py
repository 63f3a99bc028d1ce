"""Small exact-arithmetic helpers: primes, valuations, residue symbols, factoring."""

from __future__ import annotations

import math
from collections import Counter
from fractions import Fraction
from functools import lru_cache
from typing import Dict, Iterable, List

import numpy as np
import sympy


def primes_upto(n: int) -> List[int]:
    if n < 2:
        return []
    bs = np.ones(n + 1, dtype=bool)
    bs[:2] = False
    for p in range(2, math.isqrt(n) + 1):
        if bs[p]:
            bs[p * p :: p] = False
    return [int(p) for p in np.flatnonzero(bs)]


def primes_between(lo: int, hi: int) -> List[int]:
    """Primes p with lo < p <= hi."""
    return [p for p in primes_upto(hi) if p > lo]


_MR_BASES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41)


def is_prime(n: int) -> bool:
    """Deterministic Miller-Rabin for n < 3.3e24, BPSW beyond that."""
    if n < 2:
        return False
    for p in _MR_BASES:
        if n % p == 0:
            return n == p
    if n >= 3317044064679887385961981:
        return bool(sympy.isprime(n))
    d, s = n - 1, 0
    while d % 2 == 0:
        d //= 2
        s += 1
    for a in _MR_BASES:
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(s - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


def valuation(x, p: int) -> float:
    """p-adic valuation of a nonzero integer or Fraction; +inf for 0."""
    if x == 0:
        return math.inf
    x = Fraction(x)
    v = 0
    num, den = x.numerator, x.denominator
    while num % p == 0:
        num //= p
        v += 1
    while den % p == 0:
        den //= p
        v -= 1
    return v


def split_valuation(x: int, p: int):
    """Return (v, u) with x = p**v * u and p not dividing u (x nonzero integer)."""
    v = 0
    while x % p == 0:
        x //= p
        v += 1
    return v, x


def legendre(a: int, p: int) -> int:
    """Legendre symbol (a/p) for an odd prime p."""
    a %= p
    if a == 0:
        return 0
    return 1 if pow(a, (p - 1) // 2, p) == 1 else -1


def is_square_int(n: int) -> bool:
    return n >= 0 and math.isqrt(n) ** 2 == n


def factorize(t: int) -> List[int]:
    """Prime factors of |t| with multiplicity, ascending. factorize(1) == []."""
    t = abs(int(t))
    if t == 0:
        raise ValueError("factorize(0) is undefined")
    out: List[int] = []
    for p, e in sorted(sympy.factorint(t).items()):
        out.extend([int(p)] * int(e))
    return out


def distinct_prime_factors(t: int) -> List[int]:
    return sorted(set(factorize(t)))


def smallest_prime_factor_table(n: int) -> np.ndarray:
    """spf[k] = smallest prime factor of k for 2 <= k <= n (spf[0]=spf[1]=0)."""
    spf = np.zeros(n + 1, dtype=np.int64)
    for p in range(2, n + 1):
        if p * p > n:
            break
        if spf[p] == 0:
            block = spf[p * p :: p]
            block[block == 0] = p
            spf[p * p :: p] = block
    rest = np.flatnonzero(spf == 0)
    spf[rest] = rest
    spf[:2] = 0
    return spf


def factor_with_table(t: int, spf: np.ndarray) -> List[int]:
    t = abs(int(t))
    out = []
    while t > 1:
        p = int(spf[t])
        out.append(p)
        t //= p
    return out


def mobius(d: int) -> int:
    fs = Counter(factorize(d)) if d > 1 else Counter()
    if any(e > 1 for e in fs.values()):
        return 0
    return -1 if len(fs) % 2 else 1


def is_squarefree(d: int) -> bool:
    return d >= 1 and (d == 1 or mobius(d) != 0)


def squarefree_divisors(primes: Iterable[int], bound=None) -> List[int]:
    """All products of distinct primes from the list, optionally capped at bound."""
    divs = [1]
    for p in primes:
        divs += [d * p for d in divs if bound is None or d * p <= bound]
    return sorted(divs)


@lru_cache(maxsize=None)
def prime_power_parts(n: int) -> Dict[int, int]:
    return {int(p): int(e) for p, e in sympy.factorint(n).items()}
