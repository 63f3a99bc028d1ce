"""Integer polynomials in n variables, as monomial dictionaries.

JSON form: a list of monomials ``{"exponents": [e1, ..., en], "coeff": c}``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Dict, Sequence, Tuple

import numpy as np


@dataclass(frozen=True)
class Polynomial:
    nvars: int
    terms: Tuple[Tuple[Tuple[int, ...], int], ...]

    def __post_init__(self):
        merged: Dict[Tuple[int, ...], int] = {}
        for exps, c in self.terms:
            exps = tuple(int(e) for e in exps)
            if len(exps) != self.nvars or any(e < 0 for e in exps):
                raise ValueError(f"bad exponent vector {exps}")
            merged[exps] = merged.get(exps, 0) + int(c)
        clean = tuple(sorted((e, c) for e, c in merged.items() if c != 0))
        object.__setattr__(self, "terms", clean)

    @classmethod
    def from_dict(cls, nvars: int, d) -> "Polynomial":
        return cls(nvars, tuple((tuple(k), v) for k, v in d.items()))

    @classmethod
    def constant(cls, nvars: int, c: int) -> "Polynomial":
        return cls(nvars, (((0,) * nvars, c),))

    @classmethod
    def linear(cls, coeffs: Sequence[int], const: int = 0) -> "Polynomial":
        n = len(coeffs)
        terms = [(tuple(int(i == j) for j in range(n)), c) for i, c in enumerate(coeffs)]
        terms.append(((0,) * n, const))
        return cls(n, tuple(terms))

    @classmethod
    def variable(cls, nvars: int, i: int) -> "Polynomial":
        return cls.linear([int(j == i) for j in range(nvars)])

    @classmethod
    def from_json(cls, data, nvars=None) -> "Polynomial":
        if isinstance(data, str):
            data = json.loads(data)
        if not data:
            if nvars is None:
                raise ValueError("empty polynomial needs nvars")
            return cls(nvars, ())
        n = len(data[0]["exponents"]) if nvars is None else nvars
        return cls(n, tuple((tuple(t["exponents"]), int(t["coeff"])) for t in data))

    @classmethod
    def load(cls, path, nvars=None) -> "Polynomial":
        with open(path) as fh:
            return cls.from_json(json.load(fh), nvars)

    def to_json(self):
        return [{"exponents": list(e), "coeff": c} for e, c in self.terms]

    @property
    def is_zero(self) -> bool:
        return not self.terms

    @property
    def degree(self) -> int:
        return max((sum(e) for e, _ in self.terms), default=0)

    @property
    def is_constant(self) -> bool:
        return self.degree == 0

    def __call__(self, x):
        total = 0
        for exps, c in self.terms:
            t = c
            for xi, e in zip(x, exps):
                if e:
                    t = t * xi**e
            total = total + t
        return total

    def eval_array(self, pts: np.ndarray) -> np.ndarray:
        """Evaluate on the rows of an int array; int64 when safe, else object."""
        pts = np.asarray(pts)
        bound = int(np.abs(pts).max(initial=0)) if pts.size else 0
        big = sum(abs(c) * max(bound, 1) ** sum(e) for e, c in self.terms)
        dtype = np.int64 if big < 2**62 else object
        arr = pts.astype(dtype)
        out = np.zeros(len(arr), dtype=dtype)
        for exps, c in self.terms:
            t = np.full(len(arr), c, dtype=dtype)
            for i, e in enumerate(exps):
                if e:
                    t = t * arr[:, i] ** e
            out = out + t
        return out

    def eval_mod(self, pts: np.ndarray, p: int) -> np.ndarray:
        """Evaluate mod p on the rows of an array of residues (p small)."""
        arr = np.asarray(pts, dtype=np.int64) % p
        out = np.zeros(len(arr), dtype=np.int64)
        for exps, c in self.terms:
            t = np.full(len(arr), c % p, dtype=np.int64)
            for i, e in enumerate(exps):
                for _ in range(e):
                    t = t * arr[:, i] % p
            out = (out + t) % p
        return out

    def cleared(self, scale: int) -> "Polynomial":
        """f_h with f_h(y) = scale^deg(f) * f(y / scale)."""
        d = self.degree
        return Polynomial(self.nvars, tuple((e, c * scale ** (d - sum(e))) for e, c in self.terms))

    def to_sympy(self, symbols):
        import sympy

        expr = 0
        for exps, c in self.terms:
            t = sympy.Integer(c)
            for s, e in zip(symbols, exps):
                t *= s**e
            expr += t
        return expr

    def __str__(self):
        if not self.terms:
            return "0"
        parts = []
        for exps, c in self.terms:
            mono = "*".join(f"x{i + 1}" + (f"^{e}" if e > 1 else "") for i, e in enumerate(exps) if e)
            parts.append(f"{c}" + (f"*{mono}" if mono else ""))
        return " + ".join(parts)
