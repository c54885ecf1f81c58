"""Noncommutative polynomial algebra over quadrature operators.

Operators are words in x_i, p_i with the commutation relation
[x_i, p_j] = i*HBAR*delta_ij, HBAR = 2. The canonical form orders factors
x-before-p within a mode, modes ascending; cross-mode factors commute.
Vacuum moments are taken through the ladder representation x = a + a',
p = -i(a - a') with [a, a'] = 1 (primes denote adjoints).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

HBAR = 2.0
_IH = 1j * HBAR  # [x, p]
PRUNE_TOL = 1e-14


@dataclass(frozen=True)
class QuadMonomial:
    """Canonical word prod_i x_i^(a_i) p_i^(b_i); exps = (a_0, b_0, a_1, b_1, ...)."""

    exps: tuple[int, ...]

    @property
    def n_modes(self) -> int:
        return len(self.exps) // 2

    @property
    def degree(self) -> int:
        return sum(self.exps)

    def powers(self, mode: int) -> tuple[int, int]:
        return self.exps[2 * mode], self.exps[2 * mode + 1]

    def factors(self) -> list[tuple[int, str]]:
        """Expand into the canonical factor sequence [(mode, 'x'|'p'), ...]."""
        out = []
        for m in range(self.n_modes):
            a, b = self.powers(m)
            out.extend([(m, "x")] * a)
            out.extend([(m, "p")] * b)
        return out

    def __repr__(self):
        parts = []
        for m in range(self.n_modes):
            a, b = self.powers(m)
            if a:
                parts.append(f"x{m}" + (f"^{a}" if a > 1 else ""))
            if b:
                parts.append(f"p{m}" + (f"^{b}" if b > 1 else ""))
        return "".join(parts) or "I"


def _bump(exps: tuple[int, ...], slot: int, delta: int) -> tuple[int, ...]:
    out = list(exps)
    out[slot] += delta
    return tuple(out)


def _acc(terms: dict, exps: tuple[int, ...], coeff: complex) -> None:
    c = terms.get(exps, 0j) + coeff
    if abs(c) <= PRUNE_TOL:
        terms.pop(exps, None)
    else:
        terms[exps] = c


def _times_factor(terms: dict, mode: int, ch: str) -> dict:
    """Right-multiply a canonical term dict by a single x or p factor.

    Uses p^b x = x p^b - i*HBAR*b p^(b-1), so
    x^a p^b * x = x^(a+1) p^b - i*HBAR*b x^a p^(b-1).
    """
    out: dict = {}
    xs, ps = 2 * mode, 2 * mode + 1
    for exps, c in terms.items():
        if ch == "p":
            _acc(out, _bump(exps, ps, +1), c)
        else:
            _acc(out, _bump(exps, xs, +1), c)
            b = exps[ps]
            if b:
                _acc(out, _bump(exps, ps, -1), -_IH * b * c)
    return out


class QuadPolynomial:
    """Sparse polynomial in canonical quadrature monomials with complex coefficients."""

    __slots__ = ("n_modes", "terms")

    def __init__(self, n_modes: int, terms: dict | None = None):
        self.n_modes = n_modes
        self.terms: dict[QuadMonomial, complex] = {}
        if terms:
            for mono, c in terms.items():
                if abs(c) > PRUNE_TOL:
                    self.terms[mono] = complex(c)

    # -- constructors -------------------------------------------------

    @classmethod
    def zero(cls, n_modes: int) -> "QuadPolynomial":
        return cls(n_modes)

    @classmethod
    def identity(cls, n_modes: int, coeff: complex = 1.0) -> "QuadPolynomial":
        return cls(n_modes, {QuadMonomial((0,) * (2 * n_modes)): coeff})

    @classmethod
    def quadrature(cls, n_modes: int, mode: int, ch: str, coeff: complex = 1.0) -> "QuadPolynomial":
        """Single first-degree factor x_mode or p_mode."""
        exps = [0] * (2 * n_modes)
        exps[2 * mode + (0 if ch == "x" else 1)] = 1
        return cls(n_modes, {QuadMonomial(tuple(exps)): coeff})

    # -- ring operations ----------------------------------------------

    @property
    def degree(self) -> int:
        return max((m.degree for m in self.terms), default=0)

    def __add__(self, other: "QuadPolynomial") -> "QuadPolynomial":
        out = dict(self.terms)
        acc: dict = {m.exps: c for m, c in out.items()}
        for m, c in other.terms.items():
            _acc(acc, m.exps, c)
        return QuadPolynomial(self.n_modes, {QuadMonomial(e): c for e, c in acc.items()})

    def __sub__(self, other: "QuadPolynomial") -> "QuadPolynomial":
        return self + (other * -1.0)

    def __mul__(self, other):
        if isinstance(other, QuadPolynomial):
            return self._mul_poly(other)
        return QuadPolynomial(self.n_modes, {m: c * other for m, c in self.terms.items()})

    __rmul__ = __mul__

    def _mul_poly(self, other: "QuadPolynomial") -> "QuadPolynomial":
        acc: dict = {}
        for mono2, c2 in other.terms.items():
            chunk = {m.exps: c * c2 for m, c in self.terms.items()}
            for mode, ch in mono2.factors():
                chunk = _times_factor(chunk, mode, ch)
            for exps, c in chunk.items():
                _acc(acc, exps, c)
        return QuadPolynomial(self.n_modes, {QuadMonomial(e): c for e, c in acc.items()})

    def adjoint(self) -> "QuadPolynomial":
        """Formal adjoint: conjugate coefficients, reverse each word, re-canonicalize."""
        out = QuadPolynomial.zero(self.n_modes)
        for mono, c in self.terms.items():
            word = list(reversed(mono.factors()))
            out = out + canonicalize(word, self.n_modes) * c.conjugate()
        return out

    def is_hermitian(self, tol: float = 1e-12) -> bool:
        return self.max_abs_diff(self.adjoint()) <= tol

    def max_abs_diff(self, other: "QuadPolynomial") -> float:
        keys = set(self.terms) | set(other.terms)
        return max((abs(self.terms.get(k, 0j) - other.terms.get(k, 0j)) for k in keys), default=0.0)

    # -- vacuum moments -----------------------------------------------

    def vacuum_expectation(self) -> complex:
        """<0|poly|0> on the multimode vacuum; modes factorize."""
        total = 0j
        for mono, c in self.terms.items():
            val = c
            for m in range(self.n_modes):
                a, b = mono.powers(m)
                if a or b:
                    val *= _vacuum_moment(a, b)
                if val == 0:
                    break
            total += val
        return total

    def __repr__(self):
        if not self.terms:
            return "0"
        return " + ".join(f"({c:.6g})*{m!r}" for m, c in sorted(self.terms.items(), key=lambda t: t[0].exps))


def canonicalize(word: list[tuple[int, str]] | tuple, n_modes: int) -> QuadPolynomial:
    """Rewrite an operator word (left-to-right product of x/p factors) in canonical form."""
    terms = {(0,) * (2 * n_modes): 1.0 + 0j}
    for mode, ch in word:
        terms = _times_factor(terms, mode, ch)
    return QuadPolynomial(n_modes, {QuadMonomial(e): c for e, c in terms.items()})


# -- ladder representation for vacuum moments -------------------------

_X_LADDER = {(1, 0): 1.0 + 0j, (0, 1): 1.0 + 0j}      # x = a' + a
_P_LADDER = {(1, 0): 1j, (0, 1): -1j}                 # p = i(a' - a)


def _ladder_mul(poly: dict, factor: dict) -> dict:
    """Product of normal-ordered ladder polynomials; keys are (n_creation, n_annihilation).

    a^d a'^e = sum_k k! C(d,k) C(e,k) a'^(e-k) a^(d-k).
    """
    out: dict = {}
    for (c, d), u in poly.items():
        for (e, f), v in factor.items():
            for k in range(min(d, e) + 1):
                w = u * v * math.factorial(k) * math.comb(d, k) * math.comb(e, k)
                key = (c + e - k, d - k + f)
                out[key] = out.get(key, 0j) + w
    return out


@lru_cache(maxsize=None)
def _vacuum_moment(a_exp: int, p_exp: int) -> complex:
    """<0| x^a p^b |0> for a single mode."""
    poly = {(0, 0): 1.0 + 0j}
    for _ in range(a_exp):
        poly = _ladder_mul(poly, _X_LADDER)
    for _ in range(p_exp):
        poly = _ladder_mul(poly, _P_LADDER)
    return poly.get((0, 0), 0j)
