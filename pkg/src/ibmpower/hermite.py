"""Gaussian moments and probabilists' Hermite algebra.

Coefficients stay in exact rational arithmetic (``int``/``Fraction``) as long as
the input polynomial is rational and of degree <= ``EXACT_DEGREE``; otherwise
the same formulas run in floating point.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Rational

MAX_MOMENT = 40
MAX_DEGREE = 60
EXACT_DEGREE = 20


def gaussian_moment_exact(q: int) -> int:
    if q < 0 or int(q) != q:
        raise ValueError(f"moment order must be a nonnegative integer, got {q}")
    if q > 2 * MAX_MOMENT:
        raise ValueError(f"moment order {q} exceeds bound {2 * MAX_MOMENT}")
    if q % 2:
        return 0
    h = q // 2
    return math.factorial(q) // (2 ** h * math.factorial(h))


def gaussian_moment(q: int) -> float:
    """E[G**q] for a standard Gaussian G: 0 for odd q, (q-1)!! for even q."""
    return float(gaussian_moment_exact(q))


def _trim(coeffs):
    coeffs = list(coeffs)
    while coeffs and coeffs[-1] == 0:
        coeffs.pop()
    return tuple(coeffs)


@dataclass(frozen=True)
class Poly:
    """Polynomial with ``coeffs[k]`` multiplying ``x**k``."""

    coeffs: tuple = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "coeffs", _trim(self.coeffs))

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    @property
    def is_exact(self) -> bool:
        return all(isinstance(c, Rational) for c in self.coeffs)

    @classmethod
    def monomial(cls, k: int, c=1) -> "Poly":
        return cls((0,) * k + (c,))

    def __add__(self, other: "Poly") -> "Poly":
        n = max(len(self.coeffs), len(other.coeffs))
        a = self.coeffs + (0,) * (n - len(self.coeffs))
        b = other.coeffs + (0,) * (n - len(other.coeffs))
        return Poly(tuple(x + y for x, y in zip(a, b)))

    def __sub__(self, other: "Poly") -> "Poly":
        return self + other.scale(-1)

    def scale(self, c) -> "Poly":
        return Poly(tuple(c * a for a in self.coeffs))

    def __call__(self, x):
        # Horner; works elementwise on numpy arrays
        out = 0.0 * x
        for c in reversed(self.coeffs):
            out = out * x + float(c)
        return out

    def float_coeffs(self) -> tuple:
        return tuple(float(c) for c in self.coeffs)


def hermite_poly(m: int) -> Poly:
    """Probabilists' Hermite polynomial He_m (integer coefficients)."""
    if m < 0 or m > MAX_DEGREE:
        raise ValueError(f"Hermite degree must be in [0, {MAX_DEGREE}], got {m}")
    prev, cur = [1], [0, 1]
    if m == 0:
        return Poly(tuple(prev))
    for k in range(1, m):
        # He_{k+1} = x He_k - k He_{k-1}
        nxt = [0] + cur
        for i, c in enumerate(prev):
            nxt[i] -= k * c
        prev, cur = cur, nxt
    return Poly(tuple(cur))


def _monomial_in_hermite(k: int, m: int) -> int:
    # x^k = sum_m k! / (m! 2^r r!) He_m with k - m = 2r
    if m > k or (k - m) % 2:
        return 0
    r = (k - m) // 2
    return math.factorial(k) // (math.factorial(m) * 2 ** r * math.factorial(r))


@dataclass(frozen=True)
class HermiteDecomposition:
    mean: float
    b: dict
    centered_rank_ge2: bool

    def reconstruct(self) -> Poly:
        out = Poly((self.mean,))
        for m, c in self.b.items():
            out = out + hermite_poly(m).scale(c)
        return out


def decompose(p: Poly) -> HermiteDecomposition:
    """Change of basis from monomials to ``mean + sum_{m>=1} b[m] He_m``."""
    if p.degree > MAX_DEGREE:
        raise ValueError(f"degree {p.degree} exceeds bound {MAX_DEGREE}")
    exact = p.is_exact and p.degree <= EXACT_DEGREE
    coeffs = p.coeffs if exact else p.float_coeffs()
    mean = sum(c * gaussian_moment_exact(k) for k, c in enumerate(coeffs)) if coeffs else 0
    b = {}
    for m in range(1, p.degree + 1):
        bm = sum(coeffs[k] * _monomial_in_hermite(k, m) for k in range(m, p.degree + 1))
        if bm != 0:
            b[m] = bm
    if exact:
        mean = _simplify(mean)
        b = {m: _simplify(v) for m, v in b.items()}
    return HermiteDecomposition(mean, b, b.get(1, 0) == 0)


def _simplify(x):
    if isinstance(x, Fraction) and x.denominator == 1:
        return int(x)
    return x


def variance_of(p: Poly) -> float:
    """Var(P(G)) = sum_{m>=1} b_m^2 m!, summed exactly when possible."""
    d = decompose(p)
    return float(sum(c * c * math.factorial(m) for m, c in d.b.items()))


def centered_rank_ge2(p: Poly) -> bool:
    return decompose(p).centered_rank_ge2


def power_minus_moment(kappa: int) -> Poly:
    """``x**kappa - mu_kappa`` (even kappa) or ``x**kappa - mu_{kappa+1} x`` (odd)."""
    if kappa % 2 == 0:
        return Poly.monomial(kappa) - Poly((gaussian_moment_exact(kappa),))
    return Poly.monomial(kappa) - Poly.monomial(1, gaussian_moment_exact(kappa + 1))
