"""Finite-n functionals: weighted power variations V_n, signed variations S_n,
their one-sided space forms, and the Gaussian block/integral functionals of
the preliminary (X-only) limit theory.

Index conventions (grid units, ``h = 2**(-n/2)``):

* ``CrossingTally`` index ``j`` is the cell ``[j, j+1]``; its increment is
  ``X[j+1] - X[j]`` and its trapezoid weight ``(f(X[j]) + f(X[j+1])) / 2``.
  This is the alignment under which the time-sum and space-sum forms agree
  term for term.
* ``DoubledTally`` index ``o = 2j+1`` is the midpoint of ``[2j, 2j+2]``.

All literal sums use ``math.fsum`` so that identities that hold term-wise
also hold to the last bit.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .gaussian_paths import FinePath, SpatialField
from .hermite import Poly, decompose, gaussian_moment, gaussian_moment_exact, variance_of
from .skeleton import (CrossingTally, DoubledTally, DyadicLevel, EmbeddedWalk, as_level)
from .weights import WeightFunction, registry_get


def _weight(w) -> WeightFunction:
    return registry_get(w) if isinstance(w, str) else w


@dataclass(frozen=True)
class VariationSpec:
    kappa: int
    level: DyadicLevel
    weight: WeightFunction
    times: tuple

    def __post_init__(self):
        if int(self.kappa) != self.kappa or self.kappa < 2:
            raise ValueError(f"kappa must be an integer >= 2, got {self.kappa}")
        times = tuple(float(t) for t in np.atleast_1d(self.times))
        if not times or any(not 0 <= t <= 1 for t in times):
            raise ValueError(f"times must be a nonempty list in [0, 1], got {times}")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "level", as_level(self.level))
        object.__setattr__(self, "weight", _weight(self.weight))

    @property
    def centering(self) -> float:
        """mu_kappa 2^(-kappa n / 4), the conditional mean of a skeletal increment^kappa."""
        return gaussian_moment(self.kappa) * 2.0 ** (-self.kappa * self.level.n / 4)


def _fsum(a) -> float:
    return math.fsum(np.asarray(a, dtype=float).ravel())


def _ensure_walk(walk: EmbeddedWalk, steps: int) -> None:
    if walk.steps < steps:
        raise ValueError(f"walk has {walk.steps} steps but {steps} are required")


def v_terms(spec: VariationSpec, walk: EmbeddedWalk, fld: SpatialField, t: float) -> np.ndarray:
    k = spec.level.steps(t)
    _ensure_walk(walk, k)
    z = fld[walk.positions[:k + 1]]
    fz = spec.weight.f(z)
    dz = np.diff(z)
    return 0.5 * (fz[1:] + fz[:-1]) * (dz ** spec.kappa - spec.centering)


def v_time_sum(spec: VariationSpec, walk: EmbeddedWalk, fld: SpatialField) -> np.ndarray:
    """V_n^(kappa)(f, t): trapezoid-weighted, centered kappa-th powers of skeletal increments."""
    return np.array([_fsum(v_terms(spec, walk, fld, t)) for t in spec.times])


def _per_time(tallies, times, kind):
    if isinstance(tallies, (CrossingTally, DoubledTally)):
        tallies = [tallies]
    tallies = list(tallies)
    if len(tallies) != len(times):
        raise ValueError(f"need one {kind} per time ({len(times)}), got {len(tallies)}")
    return tallies


def v_space_value(spec: VariationSpec, tally: CrossingTally, fld: SpatialField,
                  shift: int = 0) -> float:
    if tally.level != spec.level:
        raise ValueError("tally and spec are on different levels")
    weights = tally.up + (-1) ** spec.kappa * tally.down
    nz = np.flatnonzero(weights)
    if not len(nz):
        return 0.0
    j = tally.offset + nz + shift
    xl, xr = fld[j], fld[j + 1]
    f = spec.weight.f
    terms = 0.5 * (f(xl) + f(xr)) * ((xr - xl) ** spec.kappa - spec.centering) * weights[nz]
    return _fsum(terms)


def v_space_sum(spec: VariationSpec, tallies, fld: SpatialField) -> np.ndarray:
    """Same value as ``v_time_sum`` regrouped by grid cell, weighted by U + (-1)^kappa D."""
    return np.array([v_space_value(spec, tl, fld)
                     for tl in _per_time(tallies, spec.times, "CrossingTally")])


def _s_bracket(kappa: int, x0, x1, x2):
    return (x2 - x1) ** kappa + (-1) ** (kappa + 1) * (x1 - x0) ** kappa


def s_pair_count(spec: VariationSpec, t: float, bound: str = "pairs") -> int:
    """Number of pair-steps summed in S_n(f, t).

    ``"pairs"`` uses floor(2^(n-1) t) pair-steps of the walk; ``"literal"``
    uses the index bound floor((2^(n/2) t - 1)/2) inclusive, as written in the
    original definition of the signed variation.
    """
    if bound == "pairs":
        return spec.level.pairs(t)
    if bound == "literal":
        return max(math.floor(0.5 * (2.0 ** (spec.level.n / 2) * t - 1)) + 1, 0)
    raise ValueError(f"bound must be 'pairs' or 'literal', got {bound!r}")


def s_terms(spec: VariationSpec, walk: EmbeddedWalk, fld: SpatialField, t: float,
            bound: str = "pairs") -> np.ndarray:
    p = s_pair_count(spec, t, bound)
    _ensure_walk(walk, 2 * p)
    z = fld[walk.positions[:2 * p + 1]]
    z0, z1, z2 = z[0:-1:2], z[1::2], z[2::2]
    return spec.weight.f(z1) * _s_bracket(spec.kappa, z0, z1, z2)


def s_sum(spec: VariationSpec, walk: EmbeddedWalk, fld: SpatialField,
          bound: str = "pairs") -> np.ndarray:
    """Signed variation S_n^(kappa)(f, t) at each requested time."""
    return np.array([_fsum(s_terms(spec, walk, fld, t, bound)) for t in spec.times])


def s_space_value(spec: VariationSpec, dt: DoubledTally, fld: SpatialField) -> float:
    if dt.level != spec.level:
        raise ValueError("tally and spec are on different levels")
    weights = dt.UU - dt.DD
    nz = np.flatnonzero(weights)
    if not len(nz):
        return 0.0
    o = dt.offset + 2 * nz
    x0, x1, x2 = fld[o - 1], fld[o], fld[o + 1]
    terms = spec.weight.f(x1) * _s_bracket(spec.kappa, x0, x1, x2) * weights[nz]
    return _fsum(terms)


def s_space_sum(spec: VariationSpec, doubled, fld: SpatialField) -> np.ndarray:
    return np.array([s_space_value(spec, d, fld)
                     for d in _per_time(doubled, spec.times, "DoubledTally")])


def _grid_count(u: float, scale: float) -> int:
    # u is normally an exact grid multiple; guard the floor against rounding
    return int(math.floor(abs(u) * scale + 1e-9))


def j_one_sided(spec: VariationSpec, fld: SpatialField, u: float) -> float:
    """J_n(f, u): scaled one-sided trapezoid sum of kappa-th powers of X from 0 to u.

    For u < 0 the reflected path X^-(s) = X(-s) is used.
    """
    n, kappa = spec.level.n, spec.kappa
    m = _grid_count(u, 2.0 ** (n / 2))
    if m == 0:
        return 0.0
    sign = 1 if u >= 0 else -1
    x = fld[sign * np.arange(m + 1)]
    fx = spec.weight.f(x)
    terms = 0.5 * (fx[1:] + fx[:-1]) * np.diff(x) ** kappa
    return 2.0 ** ((kappa - 1) * n / 4) * _fsum(terms)


def j_tilde_one_sided(spec: VariationSpec, fld: SpatialField, u: float) -> float:
    """J-tilde_n(f, u): scaled one-sided sum over the pair cells [2j, 2j+2] from 0 to u.

    The number of pair cells is floor(2^(n/2) |u| / 2), which is the count
    that makes 2^((kappa-1)n/4) S_n(f, t) = J-tilde_n(f, Y-tilde_n(t)) exact.
    """
    n, kappa = spec.level.n, spec.kappa
    m = _grid_count(u, 0.5 * 2.0 ** (n / 2))
    if m == 0:
        return 0.0
    sign = 1 if u >= 0 else -1
    x = fld[sign * np.arange(2 * m + 1)]
    x0, x1, x2 = x[0:-1:2], x[1::2], x[2::2]
    terms = spec.weight.f(x1) * _s_bracket(kappa, x0, x1, x2)
    return 2.0 ** ((kappa - 1) * n / 4) * _fsum(terms)


# ---------------------------------------------------------------------------
# Gaussian (X-only) functionals


@dataclass(frozen=True)
class Section2Spec:
    """Parameters of the weighted Gaussian functional J_t^(n)(f).

    ``phi(i)`` is ``alpha`` for even ``i`` and ``beta`` for odd ``i``; ``poly``
    must have centered Hermite rank >= 2.
    """

    alpha: float
    beta: float
    gamma: float
    poly: Poly
    weight: WeightFunction
    level: DyadicLevel
    times: tuple = field(default=(1.0,))

    def __post_init__(self):
        if not decompose(self.poly).centered_rank_ge2:
            raise ValueError("poly must have centered Hermite rank >= 2 (E[G P(G)] = 0)")
        times = tuple(float(t) for t in np.atleast_1d(self.times))
        if any(t < 0 for t in times):
            raise ValueError("times must be nonnegative")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "level", as_level(self.level))
        object.__setattr__(self, "weight", _weight(self.weight))

    @property
    def sigma2(self) -> float:
        return (self.alpha ** 2 + self.beta ** 2) / 2 * variance_of(self.poly)

    @property
    def limit_scale(self) -> float:
        return math.sqrt(self.gamma ** 2 + self.sigma2)

    def phi(self, i):
        i = np.asarray(i)
        return np.where(i % 2 == 0, self.alpha, self.beta)


def _rescaled_increments(path: FinePath, level: DyadicLevel, count: int) -> np.ndarray:
    """g_j = X^(n)_j - X^(n)_{j-1} = 2^(n/4)(X_{j h} - X_{(j-1) h}), j = 1..count."""
    h = level.spatial_mesh
    if abs(path.mesh - h) > 1e-12 * h:
        raise ValueError(f"X path mesh {path.mesh:g} differs from 2^(-n/2) = {h:g}")
    if len(path.values) < count + 1:
        raise ValueError(f"X path covers {len(path.values) - 1} increments, {count} required")
    return 2.0 ** (level.n / 4) * np.diff(path.values[:count + 1])


def _half_count(level: DyadicLevel, t: float) -> int:
    return int(math.floor(2.0 ** (level.n / 2) * t + 1e-9))


def j_gaussian(spec: Section2Spec, path: FinePath) -> np.ndarray:
    """J_t^(n)(f) at every ``spec.times``, from an X path sampled at mesh 2^(-n/2)."""
    lv = spec.level
    mean_p = float(decompose(spec.poly).mean)
    out = []
    for t in spec.times:
        m = _half_count(lv, t)
        if m == 0:
            out.append(0.0)
            continue
        g = _rescaled_increments(path, lv, m)
        x = path.values[:m + 1]
        fx = spec.weight.f(x)
        i = np.arange(1, m + 1)
        inner = spec.phi(i) * (spec.poly(g) - mean_p) + spec.gamma * (-1.0) ** i * g
        out.append(2.0 ** (-lv.n / 4) * _fsum(0.5 * (fx[1:] + fx[:-1]) * inner))
    return np.array(out)


def m_blocks(spec: Section2Spec, n_blocks: int, path: FinePath) -> np.ndarray:
    """Block sums M_1..M_{2N}: phi-weighted centered P over unit blocks, then alternating increments."""
    lv = spec.level
    scale = 2.0 ** (lv.n / 2)
    edges = [int(math.floor(j * scale + 1e-9)) for j in range(n_blocks + 1)]
    g = _rescaled_increments(path, lv, edges[-1])
    mean_p = float(decompose(spec.poly).mean)
    i = np.arange(1, edges[-1] + 1)
    a = spec.phi(i) * (spec.poly(g) - mean_p)
    b = (-1.0) ** i * g
    c = 2.0 ** (-lv.n / 4)
    first = [c * _fsum(a[edges[j]:edges[j + 1]]) for j in range(n_blocks)]
    second = [c * _fsum(b[edges[j]:edges[j + 1]]) for j in range(n_blocks)]
    return np.array(first + second)


SECTION2_PRESETS = {
    "cor9": "even kappa; alpha=beta=1, gamma=0, P = x^kappa - mu_kappa",
    "cor10": "even kappa; alternating signs (-1)^j on kappa-th powers",
    "cor11": "even kappa; pair cells, forward minus backward kappa-th powers",
    "cor_odd": "odd kappa; trapezoid sum of kappa-th powers (mu_kappa = 0)",
    "cor13": "odd kappa; pair cells, forward plus backward kappa-th powers",
    "cor_last": "odd kappa; alternating signs (-1)^j on kappa-th powers",
}

_PRESET_PARITY = {"cor9": 0, "cor10": 0, "cor11": 0, "cor_odd": 1, "cor13": 1, "cor_last": 1}


def cor9_spec(kappa: int, weight, level, times=(1.0,)) -> Section2Spec:
    poly = Poly.monomial(kappa) - Poly((gaussian_moment_exact(kappa),))
    return Section2Spec(1.0, 1.0, 0.0, poly, weight, level, times)


def j_preset(name: str, kappa: int, weight, level, path: FinePath, times) -> np.ndarray:
    """Literal evaluation of the named Gaussian-functional preset at ``times``."""
    if name not in _PRESET_PARITY:
        raise ValueError(f"unknown preset {name!r}; choose from {', '.join(_PRESET_PARITY)}")
    if kappa % 2 != _PRESET_PARITY[name]:
        raise ValueError(f"preset {name} requires {'odd' if _PRESET_PARITY[name] else 'even'} kappa")
    lv = as_level(level)
    w = _weight(weight)
    n = lv.n
    mu = gaussian_moment(kappa)
    out = []
    for t in np.atleast_1d(times):
        if name in ("cor11", "cor13"):
            # j = 1 .. floor((2^(n/2) t - 1) / 2), pair cells [2j, 2j+2]
            top = int(math.floor(0.5 * (2.0 ** (n / 2) * t - 1) + 1e-9))
            if top < 1:
                out.append(0.0)
                continue
            x = path.values[:2 * top + 3]
            if len(x) < 2 * top + 3:
                raise ValueError("X path too short for the requested time")
            j = np.arange(1, top + 1)
            x0, x1, x2 = x[2 * j], x[2 * j + 1], x[2 * j + 2]
            sgn = -1.0 if name == "cor11" else 1.0
            terms = w.f(x1) * ((x2 - x1) ** kappa + sgn * (x1 - x0) ** kappa)
            out.append(2.0 ** ((kappa - 1) * n / 4) * _fsum(terms))
            continue
        m = _half_count(lv, t)
        if m == 0:
            out.append(0.0)
            continue
        if len(path.values) < m + 1:
            raise ValueError("X path too short for the requested time")
        x = path.values[:m + 1]
        fx = w.f(x)
        trap = 0.5 * (fx[1:] + fx[:-1])
        dx = np.diff(x)
        if name in ("cor9", "cor_odd"):
            terms = trap * (2.0 ** (kappa * n / 4) * dx ** kappa - mu)
            out.append(2.0 ** (-n / 4) * _fsum(terms))
        else:
            i = np.arange(1, m + 1)
            terms = trap * (-1.0) ** i * dx ** kappa
            out.append(2.0 ** ((kappa - 1) * n / 4) * _fsum(terms))
    return np.array(out)
