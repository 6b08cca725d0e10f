"""Intrinsic skeletal structure: embedded walks, crossing tallies, terminal indices."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ._kernels import extract_crossings, extract_crossings_adaptive
from .gaussian_paths import FinePath, RngStream, _KEY_ADAPT, _KEY_WALK, sample_fine_path

# bisect a segment while a bridge may touch a new level with at least this probability
ADAPT_TOL = 1e-3
# stop bisecting once the segment variance is this small in squared grid units
ADAPT_MIN_VAR = 1e-5


@dataclass(frozen=True)
class DyadicLevel:
    n: int

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"level must be a positive integer, got {self.n}")

    @property
    def spatial_mesh(self) -> float:
        return 2.0 ** (-self.n / 2)

    @property
    def time_mesh(self) -> float:
        return math.ldexp(1.0, -self.n)

    def steps(self, t: float) -> int:
        """floor(2^n t)."""
        return int(math.floor(math.ldexp(t, self.n)))

    def pairs(self, t: float) -> int:
        """floor(2^(n-1) t)."""
        return int(math.floor(math.ldexp(t, self.n - 1)))


def as_level(level) -> DyadicLevel:
    return level if isinstance(level, DyadicLevel) else DyadicLevel(int(level))


@dataclass(frozen=True)
class EmbeddedWalk:
    level: DyadicLevel
    positions: np.ndarray
    hit_times: Optional[np.ndarray] = None

    def __post_init__(self):
        p = np.asarray(self.positions, dtype=np.int64)
        if p.ndim != 1 or not len(p) or p[0] != 0:
            raise ValueError("walk positions must be a nonempty sequence starting at 0")
        if len(p) > 1 and np.any(np.abs(np.diff(p)) != 1):
            raise ValueError("walk steps must be +-1")
        object.__setattr__(self, "positions", p)

    @property
    def steps(self) -> int:
        return len(self.positions) - 1


class IncompleteSkeletonError(RuntimeError):
    def __init__(self, achieved: int, required: int):
        super().__init__(f"incomplete skeleton: {achieved} of {required} crossings found")
        self.achieved = achieved
        self.required = required


def simulate_walk(stream: RngStream, level, t: float) -> EmbeddedWalk:
    """Marginal mode: simple symmetric walk with floor(2^n t) steps."""
    if not 0 <= t <= 1:
        raise ValueError(f"t must lie in [0, 1], got {t}")
    lv = as_level(level)
    k = lv.steps(t)
    bits = stream.generator(_KEY_WALK, lv.n).integers(0, 2, size=k, dtype=np.int64)
    pos = np.zeros(k + 1, dtype=np.int64)
    np.cumsum(2 * bits - 1, out=pos[1:])
    return EmbeddedWalk(lv, pos)


def extract_walk(path: FinePath, level, t: float, stream: RngStream | None = None,
                 check_mesh: bool = True) -> EmbeddedWalk:
    """Coupled mode: read the embedded walk and its hitting times off a fine path.

    Without ``stream`` crossings are read off the linear interpolant.  With a
    stream, every segment on which the Brownian bridge could touch a new level
    with probability >= ``ADAPT_TOL`` is bisected by bridge midpoints drawn
    from that stream, which removes the delay caused by excursions that the
    sampled path skips over.
    """
    lv = as_level(level)
    if check_mesh and path.mesh > lv.time_mesh / 16 * (1 + 1e-12):
        raise ValueError(f"path mesh {path.mesh:g} exceeds 2^-n/16 = {lv.time_mesh / 16:g}")
    k = lv.steps(t)
    values = np.ascontiguousarray(path.values, dtype=float)
    inv_h = 1.0 / lv.spatial_mesh
    if stream is None:
        pos, hit, count = extract_crossings(values, path.mesh, inv_h, k)
    else:
        seed = int(stream.generator(_KEY_ADAPT, lv.n).integers(0, 2 ** 32 - 1))
        pos, hit, count, _ = extract_crossings_adaptive(
            values, path.mesh, inv_h, k, seed, ADAPT_TOL, ADAPT_MIN_VAR)
    if count < k:
        raise IncompleteSkeletonError(int(count), k)
    return EmbeddedWalk(lv, pos[:k + 1], hit[:k + 1])


def coupled_walk(stream: RngStream, level, t: float, oversample: int = 16,
                 horizon: float | None = None,
                 adaptive: bool = True) -> tuple[EmbeddedWalk, FinePath]:
    """Fine Y path at mesh 2^-n/oversample, then walk extraction.

    A path sampled directly at the final mesh has the same law as a coarser
    path followed by bridge doubling, and is cheaper.  The horizon grows until
    the skeleton is complete; because draws are block-addressed the shorter
    path is always a prefix of the longer one.
    """
    lv = as_level(level)
    h = horizon if horizon is not None else max(1.25 * t, 4 * lv.time_mesh)
    while True:
        path = sample_fine_path(stream, h, lv.time_mesh / oversample)
        try:
            return extract_walk(path, lv, t, stream if adaptive else None), path
        except IncompleteSkeletonError:
            h *= 1.5


@dataclass(frozen=True)
class CrossingTally:
    """Up/down crossing counts of the cells ``[j, j+1]`` (grid units).

    ``up[i]``/``down[i]`` refer to ``j = offset + i``.
    """

    level: DyadicLevel
    offset: int
    up: np.ndarray
    down: np.ndarray
    steps_used: int
    j_star: int

    @property
    def U(self) -> dict:
        return {self.offset + i: int(c) for i, c in enumerate(self.up) if c}

    @property
    def D(self) -> dict:
        return {self.offset + i: int(c) for i, c in enumerate(self.down) if c}


def _require_steps(walk: EmbeddedWalk, k: int) -> None:
    if walk.steps < k:
        raise ValueError(f"walk has {walk.steps} steps, {k} required")


def tally_crossings(walk: EmbeddedWalk, t: float) -> CrossingTally:
    k = walk.level.steps(t)
    _require_steps(walk, k)
    w = walk.positions[:k + 1]
    if k == 0:
        return CrossingTally(walk.level, 0, np.zeros(0, np.int64), np.zeros(0, np.int64), 0, 0)
    step = np.diff(w)
    lower = np.minimum(w[:-1], w[1:])
    off = int(lower.min())
    size = int(lower.max()) - off + 1
    up = np.bincount(lower[step > 0] - off, minlength=size)
    down = np.bincount(lower[step < 0] - off, minlength=size)
    return CrossingTally(walk.level, off, up, down, k, int(w[-1]))


def skeletal_local_time(tally: CrossingTally) -> dict:
    """Skeletal local time 2^(-n/2) (U_j + D_j) on the visited cells."""
    h = tally.level.spatial_mesh
    return {tally.offset + i: h * float(u + d)
            for i, (u, d) in enumerate(zip(tally.up, tally.down)) if u + d}


@dataclass(frozen=True)
class DoubledTally:
    """Pair-step pattern counts keyed by the odd middle index ``2j+1``.

    ``counts[name][i]`` refers to odd index ``offset + 2 i``.
    """

    level: DyadicLevel
    offset: int
    UU: np.ndarray
    UD: np.ndarray
    DU: np.ndarray
    DD: np.ndarray
    pairs_used: int
    j_tilde: int

    def as_dict(self, name: str) -> dict:
        arr = getattr(self, name)
        return {self.offset + 2 * i: int(c) for i, c in enumerate(arr) if c}


def tally_doubled(walk: EmbeddedWalk, t: float) -> DoubledTally:
    p = walk.level.pairs(t)
    _require_steps(walk, 2 * p)
    w = walk.positions[:2 * p + 1]
    empty = np.zeros(0, np.int64)
    if p == 0:
        return DoubledTally(walk.level, 1, empty, empty, empty, empty, 0, 0)
    a, mid, c = w[0:-1:2], w[1::2], w[2::2]
    if np.any(a % 2):
        raise RuntimeError("walk visits an odd level at an even step")
    off = int(mid.min())
    size = (int(mid.max()) - off) // 2 + 1
    idx = (mid - off) // 2
    up_in, up_out = mid > a, c > mid

    def count(mask):
        return np.bincount(idx[mask], minlength=size)

    return DoubledTally(walk.level, off, count(up_in & up_out), count(up_in & ~up_out),
                        count(~up_in & up_out), count(~up_in & ~up_out), p, int(w[-1]) // 2)


def terminal_indices(walk: EmbeddedWalk, level, t: float) -> tuple[int, int, float]:
    """(j*, j-tilde*, Y_n(t)) read off the walk at floor(2^n t) and 2 floor(2^(n-1) t)."""
    lv = as_level(level)
    k, m = lv.steps(t), 2 * lv.pairs(t)
    _require_steps(walk, max(k, m))
    j_star = int(walk.positions[k])
    w_even = int(walk.positions[m])
    if w_even % 2:
        raise RuntimeError(f"walk value {w_even} at even step {m} is odd")
    return j_star, w_even // 2, j_star * lv.spatial_mesh
