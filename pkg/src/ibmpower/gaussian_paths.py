"""Stream-seeded Gaussian primitives: fine Brownian paths, bridge refinement,
and lazily extended two-sided Brownian fields on dyadic spatial grids.

Every random draw is addressed by ``(master_seed, stream_id, label, key...,
block)`` and produced by a Philox counter-based generator, so replicates can be
generated in any order, in any process, with bit-identical results.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

BLOCK = 1 << 16
MAX_STEPS = 1 << 27

# sub-keys inside one substream
_KEY_PATH = 0
_KEY_REFINE = 1
_KEY_FIELD_RIGHT = 2
_KEY_FIELD_LEFT = 3
_KEY_BRIDGE = 4
_KEY_WALK = 5
_KEY_POINTS = 6
_KEY_ADAPT = 7


class Substream(enum.IntEnum):
    X = 0
    Y = 1
    B = 2
    B2 = 3


@dataclass(frozen=True)
class RngStream:
    master_seed: int
    stream_id: int
    label: Substream

    def generator(self, *key: int) -> np.random.Generator:
        ss = np.random.SeedSequence(
            [int(self.master_seed), int(self.stream_id), int(self.label), *map(int, key)]
        )
        return np.random.Generator(np.random.Philox(ss))

    def normals(self, start: int, stop: int, *key: int) -> np.ndarray:
        """Standard normals with draw indices ``start..stop-1`` under ``key``.

        Draws are generated in fixed blocks of ``BLOCK`` so any sub-range is
        reproducible independently of how earlier ranges were requested.
        """
        if stop <= start:
            return np.empty(0)
        first, last = start // BLOCK, (stop - 1) // BLOCK
        # a block's draws are sequential, so a shorter request is a prefix of the full block
        tail = stop - last * BLOCK
        chunks = [self.generator(*key, b).standard_normal(BLOCK if b < last else tail)
                  for b in range(first, last + 1)]
        out = np.concatenate(chunks) if len(chunks) > 1 else chunks[0]
        offset = first * BLOCK
        return out[start - offset:stop - offset]


@dataclass(frozen=True)
class Streams:
    """The four independent sources X, Y, B, B2 of one replicate."""

    X: RngStream
    Y: RngStream
    B: RngStream
    B2: RngStream

    @classmethod
    def for_replicate(cls, master_seed: int, stream_id: int) -> "Streams":
        return cls(*(RngStream(master_seed, stream_id, lab) for lab in Substream))


class ResourceLimitError(RuntimeError):
    pass


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class FinePath:
    """Brownian path sampled on a uniform grid, ``values[i] = Y(i * mesh)``."""

    mesh: float
    values: np.ndarray

    @property
    def horizon(self) -> float:
        return self.mesh * (len(self.values) - 1)

    def __len__(self) -> int:
        return len(self.values)

    def at(self, t: float) -> float:
        """Linear interpolation of the sampled path at time ``t``."""
        return float(np.interp(t, np.arange(len(self.values)) * self.mesh, self.values))


def _step_count(horizon: float, mesh: float) -> int:
    # tolerate representation error such as 0.3 / 0.1 = 2.9999999999999996
    return int(math.floor(horizon / mesh + 1e-9))


def sample_fine_path(stream: RngStream, horizon: float, mesh: float,
                     max_steps: int = MAX_STEPS) -> FinePath:
    if not horizon > 0 or not mesh > 0:
        raise ValueError(f"horizon and mesh must be positive, got {horizon}, {mesh}")
    k = _step_count(horizon, mesh)
    if k > max_steps:
        raise ResourceLimitError(f"{k} steps requested, limit is max_steps={max_steps}")
    values = np.empty(k + 1)
    values[0] = 0.0
    np.cumsum(math.sqrt(mesh) * stream.normals(0, k, _KEY_PATH), out=values[1:])
    return FinePath(mesh, _readonly(values))


def refine_bridge(path: FinePath, factor: int, stream: RngStream) -> FinePath:
    """Insert ``factor - 1`` Brownian-bridge points inside every mesh cell."""
    if int(factor) != factor or factor < 2:
        raise ValueError(f"factor must be an integer >= 2, got {factor}")
    factor = int(factor)
    cells = len(path.values) - 1
    if cells * factor > MAX_STEPS:
        raise ResourceLimitError(f"{cells * factor} steps exceeds MAX_STEPS={MAX_STEPS}")
    fine = path.mesh / factor
    if cells == 0:
        return FinePath(fine, path.values)
    z = stream.normals(0, cells * factor, _KEY_REFINE, factor).reshape(cells, factor)
    w = np.cumsum(np.sqrt(fine) * z, axis=1)
    frac = np.arange(1, factor) / factor
    # free walk pinned to zero at the cell end, then shifted onto the chord
    bridge = w[:, :-1] - frac * w[:, -1:]
    v = path.values
    chord = v[:-1, None] + frac * (v[1:] - v[:-1])[:, None]
    out = np.empty((cells, factor))
    out[:, 0] = v[:-1]
    out[:, 1:] = chord + bridge
    values = np.append(out.ravel(), v[-1])
    return FinePath(fine, _readonly(values))


@dataclass
class SpatialField:
    """Two-sided Brownian motion on the grid ``j * 2**(-n/2)``.

    Increments are stored per side and only ever appended, so widening the
    covered index range never changes previously generated values.
    """

    level: int
    stream: RngStream
    _right: np.ndarray = field(default_factory=lambda: np.zeros(1), repr=False)
    _left: np.ndarray = field(default_factory=lambda: np.zeros(1), repr=False)

    @property
    def mesh(self) -> float:
        return 2.0 ** (-self.level / 2)

    @property
    def lo(self) -> int:
        return -(len(self._left) - 1)

    @property
    def hi(self) -> int:
        return len(self._right) - 1

    @classmethod
    def from_values(cls, level: int, values: dict) -> "SpatialField":
        """Deterministic field from explicit ``{j: X_j}`` on a contiguous range (tests, hand checks)."""
        lo, hi = min(min(values), 0), max(max(values), 0)
        if sorted(values) != list(range(lo, hi + 1)) or values.get(0, 0.0) != 0.0:
            raise ValueError("values must cover a contiguous index range with X_0 = 0")
        right = np.array([values.get(j, 0.0) for j in range(0, hi + 1)], dtype=float)
        left = np.array([values.get(-j, 0.0) for j in range(0, -lo + 1)], dtype=float)
        return cls(level, None, right, left)

    def extend(self, lo: int, hi: int) -> None:
        if lo > hi:
            raise ValueError(f"lo={lo} > hi={hi}")
        if (hi > self.hi or lo < self.lo) and self.stream is None:
            raise ValueError(f"fixed field covers [{self.lo}, {self.hi}], [{lo}, {hi}] requested")
        sd = math.sqrt(self.mesh)
        if hi > self.hi:
            inc = sd * self.stream.normals(self.hi, hi, _KEY_FIELD_RIGHT)
            self._right = np.concatenate([self._right, self._right[-1] + np.cumsum(inc)])
        if lo < self.lo:
            inc = sd * self.stream.normals(-self.lo, -lo, _KEY_FIELD_LEFT)
            self._left = np.concatenate([self._left, self._left[-1] + np.cumsum(inc)])

    def __getitem__(self, j):
        """Field value(s) at integer grid index ``j`` (scalar or array)."""
        j = np.asarray(j, dtype=np.int64)
        if j.size:
            self.extend(min(int(j.min()), 0), max(int(j.max()), 0))
        out = np.where(j >= 0, self._right[np.clip(j, 0, None)], self._left[np.clip(-j, 0, None)])
        return float(out) if out.ndim == 0 else out

    def x_at(self, j: int) -> float:
        return self[j]

    def values(self, lo: int, hi: int) -> np.ndarray:
        return self[np.arange(lo, hi + 1)]

    def evaluate(self, points, tag: int = 0) -> np.ndarray:
        """Sample the field at arbitrary real locations.

        Off-grid points are filled in by sequential Brownian-bridge draws
        conditioned on the two enclosing grid values, which is exact in law.
        Repeated calls with the same ``tag`` reproduce the same values.
        """
        pts = np.atleast_1d(np.asarray(points, dtype=float))
        out = np.empty(len(pts))
        if not len(pts):
            return out
        h = self.mesh
        scaled = pts / h
        cell = np.floor(scaled).astype(np.int64)
        on_grid = np.abs(scaled - np.rint(scaled)) < 1e-9
        grid_idx = np.rint(scaled).astype(np.int64)
        self.extend(min(int(cell.min()), 0), max(int(cell.max()) + 1, 0))
        out[on_grid] = self[grid_idx[on_grid]]
        off = np.flatnonzero(~on_grid)
        if not len(off):
            return out
        z = self.stream.normals(0, len(off), _KEY_BRIDGE, tag)
        order = off[np.lexsort((pts[off], cell[off]))]
        zi = 0
        prev_cell = None
        for i in order:
            c = int(cell[i])
            if c != prev_cell:
                left_x, left_v = c * h, self[c]
                prev_cell = c
            right_x, right_v = (c + 1) * h, self[c + 1]
            x = pts[i]
            w = (x - left_x) / (right_x - left_x)
            var = (x - left_x) * (right_x - x) / (right_x - left_x)
            out[i] = left_v + w * (right_v - left_v) + math.sqrt(max(var, 0.0)) * z[zi]
            zi += 1
            left_x, left_v = x, out[i]
        return out


def sample_spatial_field(stream: RngStream, level: int, lo: int, hi: int) -> SpatialField:
    if lo > hi:
        raise ValueError(f"lo={lo} > hi={hi}")
    if lo > 0 or hi < 0:
        raise ValueError(f"index range [{lo}, {hi}] must contain 0")
    fld = SpatialField(level, stream)
    fld.extend(lo, hi)
    return fld


def gaussian_points(stream: RngStream, times, tag: int = 0) -> np.ndarray:
    """Exact draw of a standard Brownian motion at nonnegative ``times``."""
    times = np.asarray(times, dtype=float)
    order = np.argsort(times, kind="stable")
    st = times[order]
    dt = np.diff(np.concatenate([[0.0], st]))
    if np.any(dt < 0):
        raise ValueError("times must be nonnegative")
    vals = np.cumsum(np.sqrt(dt) * stream.normals(0, len(st), _KEY_POINTS, tag))
    out = np.empty(len(times))
    out[order] = vals
    return out
