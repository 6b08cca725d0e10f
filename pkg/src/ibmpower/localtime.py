"""Occupation-density estimates of the local time of Y and skeletal diagnostics."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._kernels import occupation
from .gaussian_paths import FinePath
from .skeleton import CrossingTally, DyadicLevel, as_level


@dataclass(frozen=True)
class LocalTimeProfile:
    """``values[i]`` estimates L_t^x(Y) at ``x = (offset + i) 2^(-n/2)``."""

    level: DyadicLevel
    offset: int
    values: np.ndarray
    t: float
    bandwidth: float

    def as_dict(self) -> dict:
        return {self.offset + i: float(v) for i, v in enumerate(self.values) if v}

    def at(self, j: int) -> float:
        i = j - self.offset
        return float(self.values[i]) if 0 <= i < len(self.values) else 0.0


def occupation_profiles(path: FinePath, level, times) -> tuple[int, np.ndarray]:
    """Occupation densities at several (sorted) times in a single pass.

    Returns ``(offset, dens)`` with ``dens[r, i]`` the density up to
    ``times[r]`` in the bin centred at ``(offset + i) eps``, ``eps = 2^(-n/2)``.
    """
    lv = as_level(level)
    times = np.asarray(times, dtype=float)
    if np.any(np.diff(times) < 0):
        raise ValueError("times must be sorted")
    if len(times) and times[-1] > path.horizon * (1 + 1e-12):
        raise ValueError(f"path horizon {path.horizon:g} is shorter than t = {times[-1]:g}")
    eps = lv.spatial_mesh
    last = min(len(path.values) - 1, int(math.ceil(times[-1] / path.mesh)) + 1) if len(times) else 0
    v = np.ascontiguousarray(path.values[:last + 1], dtype=float)
    lo = int(math.floor(v.min() / eps + 0.5)) - 1
    hi = int(math.floor(v.max() / eps + 0.5)) + 1
    occ = occupation(v, path.mesh, eps, times, lo, hi - lo + 1)
    return lo, occ / eps


def occupation_profile(path: FinePath, level, t: float) -> LocalTimeProfile:
    """L_t^x(Y) at grid points x = j 2^(-n/2), estimated by occupation time of the
    piecewise-linear path in the bin of width 2^(-n/2) centred at x."""
    lv = as_level(level)
    off, dens = occupation_profiles(path, lv, [t])
    return LocalTimeProfile(lv, off, dens[0], float(t), lv.spatial_mesh)


def skeletal_vs_true(profile: LocalTimeProfile, tally: CrossingTally) -> tuple[float, float]:
    """Sup gap and sqrt(L)-weighted sup gap between skeletal and occupation local times."""
    if profile.level != tally.level:
        raise ValueError("profile and tally are on different levels")
    h = tally.level.spatial_mesh
    skel = h * (tally.up + tally.down).astype(float)
    lo = min(profile.offset, tally.offset)
    hi = max(profile.offset + len(profile.values), tally.offset + len(skel))
    if hi <= lo:
        return 0.0, 0.0
    a = np.zeros(hi - lo)
    b = np.zeros(hi - lo)
    a[tally.offset - lo:tally.offset - lo + len(skel)] = skel
    b[profile.offset - lo:profile.offset - lo + len(profile.values)] = profile.values
    gap = np.abs(a - b)
    if not len(gap):
        return 0.0, 0.0
    weighted = gap / np.maximum(np.sqrt(np.maximum(b, 0.0)), 1e-3)
    return float(gap.max()), float(weighted.max())


MEAN_L10 = math.sqrt(2 / math.pi)


def tail_envelope(x, t: float):
    """Upper envelope 2 E|L_1^0| sqrt(t) exp(-x^2 / 2t) for E|L_t^x(Y)|."""
    return 2 * MEAN_L10 * math.sqrt(t) * np.exp(-np.square(x) / (2 * t))


def coupled_diagnostics(master_seed: int, levels=(8, 12, 16), replicates: int = 500,
                        t: float = 1.0) -> dict:
    """Coupled-mode diagnostics per level over independent replicates.

    Returns ``{n: {"weighted_gap", "sup_gap", "yn_sq_err", "norm_err"}}``, each
    an array over replicates: the skeletal-vs-occupation gaps, the squared
    error |Y_n(t) - Y(t)|^2, and the occupation normalization error
    |sum_j L_j 2^(-n/2) - t|.
    """
    from .gaussian_paths import Streams
    from .skeleton import coupled_walk, tally_crossings, terminal_indices

    out = {}
    for n in levels:
        rows = []
        for r in range(replicates):
            st = Streams.for_replicate(master_seed, (4 << 40) | (n << 32) | r)
            walk, path = coupled_walk(st.Y, n, t)
            prof = occupation_profile(path, n, t)
            sup_gap, weighted = skeletal_vs_true(prof, tally_crossings(walk, t))
            _, _, y_n = terminal_indices(walk, n, t)
            norm = abs(math.fsum(prof.values) * prof.bandwidth - t)
            rows.append((weighted, sup_gap, (y_n - path.at(t)) ** 2, norm))
        a = np.array(rows)
        out[n] = {"weighted_gap": a[:, 0], "sup_gap": a[:, 1], "yn_sq_err": a[:, 2],
                  "norm_err": a[:, 3]}
    return out
