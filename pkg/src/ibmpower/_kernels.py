"""Sequential per-path kernels compiled with numba."""
from __future__ import annotations

import math

import numba
import numpy as np


@numba.njit(cache=True)
def extract_crossings(values, mesh, inv_h, kmax):
    """Walk of successive grid levels visited by the linear interpolant.

    Returns ``(positions, hit_times, count)``; only the first ``count + 1``
    entries are meaningful.  A level is recorded when the interpolant first
    attains a grid value other than the last recorded one (ties count).
    """
    pos = np.zeros(kmax + 1, dtype=np.int64)
    hit = np.zeros(kmax + 1)
    c = 0
    count = 0
    a = values[0] * inv_h
    for i in range(1, values.shape[0]):
        b = values[i] * inv_h
        if b > a:
            while count < kmax and b >= c + 1:
                c += 1
                count += 1
                pos[count] = c
                hit[count] = (i - 1 + (c - a) / (b - a)) * mesh
        elif b < a:
            while count < kmax and b <= c - 1:
                c -= 1
                count += 1
                pos[count] = c
                hit[count] = (i - 1 + (c - a) / (b - a)) * mesh
        if count >= kmax:
            break
        a = b
    return pos, hit, count


@numba.njit(cache=True)
def occupation(values, mesh, eps, times, lo, nbins):
    """Time the linear interpolant spends in bins ``[(j-1/2)eps, (j+1/2)eps)``.

    ``times`` must be sorted; row ``r`` of the output holds occupation up to
    ``times[r]`` for bins ``j = lo .. lo + nbins - 1``.
    """
    out = np.zeros((times.shape[0], nbins))
    acc = np.zeros(nbins)
    r = 0
    nseg = values.shape[0] - 1
    for i in range(nseg):
        t0 = i * mesh
        while r < times.shape[0] and times[r] <= t0:
            out[r, :] = acc
            r += 1
        if r >= times.shape[0]:
            break
        a = values[i]
        b = values[i + 1]
        dt = mesh
        if times[r] < t0 + mesh:
            # emit the partial segment for every time falling inside it
            while r < times.shape[0] and times[r] < t0 + mesh:
                frac = (times[r] - t0) / mesh
                tmp = acc.copy()
                _deposit(tmp, a, a + frac * (b - a), frac * mesh, eps, lo)
                out[r, :] = tmp
                r += 1
        _deposit(acc, a, b, dt, eps, lo)
    while r < times.shape[0]:
        out[r, :] = acc
        r += 1
    return out


@numba.njit(cache=True)
def _deposit(acc, a, b, dt, eps, lo):
    if a == b:
        j = int(math.floor(a / eps + 0.5))
        acc[j - lo] += dt
        return
    x0 = min(a, b)
    x1 = max(a, b)
    speed = dt / (x1 - x0)
    j0 = int(math.floor(x0 / eps + 0.5))
    j1 = int(math.floor(x1 / eps + 0.5))
    for j in range(j0, j1 + 1):
        left = max(x0, (j - 0.5) * eps)
        right = min(x1, (j + 0.5) * eps)
        if right > left:
            acc[j - lo] += (right - left) * speed


@numba.njit(cache=True)
def _may_hit(a, b, level, s2, log_tol):
    # a Brownian bridge from a to b with variance s2 touches level with
    # probability exp(-2 (level - a)(level - b) / s2)
    q = (level - a) * (level - b)
    return q <= 0.0 or 2.0 * q <= log_tol * s2


@numba.njit(cache=True)
def extract_crossings_adaptive(values, mesh, inv_h, kmax, seed, tol, min_s2):
    """Like ``extract_crossings`` but bisects segments by Brownian-bridge
    midpoints wherever a new level may be touched with probability >= tol.

    Midpoint normals come from numba's generator, reseeded with ``seed`` on
    entry, and are consumed in a fixed order, so the result is a deterministic
    function of ``(values, seed)``.  Returns ``(positions, hit_times, count,
    bisections)``.
    """
    np.random.seed(seed)
    pos = np.zeros(kmax + 1, dtype=np.int64)
    hit = np.zeros(kmax + 1)
    c = 0
    count = 0
    used = 0
    s2_base = mesh * inv_h * inv_h
    log_tol = -math.log(tol)
    # explicit stack of segments (a, b, t0, dt, s2)
    size = 128
    sa = np.empty(size)
    sb = np.empty(size)
    st = np.empty(size)
    sdt = np.empty(size)
    ss2 = np.empty(size)
    for i in range(1, values.shape[0]):
        a = values[i - 1] * inv_h
        b = values[i] * inv_h
        # fast path: far from both neighbouring levels
        if not (_may_hit(a, b, c + 1, s2_base, log_tol) or _may_hit(a, b, c - 1, s2_base, log_tol)):
            continue
        sa[0] = a
        sb[0] = b
        st[0] = (i - 1) * mesh
        sdt[0] = mesh
        ss2[0] = s2_base
        top = 1
        while top > 0 and count < kmax:
            top -= 1
            a = sa[top]
            b = sb[top]
            t0 = st[top]
            dt = sdt[top]
            s2 = ss2[top]
            split = _may_hit(a, b, c + 1, s2, log_tol) or _may_hit(a, b, c - 1, s2, log_tol)
            if split and s2 > min_s2 and top + 2 < size:
                m = 0.5 * (a + b) + math.sqrt(0.25 * s2) * np.random.standard_normal()
                used += 1
                # push second half first so the first half is processed first
                sa[top] = m
                sb[top] = b
                st[top] = t0 + 0.5 * dt
                sdt[top] = 0.5 * dt
                ss2[top] = 0.5 * s2
                sa[top + 1] = a
                sb[top + 1] = m
                st[top + 1] = t0
                sdt[top + 1] = 0.5 * dt
                ss2[top + 1] = 0.5 * s2
                top += 2
                continue
            if b > a:
                while count < kmax and b >= c + 1:
                    c += 1
                    count += 1
                    pos[count] = c
                    hit[count] = t0 + (c - a) / (b - a) * dt
            elif b < a:
                while count < kmax and b <= c - 1:
                    c -= 1
                    count += 1
                    pos[count] = c
                    hit[count] = t0 + (c - a) / (b - a) * dt
        if count >= kmax:
            break
    return pos, hit, count, used
