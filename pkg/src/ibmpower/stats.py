"""Two-sample tests: Kolmogorov-Smirnov on marginals, energy distance on joint vectors."""
from __future__ import annotations

import math

import numpy as np
from scipy import stats
from scipy.spatial.distance import cdist


def ks_two_sample(a, b) -> tuple[float, float]:
    res = stats.ks_2samp(np.asarray(a, float), np.asarray(b, float))
    return float(res.statistic), float(res.pvalue)


def _as_2d(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return x[:, None] if x.ndim == 1 else x


def energy_distance(x, y) -> float:
    """2 E|X-Y| - E|X-X'| - E|Y-Y'| with U-statistic within-sample means."""
    x, y = _as_2d(x), _as_2d(y)
    dxy = cdist(x, y).mean()
    dxx = cdist(x, x).sum() / (len(x) * (len(x) - 1))
    dyy = cdist(y, y).sum() / (len(y) * (len(y) - 1))
    return float(2 * dxy - dxx - dyy)


def energy_test(x, y, n_perm: int = 499, rng: np.random.Generator | None = None,
                chunk: int = 64) -> tuple[float, float]:
    """Energy distance with a permutation p-value ``(1 + #{perm >= obs}) / (1 + n_perm)``.

    The pooled distance matrix ``D`` is built once; for a label vector ``z``
    (1 on the first sample) the within/between sums follow from ``z' D z``,
    ``r' z`` and ``1' D 1`` with ``r = D 1``, so each permutation costs one
    mat-vec, done in chunks as a mat-mat product.
    """
    x, y = _as_2d(x), _as_2d(y)
    if x.shape[1] != y.shape[1]:
        raise ValueError("samples have different dimensions")
    nx, ny = len(x), len(y)
    if nx < 2 or ny < 2:
        raise ValueError("each sample needs at least two points")
    rng = rng if rng is not None else np.random.default_rng(0)
    pooled = np.vstack([x, y])
    d = cdist(pooled, pooled)
    r = d.sum(axis=1)
    total = r.sum()

    def stat(z):
        # z: (n, k) 0/1 columns
        zdz = np.einsum("ik,ik->k", z, d @ z)
        rz = r @ z
        sxx = zdz
        sxy = rz - zdz
        syy = total - 2 * rz + zdz
        return 2 * sxy / (nx * ny) - sxx / (nx * (nx - 1)) - syy / (ny * (ny - 1))

    z0 = np.zeros((nx + ny, 1))
    z0[:nx] = 1.0
    observed = float(stat(z0)[0])
    perm = []
    base = z0[:, 0]
    for start in range(0, n_perm, chunk):
        k = min(chunk, n_perm - start)
        z = np.stack([rng.permutation(base) for _ in range(k)], axis=1)
        perm.append(stat(z))
    perm = np.concatenate(perm) if perm else np.zeros(0)
    # relative slack so ties identical up to rounding count as ties
    tol = 1e-12 * max(abs(observed), 1e-300)
    p = (1 + int(np.sum(perm >= observed - tol))) / (1 + n_perm)
    return observed, p


def mean_se(x) -> tuple[float, float]:
    x = np.asarray(x, float)
    return float(x.mean()), float(x.std(ddof=1) / math.sqrt(len(x)))


def var_se(x) -> tuple[float, float]:
    """Sample variance and its standard error sqrt((m4 - s^4) / N)."""
    x = np.asarray(x, float)
    c = x - x.mean()
    v = float(np.mean(c ** 2))
    m4 = float(np.mean(c ** 4))
    return float(x.var(ddof=1)), math.sqrt(max(m4 - v * v, 0.0) / len(x))


def cov_se(x, y) -> tuple[float, float]:
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    prod = (x - x.mean()) * (y - y.mean())
    return float(prod.sum() / (len(x) - 1)), float(prod.std(ddof=1) / math.sqrt(len(x)))
