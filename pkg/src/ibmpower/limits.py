"""Draws of the limiting objects at finite sets of times.

Space integrals against B are discretized on the grid of mesh
``h = 2^(-resolution/2)``; values of X or B between grid points are filled in
by exact Brownian-bridge draws, Y at the requested times is drawn exactly, and
Stratonovich integrals of f(X) against X are evaluated through the
antiderivative, F(X_u) - F(X_0).
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .gaussian_paths import SpatialField, Streams, gaussian_points, sample_fine_path
from .hermite import gaussian_moment
from .localtime import occupation_profiles
from .variations import Section2Spec, _PRESET_PARITY
from .weights import WeightFunction, registry_get

DEFAULT_RESOLUTION = 16

# bridge tags, distinct per use so draws never collide
_TAG_XSITES = 1
_TAG_X_AT_Y = 2
_TAG_B_AT_Y = 3


class LimitKind(str, enum.Enum):
    BMRS = "BMRS"
    WBMRS = "WBMRS"
    MixedOdd = "MixedOdd"
    WienerAtYt = "WienerAtYt"
    GaussianJ = "GaussianJ"
    IBM = "IBM"


@dataclass(frozen=True)
class LimitSample:
    times: tuple
    values: np.ndarray
    kind: LimitKind
    conditioning: dict
    x_sites: tuple = ()
    x_values: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        if len(self.values) != len(self.times):
            raise ValueError("values and times differ in length")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("limit sample contains non-finite values")


def _w(weight) -> WeightFunction:
    return registry_get(weight) if isinstance(weight, str) else weight


def _fields(streams: Streams, resolution: int) -> tuple[SpatialField, SpatialField]:
    return SpatialField(resolution, streams.X), SpatialField(resolution, streams.B)


def _make(kind, times, values, streams, resolution, xf, x_sites):
    x_sites = tuple(float(x) for x in x_sites)
    xv = xf.evaluate(x_sites, _TAG_XSITES) if x_sites else np.zeros(0)
    cond = {"master_seed": streams.X.master_seed, "stream_id": streams.X.stream_id,
            "resolution": resolution}
    return LimitSample(tuple(float(t) for t in times), np.asarray(values, dtype=float),
                       kind, cond, x_sites, xv)


def kappa_scale(kappa: int) -> float:
    """sqrt(mu_{2k} - mu_k^2) for even kappa, sqrt(mu_{2k} - mu_{k+1}^2) for odd kappa."""
    if kappa % 2 == 0:
        return math.sqrt(gaussian_moment(2 * kappa) - gaussian_moment(kappa) ** 2)
    return math.sqrt(gaussian_moment(2 * kappa) - gaussian_moment(kappa + 1) ** 2)


def _scenery_integral(weight: WeightFunction, streams: Streams, times, resolution: int):
    """sum_j f(X_{jh}) L_t^{jh}(Y) (B_{(j+1)h} - B_{jh}) for each t, plus the X field."""
    times = np.asarray(times, dtype=float)
    if np.any((times < 0) | (times > 1)):
        raise ValueError("times must lie in [0, 1]")
    order = np.argsort(times, kind="stable")
    mesh_t = 2.0 ** (-resolution)
    path = sample_fine_path(streams.Y, max(float(times.max()), mesh_t), mesh_t)
    lo, dens = occupation_profiles(path, resolution, times[order])
    xf, bf = _fields(streams, resolution)
    j = lo + np.arange(dens.shape[1])
    integrand = weight.f(xf[j]) * (bf[j + 1] - bf[j])
    out = np.empty(len(times))
    out[order] = dens @ integrand
    return out, xf


def sample_bmrs(streams: Streams, times, resolution: int = DEFAULT_RESOLUTION,
                x_sites=()) -> LimitSample:
    """Brownian motion in random scenery, int L_t^x(Y) dB_x."""
    vals, xf = _scenery_integral(registry_get("one"), streams, times, resolution)
    return _make(LimitKind.BMRS, times, vals, streams, resolution, xf, x_sites)


def sample_wbmrs(weight, streams: Streams, times, kappa: int = 2,
                 resolution: int = DEFAULT_RESOLUTION, x_sites=()) -> LimitSample:
    """sqrt(mu_2k - mu_k^2) int f(X_z) L_t^z(Y) dB_z (even kappa)."""
    if kappa % 2:
        raise ValueError("weighted scenery limit needs even kappa")
    vals, xf = _scenery_integral(_w(weight), streams, times, resolution)
    return _make(LimitKind.WBMRS, times, kappa_scale(kappa) * vals, streams, resolution, xf,
                 x_sites)


def _oriented_integrals(weight: WeightFunction, xf: SpatialField, bf: SpatialField, upper):
    """Signed Wiener integrals int_0^u f(X_z) dB_z, with int_0^u = -int_u^0 for u < 0."""
    upper = np.asarray(upper, dtype=float)
    h = xf.mesh
    cells = np.floor(upper / h).astype(np.int64)
    reach = int(np.max(np.abs(cells))) + 2 if len(cells) else 1
    j = np.arange(-reach, reach)
    contrib = weight.f(xf[j]) * (bf[j + 1] - bf[j])
    right = np.concatenate([[0.0], np.cumsum(contrib[reach:])])        # cells 0..m-1
    left = np.concatenate([[0.0], np.cumsum(contrib[:reach][::-1])])   # cells -1..-m
    b_u = bf.evaluate(upper, _TAG_B_AT_Y)
    out = np.empty(len(upper))
    for i, (u, m) in enumerate(zip(upper, cells)):
        fm = float(weight.f(xf[m]))
        if u >= 0:
            out[i] = right[m] + fm * (b_u[i] - bf[m])
        else:
            # full cells m+1 .. -1, partial cell [u, (m+1) h]
            out[i] = -(left[-m - 1] + fm * (bf[m + 1] - b_u[i]))
    return out


def _mixed(weight: WeightFunction, kappa: int, xf, bf, upper):
    strat = gaussian_moment(kappa + 1) * (weight.F(xf.evaluate(upper, _TAG_X_AT_Y)) - weight.F(0.0))
    return strat + kappa_scale(kappa) * _oriented_integrals(weight, xf, bf, upper)


def sample_mixed_odd(weight, kappa: int, streams: Streams, times,
                     resolution: int = DEFAULT_RESOLUTION, x_sites=()) -> LimitSample:
    """int_0^{Y_t} f(X_z)(mu_{k+1} d°X_z + sqrt(mu_2k - mu_{k+1}^2) dB_z), odd kappa."""
    if kappa % 2 == 0 or kappa < 3:
        raise ValueError("mixed limit needs odd kappa >= 3")
    w = _w(weight)
    xf, bf = _fields(streams, resolution)
    y = gaussian_points(streams.Y, times)
    vals = _mixed(w, kappa, xf, bf, y)
    return _make(LimitKind.MixedOdd, times, vals, streams, resolution, xf, x_sites)


def sample_wiener_at_yt(weight, kappa: int, streams: Streams, times,
                        resolution: int = DEFAULT_RESOLUTION, x_sites=()) -> LimitSample:
    """sqrt(mu_2k - mu_k^2) int_0^{Y_t} f(X_z) dB_z, even kappa."""
    if kappa % 2:
        raise ValueError("Wiener-at-Y_t limit needs even kappa")
    w = _w(weight)
    xf, bf = _fields(streams, resolution)
    y = gaussian_points(streams.Y, times)
    vals = kappa_scale(kappa) * _oriented_integrals(w, xf, bf, y)
    return _make(LimitKind.WienerAtYt, times, vals, streams, resolution, xf, x_sites)


def sample_gaussian_j_limit(spec: Section2Spec, streams: Streams, times=None,
                            resolution: int = DEFAULT_RESOLUTION, x_sites=()) -> LimitSample:
    """sqrt(gamma^2 + (alpha^2 + beta^2)/2 Var P(G)) int_0^t f(X_s) dB_s."""
    times = spec.times if times is None else times
    xf, bf = _fields(streams, resolution)
    vals = spec.limit_scale * _oriented_integrals(spec.weight, xf, bf, times)
    return _make(LimitKind.GaussianJ, times, vals, streams, resolution, xf, x_sites)


def sample_preset_limit(name: str, kappa: int, weight, streams: Streams, times,
                        resolution: int = DEFAULT_RESOLUTION, x_sites=()) -> LimitSample:
    """Limit of a named Gaussian-functional preset (see ``variations.SECTION2_PRESETS``)."""
    if name not in _PRESET_PARITY:
        raise ValueError(f"unknown preset {name!r}")
    if kappa % 2 != _PRESET_PARITY[name]:
        raise ValueError(f"preset {name} has the wrong kappa parity")
    w = _w(weight)
    xf, bf = _fields(streams, resolution)
    t = np.asarray(times, dtype=float)
    if name in ("cor_odd", "cor13"):
        vals = _mixed(w, kappa, xf, bf, t)
    elif name == "cor_last":
        vals = math.sqrt(gaussian_moment(2 * kappa)) * _oriented_integrals(w, xf, bf, t)
    else:
        vals = kappa_scale(kappa) * _oriented_integrals(w, xf, bf, t)
    return _make(LimitKind.GaussianJ, times, vals, streams, resolution, xf, x_sites)


def sample_ibm(streams: Streams, times, resolution: int = DEFAULT_RESOLUTION,
               x_sites=()) -> LimitSample:
    """Iterated Brownian motion Z_t = X(Y_t)."""
    xf, _ = _fields(streams, resolution)
    y = gaussian_points(streams.Y, times)
    vals = xf.evaluate(y, _TAG_X_AT_Y)
    return _make(LimitKind.IBM, times, vals, streams, resolution, xf, x_sites)
