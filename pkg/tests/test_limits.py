from __future__ import annotations

import math

import numpy as np
import pytest
from scipy import integrate, stats

from ibmpower import limits
from ibmpower.gaussian_paths import FinePath, RngStream, SpatialField, Streams, Substream
from ibmpower.hermite import Poly
from ibmpower.limits import (kappa_scale, sample_bmrs, sample_gaussian_j_limit, sample_ibm,
                             sample_mixed_odd, sample_preset_limit, sample_wbmrs,
                             sample_wiener_at_yt)
from ibmpower.stats import ks_two_sample, var_se
from ibmpower.variations import Section2Spec
from ibmpower.weights import registry_get

ALPHA = 0.005
MEAN_ABS_Y1 = math.sqrt(2 / math.pi)


def bmrs_second_moment_oracle() -> float:
    val, _ = integrate.quad(lambda r: 2 * (1 - r) / math.sqrt(2 * math.pi * r), 0, 1)
    return val


def draws(sampler, N, seed, col=-1):
    return np.array([sampler(Streams.for_replicate(seed, r)).values[col] for r in range(N)])


def test_bmrs_oracle_constant():
    assert bmrs_second_moment_oracle() == pytest.approx((8 / 3) / math.sqrt(2 * math.pi), rel=1e-10)
    assert (8 / 3) / math.sqrt(2 * math.pi) == pytest.approx(1.0638, abs=1e-4)


def test_kappa_scale_constants():
    assert kappa_scale(2) == pytest.approx(math.sqrt(2))
    assert kappa_scale(4) == pytest.approx(math.sqrt(96))
    assert kappa_scale(3) == pytest.approx(math.sqrt(6))


def test_zero_time(streams):
    assert sample_bmrs(streams, [0.0], resolution=10).values[0] == 0.0
    assert sample_ibm(streams, [0.0]).values[0] == 0.0
    assert sample_mixed_odd("cos", 3, streams, [0.0]).values[0] == 0.0
    assert sample_wiener_at_yt("cos", 2, streams, [0.0]).values[0] == 0.0


def test_bmrs_variance_and_self_similarity():
    N = 10_000
    vals = np.array([sample_bmrs(Streams.for_replicate(31, r), [0.25, 1.0], resolution=14).values
                     for r in range(N)])
    m2 = vals[:, 1] ** 2
    assert abs(m2.mean() - 1.0638) <= 3 * m2.std(ddof=1) / math.sqrt(N)
    # ratio of second moments, delta-method standard error
    a, b = vals[:, 0] ** 2, vals[:, 1] ** 2
    ratio = a.mean() / b.mean()
    grad = np.array([1 / b.mean(), -ratio / b.mean()])
    se = math.sqrt(grad @ np.cov(a, b) @ grad / N)
    assert abs(ratio - 0.25 ** 1.5) <= 3 * se


def test_wbmrs_one_is_scaled_bmrs(streams):
    b = sample_bmrs(streams, [0.5, 1.0], resolution=12)
    for kappa in (2, 4):
        w = sample_wbmrs("one", streams, [0.5, 1.0], kappa=kappa, resolution=12)
        np.testing.assert_array_equal(w.values, kappa_scale(kappa) * b.values)
    with pytest.raises(ValueError):
        sample_wbmrs("one", streams, [1.0], kappa=3)


def test_mixed_one_strat_part(streams):
    # with f = 1 the Stratonovich part is mu_4 X(Y_t); subtract it and the rest is the dB part
    s = sample_mixed_odd("one", 3, streams, [0.5, 1.0])
    z = sample_ibm(streams, [0.5, 1.0])
    w = sample_wiener_at_yt("one", 2, streams, [0.5, 1.0])
    np.testing.assert_allclose(s.values - 3.0 * z.values,
                               math.sqrt(6) / math.sqrt(2) * w.values, rtol=1e-12, atol=1e-12)


def test_mixed_cubic_equals_scaled_ibm():
    N = 4000
    m = draws(lambda st: sample_mixed_odd("one", 3, st, [1.0]), N, 41)
    z = draws(lambda st: sample_ibm(st, [1.0]), N, 42)
    _, p = ks_two_sample(m, math.sqrt(15) * z)
    assert p > ALPHA


def test_oriented_integral_conditional_variance():
    # f = 1, fixed upper limit u: Var = |u|, either sign
    N = 4000
    one = registry_get("one")
    for u in (0.7, -0.7):
        vals = []
        for r in range(N):
            st = Streams.for_replicate(43, r)
            xf, bf = SpatialField(12, st.X), SpatialField(12, st.B)
            vals.append(limits._oriented_integrals(one, xf, bf, [u])[0])
        v, se = var_se(vals)
        assert abs(v - 0.7) <= 3 * se


def test_oriented_interval_reflection():
    N = 2000
    cos = registry_get("cos")

    def sample(seed, u):
        out = []
        for r in range(N):
            st = Streams.for_replicate(seed, r)
            xf, bf = SpatialField(12, st.X), SpatialField(12, st.B)
            out.append(limits._oriented_integrals(cos, xf, bf, [u])[0])
        return np.array(out)

    _, p = ks_two_sample(sample(44, 0.6), -sample(45, -0.6))
    assert p > ALPHA


def test_wiener_vs_scenery_variance_gap():
    N = 10_000
    w = draws(lambda st: sample_wiener_at_yt("one", 2, st, [1.0]), N, 51)
    v, se = var_se(w)
    assert abs(v - 2 * MEAN_ABS_Y1) <= 3 * se
    assert 2 * MEAN_ABS_Y1 == pytest.approx(1.596, abs=1e-3)


def test_ibm_moments():
    N = 10_000
    vals = np.array([sample_ibm(Streams.for_replicate(52, r), [0.25, 1.0]).values for r in range(N)])
    m2 = vals[:, 1] ** 2
    assert abs(m2.mean() - MEAN_ABS_Y1) <= 3 * m2.std(ddof=1) / math.sqrt(N)
    a, b = vals[:, 0] ** 2, vals[:, 1] ** 2
    ratio = a.mean() / b.mean()
    grad = np.array([1 / b.mean(), -ratio / b.mean()])
    se = math.sqrt(grad @ np.cov(a, b) @ grad / N)
    assert abs(ratio - 0.5) <= 3 * se


def test_gaussian_j_constants(streams):
    spec = Section2Spec(0.0, 0.0, 0.0, Poly((1,)), "cos", 8, (1.0,))
    assert sample_gaussian_j_limit(spec, streams).values[0] == 0.0
    base = sample_preset_limit("cor9", 2, "cos", streams, [1.0]).values[0]
    last = sample_preset_limit("cor_last", 3, "cos", streams, [1.0]).values[0]
    # same X and B draws, so the two presets differ only by their constants
    assert last / base == pytest.approx(math.sqrt(15) / math.sqrt(2), rel=1e-12)
    with pytest.raises(ValueError):
        sample_preset_limit("cor9", 3, "cos", streams, [1.0])


def test_reproducible(streams):
    for f in (lambda: sample_bmrs(streams, [0.5, 1.0], resolution=12),
              lambda: sample_mixed_odd("cos", 3, streams, [0.5, 1.0], x_sites=(-1.0, 0.5)),
              lambda: sample_ibm(streams, [0.5, 1.0])):
        a, b = f(), f()
        assert a.values.tobytes() == b.values.tobytes()
        assert a.x_values.tobytes() == b.x_values.tobytes()


def test_wbmrs_conditionally_gaussian():
    # fixed X and Y, fresh B per draw
    N = 2000
    vals = []
    for r in range(N):
        base = Streams.for_replicate(61, 0)
        st = Streams(base.X, base.Y, RngStream(61, r + 1, Substream.B), base.B2)
        vals.append(sample_wbmrs("cos", st, [1.0], resolution=12).values[0])
    assert stats.shapiro(vals).pvalue > ALPHA


class _CoarseField(SpatialField):
    """Every other point of a field two levels finer: same Brownian motion, mesh x2."""

    def __init__(self, fine: SpatialField):
        super().__init__(fine.level - 2, fine.stream)
        self._fine = fine

    def extend(self, lo, hi):
        if hi > self.hi:
            self._right = self._fine[2 * np.arange(0, hi + 1)]
        if lo < self.lo:
            self._left = self._fine[-2 * np.arange(0, -lo + 1)]


def _coupled_variances(monkeypatch, sampler, N, coarse_res, seed):
    """Variance at resolutions r and r+2 computed from the same X, B and Y draws."""
    fine_res = coarse_res + 2
    real_fields = limits._fields
    real_path = limits.sample_fine_path
    out = {}
    for res in (coarse_res, fine_res):
        def fields(streams, resolution, res=res):
            xf, bf = real_fields(streams, fine_res)
            return (xf, bf) if res == fine_res else (_CoarseField(xf), _CoarseField(bf))

        def path(stream, horizon, mesh, res=res):
            p = real_path(stream, horizon, 2.0 ** -fine_res)
            if res == fine_res:
                return p
            return FinePath(p.mesh * 4, p.values[::4])

        monkeypatch.setattr(limits, "_fields", fields)
        monkeypatch.setattr(limits, "sample_fine_path", path)
        out[res] = draws(lambda st: sampler(st, res), N, seed)
    monkeypatch.setattr(limits, "_fields", real_fields)
    monkeypatch.setattr(limits, "sample_fine_path", real_path)
    a, b = out[coarse_res], out[fine_res]
    # paired standard error of the difference of second moments
    d = (a - a.mean()) ** 2 - (b - b.mean()) ** 2
    return a.var(ddof=1), b.var(ddof=1), d.std(ddof=1) / math.sqrt(N)


@pytest.mark.parametrize("name,sampler,N", [
    ("BMRS", lambda st, r: sample_bmrs(st, [1.0], resolution=r), 2000),
    ("WBMRS", lambda st, r: sample_wbmrs("cos", st, [1.0], resolution=r), 2000),
    ("MixedOdd", lambda st, r: sample_mixed_odd("cos", 3, st, [1.0], resolution=r), 10_000),
    ("WienerAtYt", lambda st, r: sample_wiener_at_yt("cos", 2, st, [1.0], resolution=r), 10_000),
    ("IBM", lambda st, r: sample_ibm(st, [1.0], resolution=r), 10_000),
])
def test_refinement_stability(monkeypatch, name, sampler, N):
    v_coarse, v_fine, se = _coupled_variances(monkeypatch, sampler, N, 14, 71)
    rel = abs(v_coarse - v_fine) / v_fine
    assert rel < 0.02, f"{name}: variance {v_coarse:.4f} at r=14 vs {v_fine:.4f} at r=16 (se {se:.4f})"
