"""Acceptance criteria 1-11 at their stated tolerances.

Each test prints one line ``criterion N: PASS|FAIL  <detail>`` to the
terminal (outside pytest's capture) before asserting.  Distributional
criteria use pinned seeds and the documented retry: the seed and up to two
reseeds are tried, and a criterion fails only if all three fail.
"""
from __future__ import annotations

import math
import time

import numpy as np
import pytest
from scipy import stats as sps

from ibmpower import harness, limits
from ibmpower.gaussian_paths import Streams, sample_fine_path
from ibmpower.harness import ExperimentConfig
from ibmpower.hermite import Poly, gaussian_moment_exact, variance_of
from ibmpower.localtime import MEAN_L10, occupation_profile
from ibmpower.stats import cov_se, mean_se, var_se

SEED = 20240601
BMRS_VAR = (8 / 3) / math.sqrt(2 * math.pi)
LEVELS = (8, 12, 16)


@pytest.fixture
def emit(capsys):
    def _emit(num, ok, detail):
        with capsys.disabled():
            print(f"\ncriterion {num}: {'PASS' if ok else 'FAIL'}  {detail}")
    return _emit


def _final(rep):
    return rep["per_level"][-1]


def _attempts(rep):
    return "seeds " + ", ".join(f"{a['master_seed']}:{a['verdict']}" for a in rep["attempts"])


def test_criterion_01_identities(emit):
    t0 = time.perf_counter()
    res = harness.identity_suite(SEED, 200)
    dt = time.perf_counter() - t0
    ok = res.passed and res.max_rel_err <= 1e-9 and dt < 60
    emit(1, ok, f"{res.checks} identity checks on {res.instances} instances, max relative "
                f"error {res.max_rel_err:.3g}, {len(res.failures)} failures, {dt:.1f} s")
    assert ok, harness.dump_failures(res)


def test_criterion_02_constants(emit):
    moments = tuple(gaussian_moment_exact(q) for q in (2, 4, 6, 8))
    v4 = variance_of(Poly((-3, 0, 0, 0, 1)))
    v2 = variance_of(Poly((-1, 0, 1)))
    v3 = variance_of(Poly((0, -3, 0, 1)))
    ok = moments == (1, 3, 15, 105) and v4 == 96 and v2 == 2 and v3 == 6 == 15 - 3 ** 2
    emit(2, ok, f"moments {moments}, Var(x^4-3)={v4}, Var(x^2-1)={v2}, Var(x^3-3x)={v3}")
    assert ok


def test_criterion_03_kl_quadratic(emit):
    t0 = time.perf_counter()
    cfg = ExperimentConfig("kl_quadratic", levels=(16,), times=(1.0,), replicates=4000,
                           master_seed=SEED)
    rep, samples = harness.run_with_retry(cfg)
    dt = time.perf_counter() - t0
    fin = _final(rep)
    limit_var, limit_se = var_se(samples[16][1][:, 0])
    ratio = fin["std_ratio"]
    ok = (abs(ratio - 1) <= 0.05 and rep["checks"]["ks_final"] and dt < 300
          and abs(limit_var - BMRS_VAR) <= 3 * limit_se)
    emit(3, ok, f"std ratio {ratio:.3f}, KS p {fin['marginals'][0]['ks_p']:.3f}, "
                f"Var BMRS(1) {limit_var:.4f} +- {limit_se:.4f} (oracle {BMRS_VAR:.4f}), "
                f"{_attempts(rep)}, {dt:.0f} s")
    assert ok


def test_criterion_04_kl_cubic(emit):
    cfg = ExperimentConfig("kl_cubic", levels=(16,), times=(1.0,), replicates=4000,
                           master_seed=SEED)
    rep, _ = harness.run_with_retry(cfg)
    p = _final(rep)["marginals"][0]["ks_p"]
    ok = p >= 0.005
    emit(4, ok, f"KS p {p:.3f} vs iterated Brownian motion, {_attempts(rep)}")
    assert ok


def _theorem_protocol(num, tid, kappa, emit, extra=""):
    cfg = ExperimentConfig(tid, kappa=kappa, weight_name="cos", levels=LEVELS, times=(0.5, 1.0),
                           replicates=2000, master_seed=SEED)
    rep, samples = harness.run_with_retry(cfg)
    fin = _final(rep)
    energies = rep["monotone"]["energy_stats"]
    ok = rep["checks"]["energy_final"] and rep["checks"]["monotone"]
    emit(num, ok, f"{tid}: energy {', '.join(f'{e:.5f}' for e in energies)} over n={LEVELS} "
                  f"({rep['monotone']['inversions']} inversions), final perm p "
                  f"{fin['joint']['perm_p']:.3f}, {_attempts(rep)}{extra}")
    return ok


def test_criterion_05_theorem1_even(emit):
    assert _theorem_protocol(5, "thm1_even", 2, emit)


def test_criterion_06_theorem1_odd(emit):
    assert _theorem_protocol(6, "thm1_odd", 3, emit)


def test_criterion_07_theorem2_even(emit):
    N_w, N_s = 10_000, 4000
    w = np.array([limits.sample_wiener_at_yt("one", 2, Streams.for_replicate(SEED + 7, r),
                                             [1.0]).values[0] for r in range(N_w)])
    s = np.array([limits.sample_wbmrs("one", Streams.for_replicate(SEED + 8, r), [1.0],
                                      kappa=2).values[0] for r in range(N_s)])
    vw, sew = var_se(w)
    vs, ses = var_se(s)
    gap_ok = abs(vw - 2 * MEAN_L10) <= 3 * sew and abs(vs - 2 * BMRS_VAR) <= 3 * ses
    detail = (f"; variance gap: Wiener-at-Y {vw:.3f} +- {sew:.3f} (oracle {2 * MEAN_L10:.3f}), "
              f"scenery {vs:.3f} +- {ses:.3f} (oracle {2 * BMRS_VAR:.3f})")
    ok = _theorem_protocol(7, "thm2_even", 2, lambda n, o, d: emit(n, o and gap_ok, d), detail)
    assert ok and gap_ok


def test_criterion_08_corollary9(emit):
    cfg = ExperimentConfig("cor9", kappa=2, weight_name="cos", levels=(16,), times=(1.0,),
                           replicates=4000, master_seed=SEED)
    rep, _ = harness.run_with_retry(cfg)
    p = _final(rep)["marginals"][0]["ks_p"]
    ok = p >= 0.005
    emit(8, ok, f"KS p {p:.3f} vs sqrt(mu_4 - mu_2^2) int f(X) dB, {_attempts(rep)}")
    assert ok


def test_criterion_09_increment_blocks(emit):
    cfg = ExperimentConfig("prop_incr", levels=(16,), times=(1.0,), replicates=10_000,
                           master_seed=SEED)
    m = harness.generate(cfg, 16, harness.ROLE_FINITE)
    v, vse = var_se(m[:, 0])
    c, cse = cov_se(m[:, 0], m[:, 1])
    target = (2.0 + 0.0) / 2 * 2.0
    ok = abs(v - target) <= 3 * vse and abs(c) <= 3 * cse
    emit(9, ok, f"Var M1 {v:.4f} +- {vse:.4f} (target {target}), Cov(M1, M2) {c:.4f} +- {cse:.4f}")
    assert ok


def test_criterion_10_local_time(emit, coupled_ensemble):
    norm = max(float(coupled_ensemble[n]["norm_err"].max()) for n in LEVELS)
    n = 12
    vals = [occupation_profile(sample_fine_path(Streams.for_replicate(SEED + 10, r).Y, 1.0,
                                                2.0 ** -(n + 4)), n, 1.0).at(0)
            for r in range(10_000)]
    m, se = mean_se(vals)
    med = [float(np.median(coupled_ensemble[k]["weighted_gap"])) for k in LEVELS]
    ratios = [g / (k * 2 ** (-k / 4)) for g, k in zip(med, LEVELS)]
    gap_ok = med[0] > med[1] > med[2] and max(ratios) / min(ratios) <= 3
    ok = norm < 1e-12 and abs(m - MEAN_L10) <= 3 * se and gap_ok
    emit(10, ok, f"max normalization error {norm:.1e}; E L_1^0 {m:.4f} +- {se:.4f} "
                 f"(oracle {MEAN_L10:.4f}); median weighted gap "
                 f"{', '.join(f'{g:.3f}' for g in med)}, ratio to n 2^(-n/4) "
                 f"{', '.join(f'{r:.2f}' for r in ratios)}")
    assert ok


def test_criterion_11_null_and_determinism(emit):
    ps = []
    for s in range(200):
        cfg = ExperimentConfig("cor9", levels=(8,), times=(0.5, 1.0), replicates=100,
                               master_seed=SEED + s)
        rep = harness.run_experiment(cfg, null=True)
        ps.append(_final(rep)["joint"]["perm_p"])
    p_unif = sps.kstest(ps, "uniform").pvalue
    cfg = ExperimentConfig("thm1_even", levels=(6, 8), times=(0.5, 1.0), replicates=100,
                           master_seed=SEED)
    same = harness.report_bytes(harness.run_experiment(cfg)) == \
        harness.report_bytes(harness.run_experiment(cfg))
    one = harness.collect_samples(cfg)
    two = harness.collect_samples(ExperimentConfig(**cfg.to_dict(), workers=2))
    inv = all(a.tobytes() == b.tobytes() for n in one for a, b in zip(one[n], two[n]))
    ok = p_unif >= 0.005 and same and inv
    emit(11, ok, f"null p-values KS-vs-uniform p {p_unif:.3f} over 200 runs; identical report "
                 f"bytes {same}; worker-count invariance {inv}")
    assert ok
