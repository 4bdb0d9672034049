"""Acceptance suite: one test per criterion, at its stated tolerance.

Each test prints a single PASS/FAIL line (run with ``pytest -s`` to see them
all).  Tolerances are pinned here, not configurable.
"""

import math
import time

import numpy as np
import pytest

from opinion_lab import backend
from opinion_lab import counterexample as cx
from opinion_lab import diagnostics as D
from opinion_lab import kernels as K
from opinion_lab import picard as P
from opinion_lab.ensemble import Ensemble, IntegratorConfig, integrate, rhs, uniform_ensemble


def crit(num: int, name: str, passed: bool, detail: str) -> None:
    print(f"ACCEPTANCE {num:2d} {name}: {'PASS' if passed else 'FAIL'} ({detail})")
    assert passed, f"criterion {num} ({name}): {detail}"


def test_01_moment_monotonicity():
    k = K.hegselmann_krause(0.2)
    ens = uniform_ensemble(200, lambda a: a)
    cfg = IntegratorConfig(method="rk4", dt=0.01, t_end=30.0, record_every=10)
    t0 = time.perf_counter()
    traj = integrate(ens, k, cfg, n_threads=1)
    ms = D.moment_series(traj, range(1, 7))
    elapsed = time.perf_counter() - t0
    worst = 0.0
    ok = True
    for order in range(1, 7):
        rep = D.monotonicity_report(ms.times, ms.values_per_order[order], 1e-6)
        ok &= rep.passed
        worst = max(worst, rep.worst_uptick)
    m1 = ms.values_per_order[1]
    m1_drift = float(np.max(np.abs(m1 - m1[0])))
    ok &= m1_drift <= 1e-8
    ok &= elapsed < 10.0
    crit(1, "moment monotonicity", ok,
         f"worst uptick {worst:.2e} <= 1e-6, m1 drift {m1_drift:.2e} <= 1e-8, "
         f"runtime {elapsed:.2f}s < 10s")


def test_02_dissipation_identity():
    k = K.gaussian_decay(1.0)
    ens = uniform_ensemble(100, lambda a: a)
    cfg = IntegratorConfig(method="rk4", dt=0.005, t_end=5.0, record_every=1)
    traj = integrate(ens, k, cfg, n_threads=1)
    res = D.dissipation_identity_residuals(traj, k)
    worst = float(np.max(np.abs(res)))
    tele = D.dissipation_telescope_error(traj, k)
    ok = worst <= 1e-4 and tele <= 1e-5
    crit(2, "dissipation identity", ok,
         f"worst step residual {worst:.2e} <= 1e-4 over {len(res)} steps, "
         f"telescope error {tele:.2e} <= 1e-5")


def test_03_variance_identity():
    rng = np.random.default_rng(20250810)
    worst = 0.0
    for _ in range(1000):
        n = int(rng.integers(2, 501))
        vals = rng.uniform(0, 1, n)
        masses = rng.uniform(0.01, 1.0, n)
        _, _, err = D.variance_identity_check(vals, masses)
        worst = max(worst, err)
    crit(3, "variance identity", worst < 1e-10,
         f"worst abs error {worst:.2e} < 1e-10 over 1000 instances")


def test_04_cluster_separation():
    rng = np.random.default_rng(20250810)
    failures = []
    for run in range(20):
        r = [0.1, 0.2, 0.3][run % 3]
        n_pieces = int(rng.integers(2, 7))
        cuts = np.sort(rng.uniform(0.05, 0.95, n_pieces - 1))
        vals = rng.uniform(0, 1, n_pieces)
        prof = K.PiecewiseProfile(tuple(cuts), tuple(vals))
        ens = uniform_ensemble(120, prof.value)
        cfg = IntegratorConfig(method="explicit_euler", dt=0.25, t_end=600.0,
                               record_every=10 ** 6, stop_max_velocity=1e-8)
        traj = integrate(ens, K.hegselmann_krause(r), cfg, n_threads=1)
        if traj.step_records[-1].max_velocity >= 1e-8:
            failures.append((run, "did not reach steady state"))
            continue
        gap = r / 4.0
        clusters = D.detect_clusters(traj.final, gap_threshold=gap)
        if clusters.min_separation() < r - 2 * gap:
            failures.append((run, f"separation {clusters.min_separation():.4f}"))
    crit(4, "cluster separation", not failures,
         f"20 randomized steady-state runs, failures: {failures or 'none'}")


def test_05_order_preservation():
    k = K.gaussian_decay(1.0)
    ens = uniform_ensemble(100, lambda a: a)
    cfg = IntegratorConfig(method="rk4", dt=0.01, t_end=10.0, record_every=10)
    traj = integrate(ens, k, cfg, n_threads=1)
    rep = D.order_audit(traj, kernel=k, rate_slack=0.05)
    full_pairs = 100 * 99 // 2
    ok = (rep.pairs_checked == full_pairs and not rep.violations
          and not rep.rate_bound_violations)
    crit(5, "order preservation", ok,
         f"{rep.pairs_checked} pairs, {len(rep.violations)} sign flips, "
         f"{len(rep.rate_bound_violations)} rate-floor violations, "
         f"min observed log gap rate {rep.min_gap_ratio_log:.3f} >= -(L+W) = -2")


def test_06_counterexample_validity():
    params = cx.CounterexampleParams()
    times = (0.5, 5.0, 50.0)
    t0 = time.perf_counter()
    err_2000 = max(cx.verify_rhs(params, t, 2000, 0.01) for t in times)
    err_4000 = max(cx.verify_rhs(params, t, 4000, 0.01) for t in times)
    elapsed = time.perf_counter() - t0
    ratio = err_4000 / err_2000
    ok = err_2000 <= 0.02 and 0.4 <= ratio <= 0.6 and elapsed < 30.0
    crit(6, "counterexample validity", ok,
         f"max error {err_2000:.2e} <= 0.02 at n=2000; doubling n scales the "
         f"error by {ratio:.3f} (within 0.5 +- 20%); runtime {elapsed:.1f}s < 30s")


def test_07_counterexample_dichotomy():
    params = cx.CounterexampleParams()
    n = 2000
    sample_times = [1.0, 2.0, 5.0, 10.0, 20.0, 40.0, 80.0]
    rep = cx.run_counterexample_report(params, 80.0, n, sample_times=sample_times)
    ok = (rep.w1_uniform_max < 10.0 / n
          and all(c >= 4 for c in rep.fold_crossings)
          and rep.cluster_gap_min >= 0.007)
    crit(7, "counterexample dichotomy", ok,
         f"band W1 to uniform {rep.w1_uniform_max:.2e} < {10.0 / n:.1e} on "
         f"[1, 80]; fold crossings {rep.fold_crossings} all >= 4; cluster gap "
         f"{rep.cluster_gap_min:.3f} >= 0.007")


def test_08_picard_contraction():
    k = K.gaussian_decay(1.0)
    ens = uniform_ensemble(50, lambda a: a)
    t0 = time.perf_counter()
    res = P.cross_validate(k, ens, 1.0, b=0.09, rk4_dt=1e-3, n_threads=1)
    elapsed = time.perf_counter() - t0
    ratios_ok = all(r <= 0.95 for w in res["windows"]
                    for r in w.contraction_ratios())
    ok = (ratios_ok and all(w.converged for w in res["windows"])
          and res["sup_distance"] < 1e-6 and elapsed < 60.0)
    crit(8, "contraction windows", ok,
         f"{len(res['windows'])} windows, max residual ratio "
         f"{res['max_ratio']:.3f} <= 0.95, fixed point vs rk4 sup distance "
         f"{res['sup_distance']:.2e} < 1e-6, runtime {elapsed:.1f}s < 60s")


def _kahan_rhs_oracle(kernel, ens):
    n = ens.n
    out = np.empty(n)
    for i in range(n):
        s = 0.0
        c = 0.0
        for j in range(n):
            w = kernel.evaluate(ens.t, ens.alphas[i], ens.alphas[j],
                                ens.opinions[i], ens.opinions[j])
            term = ens.masses[j] * w * (ens.opinions[j] - ens.opinions[i])
            y = term - c
            t = s + y
            c = (t - s) - y
            s = t
        out[i] = s
    return out


def test_09_oracle_equivalence():
    params = cx.CounterexampleParams()
    kernels = [
        K.constant(0.7),
        K.hegselmann_krause(0.2),
        K.bounded_confidence(K.PiecewiseProfile((0.4,), (0.15, 0.3))),
        K.bounded_influence(K.PiecewiseProfile((0.6,), (0.1, 0.25))),
        K.gaussian_decay(1.0),
        K.gaussian_decay(K.PiecewiseProfile((0.5,), (0.6, 1.4))),
        K.ring_sensing(0.05, 0.35),
        K.typed_confidence(0.2, 0.3),
        K.finite_consensus_embed(3, [[0, 1, 0.2], [1, 0, 0.5], [0.2, 0.5, 0]]),
        cx.as_kernel(params),
    ]
    rng = np.random.default_rng(99)
    mismatches = 0
    total = 0
    for kernel in kernels:
        for _ in range(100):
            n = int(rng.integers(2, 9))
            alphas = np.sort(rng.uniform(0, 1, n))
            while len(np.unique(alphas)) < n:
                alphas = np.sort(rng.uniform(0, 1, n))
            masses = rng.uniform(0.1, 1.0, n)
            ens = Ensemble(alphas, rng.uniform(0, 1, n), masses / masses.sum(),
                           float(rng.uniform(0, 5)))
            got = rhs(ens, kernel, n_threads=1)
            want = _kahan_rhs_oracle(kernel, ens)
            total += 1
            if not np.array_equal(got, want):
                mismatches += 1
    crit(9, "oracle equivalence", mismatches == 0,
         f"{total} randomized states across {len(kernels)} kernel families, "
         f"{mismatches} bitwise mismatches (backend: {backend.BACKEND})")


def test_10_asymmetric_non_convergence():
    sched = K.MatrixSchedule((0.0, 1.0), (
        ((0.0, 0.0, 0.0), (1.0, 0.0, 0.0), (0.0, 0.0, 0.0)),
        ((0.0, 0.0, 0.0), (0.0, 0.0, 1.0), (0.0, 0.0, 0.0)),
    ), period=2.0)
    k = K.finite_consensus_embed(3, sched)
    prof = K.PiecewiseProfile((1 / 3, 2 / 3), (0.0, 0.5, 1.0))
    ens = uniform_ensemble(120, prof.value)
    cfg = IntegratorConfig(method="rk4", dt=0.01, t_end=20.0, record_every=25)
    traj = integrate(ens, k, cfg, n_threads=1)
    mid = traj.opinions_matrix()[:, 60]
    reversals = int(np.sum(np.diff(np.sign(np.diff(mid))) != 0))
    final = traj.final
    times = traj.times
    w1 = np.array([D.wasserstein1(s, final) for s in traj.snapshots])
    # over every switching period in the tail, W1-to-final climbs back above
    # the threshold: the diagnostic never settles below 0.05
    window_maxima = []
    for t_start in np.arange(10.0, 18.1, 2.0):
        in_window = (times >= t_start) & (times <= t_start + 2.0)
        window_maxima.append(float(np.max(w1[in_window])))
    ok = reversals >= 5 and min(window_maxima) >= 0.05
    crit(10, "asymmetric non-convergence", ok,
         f"middle block reversed direction {reversals} times (>= 5); "
         f"W1-to-final exceeds 0.05 in every tail period "
         f"(window maxima min {min(window_maxima):.3f})")
