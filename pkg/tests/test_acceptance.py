"""End-to-end acceptance checks.

Each test records one PASS/FAIL line (also printed at the end of the run)
and asserts both the numerical criterion and its runtime budget.
"""
import time

import numpy as np
import pytest
from scipy.optimize import minimize

from ppcokrig import (CorrelationParams, FidelityData, McemConfig, SynthConfig, chol_factor,
                      corr_matrix, crps_empirical, fast_profile_terms, gen_from_model,
                      level_log_integrated_posterior, nsme, one_step_predict, predict,
                      predict_many, rmspe, run_mcem, toy_high, toy_levels)
from ppcokrig.cli import main
from ppcokrig.metrics import coverage95
from ppcokrig.priors import PolynomialBasis
from ppcokrig.synth import toy_test_inputs

from oracles import joint_gaussian, naive_profile_terms

RESULTS = []


def record(number, name, ok, detail, elapsed, budget):
    ok = bool(ok) and elapsed < budget
    line = (f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {name} | {detail} | "
            f"{elapsed:.1f}s (budget {budget:.0f}s)")
    RESULTS.append(line)
    print(line)
    return ok


def _means(summaries):
    return np.array([s.mean for s in summaries])


LOW20 = np.round(np.arange(20) * 0.1 - 1.0, 12)


@pytest.mark.parametrize("layout", ["grid21", "grid20"])
def test_1_toy_beats_single_level_kriging(layout):
    start = time.perf_counter()
    levels = toy_levels(None if layout == "grid21" else LOW20)
    xt = toy_test_inputs(200)
    yt = toy_high(xt)
    em = run_mcem(levels, McemConfig(seed=1))
    summ = predict_many(em, xt, 30, seed=2)
    krig = run_mcem([FidelityData(1, levels[1].X, levels[1].Y)], McemConfig(seed=1))
    m_co = _means(summ)[:, 0]
    m_kr = _means(predict_many(krig, xt, 30, seed=2))[:, 0]
    ratio = rmspe(m_co, yt) / rmspe(m_kr, yt)
    cvg = coverage95(np.array([s.lower[0] for s in summ]), np.array([s.upper[0] for s in summ]), yt)
    elapsed = time.perf_counter() - start
    ok = record(1, f"toy superiority ({layout}, {em.aug.n_mis[0]} non-nested)",
                ratio <= 0.5 and cvg >= 0.85,
                f"RMSPE ratio {ratio:.4f} <= 0.5, CVG95 {cvg:.3f} >= 0.85", elapsed, 60)
    assert ok


def test_2_fast_profile_terms_equivalence():
    start = time.perf_counter()
    rng = np.random.default_rng(2)
    worst = 0.0
    for i in range(50):
        n = (5, 10, 20)[i % 3]
        p = (1, 2)[(i // 3) % 2]
        N = (1, 3, 7)[(i // 6) % 3]
        X = rng.random((n, 2))
        R = corr_matrix(X, X, CorrelationParams(rng.uniform(0.2, 1.0, 2)))
        H = np.column_stack([np.ones(n)] + [rng.standard_normal(n) for _ in range(p - 1)])
        Y, W = rng.standard_normal((n, N)), rng.standard_normal((n, N))
        fac = chol_factor(R, 0.0)
        ld, s2 = fast_profile_terms(fac, H, W, Y)
        ld_ref, s2_ref = naive_profile_terms(R, H, W, Y)
        rel = lambda a, b: np.max(np.abs(a - b) / np.maximum(np.abs(b), 1e-300))
        worst = max(worst, rel(ld, ld_ref), rel(s2, s2_ref))
    elapsed = time.perf_counter() - start
    assert record(2, "shared-setup GLS equals per-coordinate GLS", worst <= 1e-8,
                  f"max relative difference {worst:.2e} <= 1e-8 over 50 instances", elapsed, 10)


def test_3_one_step_matches_joint_gaussian():
    start = time.perf_counter()
    rng = np.random.default_rng(3)
    X1 = rng.random((8, 2))
    X = [X1, X1[:4]]
    Y = [rng.standard_normal((8, 2)), rng.standard_normal((4, 2))]
    params = [CorrelationParams([0.5, 0.8]), CorrelationParams([0.7, 0.4])]
    beta = [rng.standard_normal((2, 1)), rng.standard_normal((2, 1))]
    gamma = np.array([[0.9, 1.4]])
    sigma2 = np.array([[1.3, 0.8], [0.4, 0.6]])
    basis = PolynomialBasis()
    worst = 0.0
    for x0 in rng.random((20, 2)):
        m, v = one_step_predict(X, Y, beta, gamma, sigma2, params, x0, basis)
        mr, vr = joint_gaussian(X, Y, beta, gamma, sigma2, params, x0, basis)
        worst = max(worst, np.max(np.abs(m - mr) / np.maximum(np.abs(mr), 1.0)),
                    np.max(np.abs(v - vr) / np.maximum(np.abs(vr), 1.0)))
    elapsed = time.perf_counter() - start
    assert record(3, "one-step predictor equals joint-Gaussian conditioning", worst <= 1e-8,
                  f"max difference {worst:.2e} <= 1e-8 at 20 points", elapsed, 5)


def test_4_sequential_matches_one_step():
    start = time.perf_counter()
    low = np.sort(np.append(np.round(np.linspace(-1, 1, 21), 12), -0.55))
    levels = toy_levels(low)
    em = run_mcem(levels, McemConfig(seed=4))
    assert em.aug.is_nested
    p = em.basis.size(1)
    beta = [em.b_hat[0][:, :p], em.b_hat[1][:, :p]]
    gamma = em.b_hat[1][:, p][None, :]
    sigma2 = np.vstack(em.sigma2)
    xt = toy_test_inputs(200)
    seq = _means(predict_many(em, xt, 2000, seed=4))[:, 0]
    params = [em.params(t) for t in range(2)]
    one = np.array([one_step_predict(em.aug.X_aug, em.Y_obs, beta, gamma, sigma2, params,
                                     em.aug.scaler.transform(np.array([[x]]))[0], em.basis)[0][0]
                    for x in xt])
    span = np.ptp(np.concatenate([lv.Y.ravel() for lv in levels]))
    worst = np.max(np.abs(seq - one))
    elapsed = time.perf_counter() - start
    assert record(4, "sequential mean vs one-step mean (nested toy)", worst <= 0.05 * span,
                  f"max |diff| {worst:.4f} <= {0.05 * span:.4f}", elapsed, 60)


@pytest.mark.slow
def test_5_mcem_recovers_range_parameters():
    start = time.perf_counter()
    phis_true = [np.array([0.3, 0.5]), np.array([0.4, 0.25])]
    hits, errs = 0, []
    for seed in range(10):
        cfg = SynthConfig(n=[60, 25], d=2, N=40, phis=phis_true, beta=[1.0, 0.5], gamma=[0.8],
                          sigma2=[1.0, 0.2], nested_fraction=0.8, seed=seed)
        levels, _ = gen_from_model(cfg)
        em = run_mcem(levels, McemConfig(seed=seed))
        # truth in normalized input units
        span = em.aug.scaler.span
        err = max(np.max(np.abs(np.log(em.phis[t]) - np.log(phis_true[t] / span)))
                  for t in range(2))
        errs.append(err)
        hits += err <= 0.7
    elapsed = time.perf_counter() - start
    assert record(5, "MCEM range-parameter recovery", hits >= 8,
                  f"{hits}/10 seeds within 0.7 (max errors {np.round(errs, 3).tolist()})",
                  elapsed, 900)


def test_6_nested_design_matches_direct_maximization():
    start = time.perf_counter()
    levels, _ = gen_from_model(SynthConfig(n=[30, 12], d=2, N=5, phis=[[0.3, 0.6], [0.5, 0.3]],
                                           gamma=[0.7], sigma2=[1.0, 0.3], nested_fraction=1.0,
                                           seed=6))
    a = run_mcem(levels, McemConfig(seed=6))
    b = run_mcem(levels, McemConfig(seed=7, m_start=3, m_increment=1, m_max=5))
    X = a.aug.X_aug
    worst = 0.0
    for t in range(2):
        W = None if t == 0 else levels[0].Y[a.aug.index_maps[1]]

        def neg(logphi):
            try:
                return -level_log_integrated_posterior(CorrelationParams(np.exp(logphi)), X[t],
                                                       levels[t].Y, W)
            except ArithmeticError:
                return np.inf

        best = None
        for start_phi in (0.1, 0.5, 2.5):
            res = minimize(neg, np.full(2, np.log(start_phi)), method="Nelder-Mead",
                           options=dict(xatol=1e-11, fatol=1e-13, maxfev=5000))
            if best is None or res.fun < best.fun:
                best = res
        worst = max(worst, np.max(np.abs(np.log(a.phis[t]) - best.x)),
                    np.max(np.abs(np.log(a.phis[t]) - np.log(b.phis[t]))))
    elapsed = time.perf_counter() - start
    assert record(6, "nested design: MCEM equals direct maximization", worst <= 1e-6,
                  f"max |log diff| {worst:.2e} <= 1e-6 (two M schedules)", elapsed, 60)


def test_7_predict_linear_in_N():
    start = time.perf_counter()
    times = {}
    for N in (1000, 2000):
        levels, _ = gen_from_model(SynthConfig(n=[30, 12], d=2, N=N, phis=[[0.3, 0.5]] * 2,
                                               nested_fraction=0.75, seed=7))
        em = run_mcem(levels, McemConfig(seed=7, max_iter=1, m_start=10, restarts=1, maxfev=40))
        runs = []
        for _ in range(5):
            em._cache.clear()
            t0 = time.perf_counter()
            predict(em, [0.37, 0.61], 30, seed=1)
            runs.append(time.perf_counter() - t0)
        times[N] = float(np.median(runs))
    ratio = times[2000] / times[1000]
    elapsed = time.perf_counter() - start
    assert record(7, "predict wall time linear in N", ratio <= 2.5,
                  f"median time ratio N=2000/N=1000 {ratio:.2f} <= 2.5", elapsed, 120)


def test_8_interpolation_and_metric_identities(toy_em):
    start = time.perf_counter()
    top = toy_em.levels[-1]
    sd_max, err_max = 0.0, 0.0
    for x, y in zip(top.X, top.Y):
        s = predict(toy_em, x, 30, seed=8)
        sd_max = max(sd_max, float(np.max(s.sd)))
        err_max = max(err_max, float(np.max(np.abs(s.mean - y))))
    y = np.array([[1.0, 2.0], [4.0, -1.0]])
    ids = (crps_empirical([0.0, 2.0], 1.0) == 0.5 and nsme(y, y, y.mean(axis=0)) == 1.0
           and rmspe(y, y) == 0.0)
    elapsed = time.perf_counter() - start
    assert record(8, "interpolation and metric identities",
                  sd_max <= 1e-5 and err_max <= 1e-5 and ids,
                  f"max sd {sd_max:.1e}, max |mean-obs| {err_max:.1e}, identities {ids}",
                  elapsed, 30)


def test_9_cli_byte_identical(tmp_path):
    start = time.perf_counter()
    d = tmp_path / "data"
    main(["gen-synth", "--out", str(d), "--n", "20,8", "--d", "2", "--N", "6",
          "--phi", "0.3,0.5;0.4,0.3", "--nested-fraction", "0.75", "--n-test", "10",
          "--seed", "9"])
    files = {}
    for run, threads in enumerate(("1", "4")):
        out = tmp_path / f"run{run}"
        code = main(["train", "--level", str(d / "level1_design.csv"), str(d / "level1_output.csv"),
                     "--level", str(d / "level2_design.csv"), str(d / "level2_output.csv"),
                     "--seed", "9", "--out", str(out), "--threads", threads])
        assert code in (0, 4)
        main(["predict", "--model", str(out / "model.json"), "--design",
              str(d / "test_design.csv"), "--seed", "9", "--out", str(out / "pred.csv"),
              "--draws-out", str(out / "draws.csv"), "--threads", threads])
        files[run] = {n: (out / n).read_bytes()
                      for n in ("model.json", "trace.csv", "pred.csv", "draws.csv")}
    same = all(files[0][n] == files[1][n] for n in files[0])
    elapsed = time.perf_counter() - start
    assert record(9, "byte-identical train/predict outputs (--threads 1 vs 4)", same,
                  f"{len(files[0])} files identical: {same}", elapsed, 120)
