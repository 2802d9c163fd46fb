"""Exit criteria for the package, one test per criterion.

Each test records a ``criterion N: PASS|FAIL|WARN ...`` line that is
printed in the pytest terminal summary.
"""
import json
import math
import time
import warnings

import numpy as np
import pytest

from helpers import (
    brute_cvm_integral,
    brute_energy,
    brute_ks,
    brute_median_distance,
    brute_mmd,
    exhaustive_matched_k,
    heteroscedastic_mixture,
    random_kde_instance,
    record,
    two_blob_mixture,
)
from lookde.cli import main
from lookde.data import save_csv
from lookde.density import KernelDensityModel, loo_gradient, loo_mll, loo_upper_bound, override_bandwidth
from lookde.gmm import GmmFailure, fit_gmm, matched_component_count
from lookde.pipeline import PipelineConfig, compare_models
from lookde.stats import ENERGY, cvm_two_sample, energy_statistic, ks_two_sample, mmd_statistic
from lookde.trainer import AdamConfig, EmConfig, FitError, FitStatus, fit_adam, fit_em

TWO = np.array([[0.0], [1.0]])


def check(number, ok, detail):
    record(number, "PASS" if ok else "FAIL", detail)
    assert ok, detail


def test_criterion_01_gradient_oracle():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    h = 1e-5
    worst = 0.0
    for _ in range(25):
        x, s, w = random_kde_instance(rng, 20, 3, weighted=True)
        m = KernelDensityModel.pi_kde(x, s, w)
        g = loo_gradient(m)
        fd = np.array([
            (loo_mll(override_bandwidth(m, j, s[j] + h)).value
             - loo_mll(override_bandwidth(m, j, s[j] - h)).value) / (2 * h)
            for j in range(20)
        ])
        worst = max(worst, float(np.max(np.abs(g - fd) / np.maximum(np.abs(fd), 1e-3))))
    dt = time.perf_counter() - t0
    check(1, worst < 1e-5 and dt < 10, f"max relative error {worst:.2e}, {dt:.2f} s")


def test_criterion_02_loo_bound_never_exceeded():
    rng = np.random.default_rng(7)
    violations = 0
    for _ in range(100):
        n, d = int(rng.integers(2, 51)), int(rng.integers(1, 6))
        x = rng.normal(size=(n, d))
        s = np.exp(rng.uniform(-6, 2, n))
        m = KernelDensityModel.pi_kde(x, s, rng.dirichlet(np.ones(n)))
        b = loo_upper_bound(x)
        violations += loo_mll(m).value > b
        violations += loo_mll(m, weighted=False).value > b
    fits = [
        (TWO, EmConfig()),
        (TWO, EmConfig(fit_weights=True)),
        (two_blob_mixture(), EmConfig()),
        (two_blob_mixture(), EmConfig(fit_weights=True)),
        (np.random.default_rng(0).standard_normal((200, 2)), EmConfig(fit_weights=True)),
        (heteroscedastic_mixture(0, 300), EmConfig(fit_weights=True)),
    ]
    iterations = 0
    for x, cfg in fits:
        # fit_em also refuses to continue past a bound violation
        _, trace = fit_em(x, cfg)
        b = loo_upper_bound(x)
        violations += int(np.sum(trace.objective > b))
        iterations += len(trace.records)
    check(2, violations == 0, f"{violations} violations over 100 random models and {iterations} EM iterates")


def test_criterion_03_collapse_demo(tmp_path):
    x = np.sort(np.random.default_rng(0).uniform(-2, 2, 50))
    src = tmp_path / "points.csv"
    save_csv(src, x[:, None], ["x"])
    out = tmp_path / "collapse.csv"
    sigmas = [10.0 ** -k for k in range(1, 9)]
    t0 = time.perf_counter()
    code = main(["collapse-demo", "--input", str(src), "--j", "3", "--no-normalize",
                 "--sigmas", ",".join(repr(s) for s in sigmas), "--out", str(out)])
    dt = time.perf_counter() - t0
    rows = np.loadtxt(out, delimiter=",", skiprows=1)
    gaps = np.diff(rows[:, 1])
    rel = abs(gaps[-1] - math.log(10)) / math.log(10)
    below = bool(np.all(rows[:, 2] <= rows[:, 3]))
    ok = code == 0 and len(rows) == 8 and rel < 1e-2 and below and dt < 5
    check(3, ok, f"last-decade increase {gaps[-1]:.6f} vs log 10 (rel {rel:.1e}), loo below bound: {below}, {dt:.2f} s")


def test_criterion_04_em_monotone_and_converges():
    x = two_blob_mixture(seed=0, n=200)
    t0 = time.perf_counter()
    model, trace = fit_em(x, EmConfig(convergence_threshold=1e-4))
    dt = time.perf_counter() - t0
    v = trace.objective
    monotone = bool(np.all(np.diff(v) >= -1e-9 * np.abs(v[:-1])))
    ok = trace.status is FitStatus.CONVERGED and monotone and model.bandwidths.min() > 1e-6 and dt < 60
    check(4, ok, f"{trace.status.value} in {trace.n_iterations} iterations, monotone: {monotone}, "
                 f"min sigma {model.bandwidths.min():.3g}, {dt:.2f} s")


def test_criterion_05_two_point_fixed_point():
    a, ta = fit_em(TWO, EmConfig())
    p, tp = fit_em(TWO, EmConfig(fit_weights=True))
    sig_ok = all(np.max(np.abs(m.bandwidths - 1.0)) < 1e-10 for m in (a, p))
    w_ok = np.max(np.abs(p.weights - 0.5)) < 1e-10
    it_ok = ta.n_iterations <= 2 and tp.n_iterations <= 2
    # N=2 tightness is a property of the unweighted kernel sum
    value = loo_mll(a, weighted=False).value
    bound = loo_upper_bound(TWO)
    ok = sig_ok and w_ok and it_ok and abs(value + 2.837877) < 1e-6 and abs(value - bound) < 1e-6
    check(5, ok, f"sigma {a.bandwidths.tolist()}, pi {p.weights.tolist()}, "
                 f"{max(ta.n_iterations, tp.n_iterations)} iterations, loo {value:.9f}, bound {bound:.9f}")


def test_criterion_06_em_adam_agreement():
    x = two_blob_mixture(seed=0, n=200)
    n = x.shape[0]
    em, tem = fit_em(x, EmConfig())
    adam, tad = fit_adam(x, AdamConfig(learning_rate=0.05, batch_size=128))
    gap = abs(tem.objective[-1] - tad.objective[-1])
    corr = float(np.corrcoef(em.bandwidths, adam.bandwidths)[0, 1])
    check(6, gap <= 1e-2 * n and corr > 0.9,
          f"objective gap {gap:.3f} nats (limit {1e-2 * n:.1f}), bandwidth correlation {corr:.3f}")


def test_criterion_07_statistic_oracles():
    rng = np.random.default_rng(77)
    worst = 0.0
    zero = 0.0
    for _ in range(20):
        n, m, d = int(rng.integers(2, 31)), int(rng.integers(2, 31)), int(rng.integers(1, 4))
        x, y = rng.normal(size=(n, d)), rng.normal(0.3, 1.2, size=(m, d))
        h = brute_median_distance(np.vstack([x, y]))
        a, b = x[:, 0], y[:, 0]
        worst = max(worst,
                    abs(mmd_statistic(x, y) - brute_mmd(x, y, h)),
                    abs(energy_statistic(x, y) - brute_energy(x, y)),
                    abs(ks_two_sample(a, b) - brute_ks(a, b)),
                    abs(cvm_two_sample(a, b) - brute_cvm_integral(a, b)))
        zero = max(zero, abs(mmd_statistic(x, x)), abs(energy_statistic(x, x)),
                   abs(ks_two_sample(a, a)), abs(cvm_two_sample(a, a)))
    check(7, worst < 1e-10 and zero <= 1e-12, f"max oracle error {worst:.1e}, max identical-input value {zero:.1e}")


def test_criterion_08_singularity_contrast():
    t0 = time.perf_counter()
    singular = em_failures = 0
    for seed in range(20):
        x = np.random.default_rng(seed).normal(size=(50, 2))
        singular += fit_gmm(x, 50, seed=seed).failure is GmmFailure.COVARIANCE_SINGULAR
        try:
            fit_em(x, EmConfig())
        except FitError:
            em_failures += 1
    dt = time.perf_counter() - t0
    check(8, singular >= 1 and em_failures == 0 and dt < 120,
          f"GMM K=N singular {singular}/20, EM failures {em_failures}/20, {dt:.2f} s")


def test_criterion_09_pipeline_determinism(tmp_path):
    rng = np.random.default_rng(9)
    x = np.vstack([rng.normal(0, 1, (313, 2)), rng.normal(3, 0.5, (312, 2))])
    save_csv(tmp_path / "all.csv", x, ["a", "b"])
    assert main(["split", "--input", str(tmp_path / "all.csv"), "--out", str(tmp_path / "split")]) == 0
    train, test = str(tmp_path / "split" / "train.csv"), str(tmp_path / "split" / "test.csv")
    kde, gmm = str(tmp_path / "akde.json"), str(tmp_path / "gmm.json")
    assert main(["fit", "--input", train, "--out", kde]) == 0
    assert main(["fit", "--input", train, "--model-kind", "gmm", "--k", "3", "--out", gmm]) == 0

    t0 = time.perf_counter()
    outs = []
    for run in ("run1", "run2"):
        out = tmp_path / run
        assert main(["compare", "--input", train, "--test", test, kde, gmm, "--n-mc", "200",
                     "--ratio", "0.5", "--seed", "1", "--out", str(out)]) == 0
        outs.append(out)
    dt = time.perf_counter() - t0
    rep = json.loads((outs[0] / "report.json").read_text())
    n_scores = sum(len(v) for by_t in rep["comparison"].values() for v in by_t.values())
    same = all((outs[0] / f).read_bytes() == (outs[1] / f).read_bytes()
               for f in ("report.json", "comparison.csv", "ecdf.csv"))
    sizes = (rep["config"]["subsample_size"], len(rep["baseline"]["MMD"]))
    check(9, n_scores == 12 and same and sizes == (62, 200) and dt < 120,
          f"{n_scores} comparison scores, byte-identical: {same}, two runs {dt:.1f} s")


def test_criterion_10_pi_kde_not_worse_soft():
    wins = 0
    deltas = []
    for seed in range(10):
        x = heteroscedastic_mixture(seed, 1000, d=4)
        mu, sd = x[:800].mean(0), x[:800].std(0, ddof=1)
        z = (x - mu) / sd
        train, test = z[:800], z[800:]
        a, _ = fit_em(train, EmConfig())
        p, _ = fit_em(train, EmConfig(fit_weights=True))
        rep = compare_models({"a-kde": a, "pi-kde": p}, train, test,
                             PipelineConfig(master_seed=seed), sample_tests=[ENERGY])
        da = rep.comparison["a-kde"]["Energy"]["DeltaMean"]
        dp = rep.comparison["pi-kde"]["Energy"]["DeltaMean"]
        deltas.append((da, dp))
        wins += dp <= da
    status = "PASS" if wins >= 7 else "WARN"
    record(10, status, f"pi-kde energy DeltaMean <= a-kde in {wins}/10 repetitions (soft, needs 7)")
    if wins < 7:
        warnings.warn(f"soft check: pi-kde better in only {wins}/10 repetitions")


def test_criterion_11_parameter_matching():
    t0 = time.perf_counter()
    mismatches = 0
    cases = 0
    for n in range(50, 2001, 150):
        for d in range(1, 21):
            for target in ("a", "pi"):
                cases += 1
                mismatches += matched_component_count(n, d, target) != exhaustive_matched_k(n, d, target)
    fast_t0 = time.perf_counter()
    for n in range(50, 2001, 150):
        for d in range(1, 21):
            matched_component_count(n, d, "a")
            matched_component_count(n, d, "pi")
    dt = time.perf_counter() - fast_t0
    check(11, mismatches == 0 and dt < 1, f"{mismatches} mismatches over {cases} cases, {dt * 1e3:.2f} ms")
    assert time.perf_counter() - t0 < 60
