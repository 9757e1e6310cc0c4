"""Acceptance gate: every release-blocking criterion at its stated tolerance.

Each test prints one PASS/FAIL line (run with ``pytest -s tests/test_acceptance.py``
to watch them stream).  The Monte Carlo experiments are seeded, so these
numbers reproduce exactly on a given platform.
"""

import itertools
import json
import os
import time

import numpy as np
import pytest

import flqr
from flqr import SimDesign, Theta
from flqr.cli import main as cli_main
from flqr.monotonize import QuantilePath, combine, pava
from flqr.optimizer import gradient, objective
from flqr.simulate import run_coverage_experiment, run_mise_experiment
from flqr.sobolev import SobolevKernel, build_gram

THREADS = min(os.cpu_count() or 1, 4)

MISE_SEED = 20240501
COVERAGE_SEED = 20240506
QUANTILE_SEED = 20240507


def _verdict(num, name, ok, detail):
    line = f"ACCEPTANCE {num} ({name}): {'PASS' if ok else 'FAIL'} -- {detail}"
    print(line, flush=True)
    return ok


@pytest.fixture(scope="module")
def mise_reports():
    reports = {}
    for fam in ("normal", "t3"):
        design = SimDesign(n=200, snr=10.0, error_family=fam, seed=MISE_SEED)
        reports[fam] = run_mise_experiment(
            design,
            taus=(0.25, 0.5, 0.75),
            n_replicates=100,
            shared_lambda=True,
            threads=THREADS,
        )
    return reports


@pytest.fixture(scope="module")
def coverage_report():
    design = SimDesign(n=200, snr=10.0, error_family="normal", seed=COVERAGE_SEED)
    return run_coverage_experiment(
        design,
        taus=(0.25, 0.5, 0.75),
        t_points=(0.1, 0.5, 0.9),
        n_replicates=200,
        with_scb=True,
        scb_paths=2000,
        with_x0=True,
        threads=THREADS,
    )


@pytest.fixture(scope="module")
def quantile_report_n400():
    design = SimDesign(n=400, snr=10.0, error_family="normal", seed=QUANTILE_SEED)
    return run_coverage_experiment(
        design,
        taus=(0.5,),
        t_points=(0.5,),
        n_replicates=200,
        with_x0=True,
        threads=THREADS,
    )


def test_criterion_1_gradient_correctness():
    rng = np.random.default_rng(1)
    grid = flqr.Grid.uniform(51)
    start = time.perf_counter()
    worst = 0.0
    eps = 1e-6
    for k in range(100):
        n = int(rng.integers(5, 21))
        curves = rng.standard_normal((n, 51))
        y = rng.standard_normal(n)
        sample = flqr.FunctionalSample(grid, curves, y)
        gram = build_gram(sample, SobolevKernel(grid))
        tau = float(rng.uniform(0.1, 0.9))
        h = float(rng.uniform(0.05, 0.5))
        lam = float(10.0 ** rng.uniform(-6, -2))
        theta = Theta(
            alpha=float(rng.standard_normal()),
            d=rng.standard_normal(2),
            c=0.3 * rng.standard_normal(n),
        )
        g_a, g_d, g_c = gradient(theta, gram, y, tau, h, lam)
        analytic = np.concatenate([[g_a], g_d, g_c])
        w0 = theta.concat()
        fd = np.empty_like(w0)
        for j in range(w0.size):
            wp, wm = w0.copy(), w0.copy()
            wp[j] += eps
            wm[j] -= eps
            fd[j] = (
                objective(Theta.from_concat(wp, 2), gram, y, tau, h, lam)
                - objective(Theta.from_concat(wm, 2), gram, y, tau, h, lam)
            ) / (2 * eps)
        rel = np.linalg.norm(analytic - fd) / max(1.0, np.linalg.norm(analytic))
        worst = max(worst, rel)
    elapsed = time.perf_counter() - start
    ok = worst < 1e-6 and elapsed < 10.0
    assert _verdict(1, "gradient correctness", ok,
                    f"max rel err {worst:.2e}, {elapsed:.1f}s over 100 instances")


def test_criterion_2_smoothed_loss_bound():
    u = np.linspace(-6.0, 6.0, 24001)
    bound_ok = True
    worst = -np.inf
    for h, tau in itertools.product((0.1, 0.01), (0.25, 0.5, 0.75)):
        gap = np.max(np.abs(flqr.smoothed_loss(u, tau, h) - flqr.check_loss(u, tau)))
        limit = h / np.sqrt(2 * np.pi) + 1e-10
        worst = max(worst, gap - limit)
        bound_ok &= gap <= limit
    assert _verdict(2, "smoothed-loss bound", bound_ok,
                    f"max excess over h/sqrt(2 pi): {worst:.2e}")


def test_criterion_3_optimizer_stationarity(mise_reports):
    grad_ok, improved_ok, n_fits = True, True, 0
    for rep in mise_reports.values():
        by_key = {}
        for row in rep.rows:
            by_key.setdefault((row[0], row[2]), {})[row[3]] = row[4]
        for key, metrics in by_key.items():
            if "final_grad_norm" not in metrics:
                continue
            n_fits += 1
            if metrics.get("converged"):
                grad_ok &= metrics["final_grad_norm"] <= 1e-6
            improved_ok &= metrics["objective_improved"] == 1.0
    ok = grad_ok and improved_ok and n_fits == 600  # 2 families x 100 reps x 3 taus
    assert _verdict(3, "optimizer stationarity", ok,
                    f"{n_fits} fits, grad-at-tol: {grad_ok}, endpoint improvement: {improved_ok}")


def test_criterion_4_eigen_fidelity():
    design = SimDesign(n=200, snr=10.0, seed=77)
    worst_v, worst_j = 0.0, 0.0
    for rep in range(5):
        sample = flqr.generate(design, rep)
        res = flqr.fit(sample, 0.5, h=0.15, lam=6e-5)
        es = flqr.solve_eigensystem(sample, res.b_hat)
        worst_v = max(worst_v, es.v_residual)
        worst_j = max(worst_j, es.j_residual / (1e-6 * (1.0 + es.rho.max())))
    ok = worst_v < 1e-8 and worst_j < 1.0
    assert _verdict(4, "eigen-system fidelity", ok,
                    f"max |Phi'V Phi - I| = {worst_v:.2e}, "
                    f"off-diag J residual at {worst_j:.3f} of tolerance")


def test_criterion_5_mise_reproduction(mise_reports):
    ref = mise_reports["normal"].mean_of("rkhs", 0.5, "mise")
    in_band = 0.10e-2 <= ref <= 0.60e-2
    ordinal = True
    detail = [f"rkhs normal tau=0.5: {100 * ref:.3f}e-2 in [0.10, 0.60]e-2: {in_band}"]
    for fam, tau in itertools.product(("normal", "t3"), (0.25, 0.5, 0.75)):
        r = mise_reports[fam].mean_of("rkhs", tau, "mise")
        f = mise_reports[fam].mean_of("fpca", tau, "mise")
        ordinal &= r < f
        detail.append(f"{fam}@{tau}: rkhs {100 * r:.3f} < fpca {100 * f:.3f}: {r < f}")
    runtime = sum(rep.runtime_seconds for rep in mise_reports.values())
    within_budget = runtime < 1800.0
    ok = in_band and ordinal and within_budget
    assert _verdict(5, "table-1 reproduction", ok,
                    "; ".join(detail) + f"; runtime {runtime:.0f}s < 1800s: {within_budget}")


def test_criterion_6_pointwise_coverage(mise_reports, coverage_report):
    del mise_reports  # ordering only: reuse the warm pool
    values = {}
    for rec in coverage_report.summary():
        if rec["metric"].startswith("cover_beta_t"):
            values[(rec["tau"], rec["metric"])] = rec["mean"]
    ok = len(values) == 9 and all(0.88 <= v <= 0.99 for v in values.values())
    lo, hi = min(values.values()), max(values.values())
    assert _verdict(6, "table-2 pointwise coverage", ok,
                    f"9 points in [{lo:.3f}, {hi:.3f}] against [0.88, 0.99]")


def test_criterion_7_quantile_coverage(coverage_report, quantile_report_n400):
    c200 = coverage_report.mean_of("rkhs", 0.5, "cover_quantile")
    c400 = quantile_report_n400.mean_of("rkhs", 0.5, "cover_quantile")
    ok = 0.88 <= c200 <= 0.99 and 0.88 <= c400 <= 0.99
    assert _verdict(7, "table-3 quantile coverage", ok,
                    f"n=200: {c200:.3f}, n=400: {c400:.3f} against [0.88, 0.99]")


def test_criterion_8_monotonization_superiority():
    rng = np.random.default_rng(8)
    all_superior = True
    idempotent = True
    mean_preserving = True
    for _ in range(1000):
        k = int(rng.integers(3, 21))
        truth = np.sort(rng.standard_normal(k))
        raw = truth + rng.uniform(0.1, 1.0) * rng.standard_normal(k)
        path = QuantilePath(np.linspace(0.1, 0.9, k), raw)
        comb = combine(path, 0.5)
        for q in (1, 2):
            d_new = np.sum(np.abs(comb.values - truth) ** q)
            d_raw = np.sum(np.abs(raw - truth) ** q)
            all_superior &= d_new <= d_raw + 1e-12
        iso = pava(path)
        idempotent &= np.allclose(pava(iso).values, iso.values, atol=1e-14)
        mean_preserving &= abs(iso.values.mean() - raw.mean()) < 1e-12
    ok = all_superior and idempotent and mean_preserving
    assert _verdict(8, "monotonization superiority", ok,
                    f"superior: {all_superior}, idempotent: {idempotent}, "
                    f"mean-preserving: {mean_preserving} over 1000 paths")


def test_criterion_9_scb_coverage(coverage_report):
    rates = {
        rec["tau"]: rec["mean"]
        for rec in coverage_report.summary()
        if rec["metric"] == "scb_cover"
    }
    ok = all(rate >= 0.90 for rate in rates.values())
    assert _verdict(9, "simultaneous band coverage", ok,
                    ", ".join(f"tau={t:g}: {r:.3f}" for t, r in sorted(rates.items()))
                    + " against >= 0.90")


def test_criterion_10_cli_determinism(tmp_path):
    data = tmp_path
    design = SimDesign(n=40, snr=10.0, seed=5)
    sample = flqr.generate(design)
    flqr.save_sample(sample, data / "x.csv", data / "y.csv")

    pairs = []
    for run in (1, 2):
        fit_out = data / f"fit{run}.json"
        code = cli_main([
            "fit", "--curves", str(data / "x.csv"), "--y", str(data / "y.csv"),
            "--tau", "0.5", "--seed", "7", "--out", str(fit_out),
        ])
        assert code == 0
        sim_out = data / f"sim{run}.csv"
        code = cli_main([
            "simulate", "--mode", "mise", "--n", "30", "--reps", "2", "--taus", "0.5",
            "--seed", "11", "--threads", "1", "--shared-lambda", "--out", str(sim_out),
        ])
        assert code == 0
        scb_out = data / f"scb{run}.csv"
        code = cli_main([
            "scb", "--fit", str(fit_out), "--curves", str(data / "x.csv"),
            "--paths", "2000", "--seed", "3", "--out", str(scb_out),
        ])
        assert code == 0
        pairs.append((fit_out.read_bytes(), sim_out.read_bytes(),
                      (data / f"sim{run}.summary.json").read_bytes(), scb_out.read_bytes()))
    ok = pairs[0] == pairs[1]
    assert _verdict(10, "CLI determinism", ok,
                    "fit/simulate/scb artifacts byte-identical across reruns")
