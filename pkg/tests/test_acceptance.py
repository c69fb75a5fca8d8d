"""Acceptance battery: one test per criterion, each printing a PASS/FAIL line."""

import subprocess
import sys
import time

import numpy as np
import pytest

from fwelnet.core import fwelnet_fit, penalty_terms, penalty_weights, theta_gradient
from fwelnet.data import Dataset, standardize
from fwelnet.groups import (
    GroupStructure,
    optimal_group_weights,
    penalty_equivalence_check,
    random_feasible_weights,
)
from fwelnet.simulate import SimConfig, fig1_weights, generate, group_means, run_experiment
from fwelnet.solver import fit_elnet, kkt_violation

from oracles import prox_gradient


def report(capsys, number, ok, detail):
    with capsys.disabled():
        print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {number}: {detail}", flush=True)


def _median(summary, method, key="test_mse"):
    return summary["methods"][method][key]["median"]


def test_criterion_01_solver_correctness(capsys):
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    worst_kkt = 0.0
    worst_raw = 0.0
    worst_rel = 0.0
    n_oracle = 0
    for i in range(100):
        n = int(rng.integers(10, 101))
        p = int(rng.integers(1, 11)) if i % 2 == 0 else int(rng.integers(1, 51))
        alpha = [0.0, 0.5, 1.0][i % 3]
        x = rng.standard_normal((n, p)) * rng.uniform(0.5, 3, p) + rng.normal(size=p)
        beta = rng.standard_normal(p) * (rng.random(p) < 0.4)
        y = x @ beta + rng.standard_normal(n)
        w = rng.uniform(0, 3, p) * (rng.random(p) < 0.9)
        if not np.any(w > 0):
            w[0] = 1.0
        d = Dataset(x, y)
        fit = fit_elnet(d, w, alpha, n_lambda=30)
        std, _ = standardize(d)
        viol = kkt_violation(fit, std)
        worst_kkt = max(worst_kkt, float(viol.max()))
        # kkt_violation reports per-observation residuals; n times that is the raw gradient residual
        worst_raw = max(worst_raw, float(viol.max()) * n)
        assert np.all(fit.converged)
        if p <= 10:
            for k in range(fit.lambdas.size):
                _, _, ref = prox_gradient("gaussian", std.x, std.y, w, fit.lambdas[k], alpha)
                worst_rel = max(worst_rel, abs(fit.objective[k] - ref) / abs(ref))
                n_oracle += 1
    elapsed = time.perf_counter() - t0
    ok = worst_kkt <= 1e-5 and worst_raw <= 1e-5 and worst_rel <= 1e-8 and elapsed < 60
    report(capsys, 1, ok, f"max KKT {worst_kkt:.2e} per observation, {worst_raw:.2e} raw (<= 1e-5); "
                          f"max objective gap to oracle {worst_rel:.2e} relative over {n_oracle} points "
                          f"(<= 1e-8); {elapsed:.1f}s (< 60s)")
    assert ok


def test_criterion_02_reduction_identity(capsys):
    rng = np.random.default_rng(7)
    mismatches = 0
    for i in range(20):
        n, p = int(rng.integers(20, 90)), int(rng.integers(2, 40))
        x = rng.standard_normal((n, p))
        y = x[:, 0] - 2 * x[:, min(1, p - 1)] + rng.standard_normal(n)
        d = Dataset(x, y)
        alpha = float(rng.choice([0.0, 0.3, 1.0]))
        z = np.full((p, 1), float(rng.normal()))
        ref = fit_elnet(d, alpha=alpha, n_lambda=40)
        model = fwelnet_fit(d, z, alpha=alpha, n_iter=int(rng.integers(1, 6)), n_lambda=40)
        same = (np.array_equal(model.fit.betas, ref.betas)
                and np.array_equal(model.fit.intercepts, ref.intercepts)
                and np.array_equal(model.lambdas, ref.lambdas))
        mismatches += not same
    ok = mismatches == 0
    report(capsys, 2, ok, f"{20 - mismatches}/20 constant-Z fits bit-identical to the elastic net")
    assert ok


def test_criterion_03_gradient_check(capsys):
    rng = np.random.default_rng(3)
    worst = 0.0
    h = 1e-6
    for _ in range(200):
        p, k = int(rng.integers(2, 40)), int(rng.integers(1, 6))
        z = rng.standard_normal((p, k))
        theta = rng.standard_normal(k)
        beta = rng.standard_normal(p) * (rng.random(p) < 0.6)
        if not beta.any():
            beta[0] = 1.0
        lam = float(rng.uniform(0.01, 20))
        alpha = float(rng.uniform(0, 1))

        def pen(t):
            return lam * float(penalty_weights(z, t) @ penalty_terms(beta, alpha))

        g = theta_gradient(z, theta, beta, lam, alpha)
        fd = np.array([(pen(theta + h * e) - pen(theta - h * e)) / (2 * h) for e in np.eye(k)])
        worst = max(worst, float(np.linalg.norm(g - fd) / np.linalg.norm(g)))
    ok = worst <= 1e-5
    report(capsys, 3, ok, f"max relative gradient error {worst:.2e} over 200 draws (<= 1e-5)")
    assert ok


def test_criterion_04_descent_contract(capsys):
    bad = 0
    accepted = 0
    for mode in ("mean", "median"):
        for run in range(50):
            sim = generate(SimConfig("setting1", n_test=10), run)
            model = fwelnet_fit(sim.train, sim.z, n_iter=3, mode=mode)
            accepted += model.iterations_run
            h = model.history
            if h.size != model.iterations_run + 1 or not np.all(np.diff(h) < 0):
                bad += 1
    ok = bad == 0
    report(capsys, 4, ok, f"history strictly decreasing in {100 - bad}/100 fits "
                          f"(50 runs x mean/median, {accepted} accepted iterations)")
    assert ok


def test_criterion_05_penalty_certificate(capsys):
    rng = np.random.default_rng(5)
    worst_opt = 0.0
    worst_feasible = np.inf
    for alpha in (0.0, 0.5, 1.0):
        for _ in range(10):
            sizes = rng.integers(1, 8, size=int(rng.integers(1, 8)))
            g = GroupStructure.contiguous(sizes)
            beta = rng.standard_normal(g.p) * (rng.random(g.p) < 0.7)
            lam = float(rng.uniform(0.1, 3))
            worst_opt = max(worst_opt, abs(penalty_equivalence_check(beta, g, alpha, lam)[2]))
            for _ in range(1000):
                v = random_feasible_weights(g, rng)
                worst_feasible = min(worst_feasible, penalty_equivalence_check(beta, g, alpha, lam, v)[2])
            assert float(g.sizes @ optimal_group_weights(beta, g, alpha)) == pytest.approx(1.0)
    ok = worst_opt <= 1e-12 and worst_feasible >= -1e-12
    report(capsys, 5, ok, f"max |gap| at optimum {worst_opt:.1e} (<= 1e-12); min gap over 30x1000 "
                          f"feasible v {worst_feasible:.3e} (>= -1e-12)")
    assert ok


def test_criterion_06_grouped_weight_ordering(capsys):
    t0 = time.perf_counter()
    cfg = SimConfig("fig1", n_test=10)
    ordered = 0
    for run in range(30):
        m = group_means(fig1_weights(cfg, run, n_iter=1))
        ordered += bool(m[0] < m[1] < m[2:].mean())
    elapsed = time.perf_counter() - t0
    ok = ordered >= 28 and elapsed < 120
    report(capsys, 6, ok, f"group1 < group2 < null mean weight in {ordered}/30 runs (>= 28), "
                          f"{elapsed:.1f}s (< 120s)")
    assert ok


def test_criterion_07_setting1(capsys):
    t0 = time.perf_counter()
    _, s = run_experiment(SimConfig("setting1", snr_y=2.0, snr_z=10.0, n_runs=30))
    elapsed = time.perf_counter() - t0
    fw, la = _median(s, "fwelnet"), _median(s, "lasso")
    fw_fpr, la_fpr = _median(s, "fwelnet", "fpr"), _median(s, "lasso", "fpr")
    ok = s["n_failed"] == 0 and fw < la and fw_fpr <= la_fpr and elapsed < 300
    report(capsys, 7, ok, f"median test MSE fwelnet {fw:.3f} < lasso {la:.3f}; median FPR fwelnet "
                          f"{fw_fpr:.3f} <= lasso {la_fpr:.3f}; {elapsed:.1f}s (< 300s)")
    assert ok


def test_criterion_08_setting3(capsys):
    parts = []
    ok = True
    for snr in (0.5, 1.0, 2.0):
        _, s = run_experiment(SimConfig("setting3", snr_y=snr, n_runs=30))
        ratio = _median(s, "fwelnet") / _median(s, "lasso")
        ok &= s["n_failed"] == 0 and ratio <= 1.3
        parts.append(f"SNR {snr}: {ratio:.3f}")
    report(capsys, 8, ok, "fwelnet/lasso median test MSE " + ", ".join(parts) + " (each <= 1.3)")
    assert ok


def test_criterion_09_multitask(capsys):
    t0 = time.perf_counter()
    _, s = run_experiment(SimConfig("multitask", n_runs=50, include_mt_lasso=False))
    elapsed = time.perf_counter() - t0
    f1, l1 = _median(s, "fwelnet/y1"), _median(s, "ind_lasso/y1")
    f2, l2 = _median(s, "fwelnet/y2"), _median(s, "ind_lasso/y2")
    ok = s["n_failed"] == 0 and f1 < l1 and f2 <= 1.1 * l2 and elapsed < 600
    report(capsys, 9, ok, f"SNR-0.5 response: {f1:.2f} < {l1:.2f}; SNR-1.5 response: {f2:.2f} <= "
                          f"1.1 x {l2:.2f}; {elapsed:.1f}s (< 600s)")
    assert ok


def _cli(*args):
    proc = subprocess.run([sys.executable, "-m", "fwelnet", *args], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    return proc


def test_criterion_10_determinism(capsys, tmp_path):
    rng = np.random.default_rng(10)
    n, p = 80, 12
    x = rng.standard_normal((n, p))
    beta = np.r_[3.0, -2.0, 1.5, np.zeros(p - 3)]
    y = x @ beta + rng.standard_normal(n)
    yb = (x @ beta + rng.standard_normal(n) > 0).astype(float)
    y2 = x @ np.r_[2.0, 0.0, 0.0, 1.0, np.zeros(p - 4)] + rng.standard_normal(n)
    z = np.column_stack([np.abs(beta) + 0.2 * rng.standard_normal(p), np.ones(p)])
    inp = tmp_path / "in"
    inp.mkdir()
    for name, arr in {"x": x, "y": y[:, None], "yb": yb[:, None], "y2": y2[:, None], "z": z,
                      "g": np.repeat(np.arange(40), 2)[:, None]}.items():
        np.savetxt(inp / f"{name}.csv", arr, delimiter=",", fmt="%.17g")
    (inp / "theta.json").write_text("[0.75, -0.5]")
    f = {k: str(inp / f"{k}.csv") for k in ("x", "y", "yb", "y2", "z", "g")}

    commands = {
        "fit": lambda d: ["fit", "--x", f["x"], "--y", f["y"], "--z", f["z"], "--niter", "2", "--seed", "1",
                          "--out", f"{d}/fit.json"],
        "fit_binomial": lambda d: ["fit", "--x", f["x"], "--y", f["yb"], "--family", "binomial",
                                   "--z", f["z"], "--out", f"{d}/fitb.json"],
        "cv": lambda d: ["cv", "--x", f["x"], "--y", f["y"], "--z", f["z"], "--seed", "3", "--out", f"{d}/cv"],
        "cv_auc": lambda d: ["cv", "--x", f["x"], "--y", f["yb"], "--family", "binomial", "--metric", "auc",
                             "--fold-groups", f["g"], "--nfolds", "5", "--seed", "3", "--out", f"{d}/cvb"],
        "predict": lambda d: ["predict", "--model", str(inp / "model.json"), "--x", f["x"],
                              "--out", f"{d}/pred.csv"],
        "weights": lambda d: ["weights", "--z", f["z"], "--theta", str(inp / "theta.json"),
                              "--out", f"{d}/w.csv"],
        "multitask": lambda d: ["multitask", "--x", f["x"], "--y1", f["y"], "--y2", f["y2"], "--seed", "4",
                                "--out", f"{d}/mt.json"],
    }
    for alias in ("1", "2a", "2b", "3", "fig1", "mt"):
        commands[f"simulate_{alias}"] = lambda d, a=alias: ["simulate", "--setting", a, "--runs", "1",
                                                            "--seed", "7", "--out", f"{d}/sim"]
    _cli("cv", "--x", f["x"], "--y", f["y"], "--seed", "2", "--out", str(inp / "model"))
    (inp / "model.json").write_bytes((inp / "model.model.json").read_bytes())

    differing = []
    for name, make in commands.items():
        outputs = []
        for tag in ("a", "b"):
            d = tmp_path / f"{name}_{tag}"
            d.mkdir()
            _cli(*make(d))
            outputs.append({q.name: q.read_bytes() for q in sorted(d.iterdir())})
        if outputs[0] != outputs[1] or not outputs[0]:
            differing.append(name)
    ok = not differing
    report(capsys, 10, ok, f"{len(commands) - len(differing)}/{len(commands)} CLI invocations "
                           f"byte-identical on re-run" + (f" (differ: {differing})" if differing else ""))
    assert ok
