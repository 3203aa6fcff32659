"""Acceptance suite: one test per criterion, each printing a pass/fail line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the per-criterion
lines as they complete. Tolerances are fixed here, not tuned at runtime;
Monte Carlo pieces use frozen seeds so every run is deterministic.
"""

import math

import numpy as np
import pytest

import mismatch_lasso as ml
from mismatch_lasso.experiments import cell_seed

import oracles

SQRT_2_OVER_PI = math.sqrt(2.0 / math.pi)


def _criterion(num, name, ok, detail):
    print(f"[acceptance {num:02d}] {name}: {'PASS' if ok else 'FAIL'} ({detail})")
    assert ok, f"criterion {num} ({name}): {detail}"


def _solve_cells(dist, model, K, n, trials, tag, z_target, A=None, cfg=None):
    errors = []
    A_entries = np.eye(dist.dim) if A is None else A
    for trial in range(trials):
        ss = ml.build_sample_set(dist, model, n, cell_seed(tag, n, trial))
        fit = ml.solve_klasso(ss.inputs, ss.outputs, K, cfg)
        errors.append(float(np.linalg.norm(ml.pushforward_estimate(A_entries, fit) - z_target)))
    return errors


def test_criterion_01_rademacher_worstcase_exact():
    dist = ml.LatentDistribution("rademacher", 2)
    model = ml.SIM(index=[1.0, 0.5], g=ml.OutputFn("sign"))
    rho_plain = ml.mismatch_covariance_exact(model, dist, [1.0, 0.0])
    rho_biased = ml.mismatch_covariance_exact(model, dist, [1.0, 0.5])
    ok = rho_plain == 0.0 and abs(rho_biased - 0.5) <= 1e-15
    _criterion(1, "rademacher worst case", ok, f"rho(1,0)={rho_plain}, rho(1,1/2)={rho_biased}")


def test_criterion_02_gaussian_sim_scalings():
    dist = ml.LatentDistribution("gaussian", 3)
    z0 = np.array([1.0, 0.0, 0.0])
    mu_sign = ml.target_single_index(ml.SIM(index=z0, g=ml.OutputFn("sign")), dist).mu
    oracle_sign = oracles.normal_expect(lambda t: np.sign(t) * t)
    mu_abs = ml.target_single_index(ml.SIM(index=z0, g=ml.OutputFn("abs")), dist).mu
    mu_id = ml.target_single_index(ml.SIM(index=z0, g=ml.OutputFn("identity")), dist).mu
    ok = (
        abs(mu_sign - oracle_sign) <= 1e-6
        and abs(mu_sign - SQRT_2_OVER_PI) <= 1e-6
        and mu_abs == 0.0
        and abs(mu_id - 1.0) <= 1e-10
    )
    _criterion(2, "gaussian SIM scaling", ok, f"mu(sign)={mu_sign:.9f}, mu(abs)={mu_abs}, mu(id)={mu_id}")


def test_criterion_03_conic_rate():
    d = 64
    rng = np.random.default_rng(0)
    z0 = rng.standard_normal(d)
    z0 /= np.linalg.norm(z0)
    dist = ml.LatentDistribution("gaussian", d)
    model = ml.Linear(index=z0, noise_sd=0.5)
    K = ml.L2Ball(radius=2.0 * float(np.linalg.norm(z0)))
    medians = []
    grid = [128, 256, 512, 1024, 2048, 4096]
    for n in grid:
        medians.append(float(np.median(_solve_cells(dist, model, K, n, 20, 7, z0))))
    fit = ml.fit_decay_slope(list(zip(grid, medians)))
    ok = fit.defined and -0.65 <= fit.slope <= -0.35
    _criterion(3, "conic decay rate", ok, f"slope={fit.slope:.4f} in [-0.65,-0.35]")


def test_criterion_04_consistency_vs_bias():
    d = 16
    z_biased = np.zeros(d)
    z_biased[0], z_biased[1] = 1.0, 0.5
    model = ml.SIM(index=z_biased, g=ml.OutputFn("sign"))

    gauss = ml.LatentDistribution("gaussian", d)
    tv = ml.target_single_index(model, gauss)
    Kg = ml.L2Ball(radius=float(np.linalg.norm(tv.z)))
    med = {n: float(np.median(_solve_cells(gauss, model, Kg, n, 20, 11, tv.z))) for n in (256, 4096)}
    ratio = med[4096] / med[256]

    rade = ml.LatentDistribution("rademacher", d)
    rho_exact = ml.mismatch_covariance_exact(model, rade, z_biased)
    Kr = ml.L2Ball(radius=float(np.linalg.norm(z_biased)))
    plateau = float(np.median(_solve_cells(rade, model, Kr, 4096, 20, 12, z_biased)))

    ok = ratio <= 0.5 and plateau >= 0.8 * rho_exact and plateau >= 0.4
    _criterion(4, "consistency vs bias floor", ok, f"gaussian ratio={ratio:.3f}<=0.5, plateau={plateau:.3f}>=0.4")


def test_criterion_05_dithering():
    d = 16
    z0 = np.zeros(d)
    z0[0] = 1.0
    dist = ml.LatentDistribution("rademacher", d)
    kappa, lam = dist.subgaussian_constant, 1.0
    grid = [256, 1024, 4096, 16384]
    med_err, med_ratio = {}, {}
    for n in grid:
        delta = ml.dithering_scale(kappa, lam, n, 1.0)
        model = ml.DitheredOneBit(index=z0, delta=delta)
        K = ml.L2Ball(radius=lam)
        errs, ratios = [], []
        for trial in range(10):
            ss = ml.build_sample_set(dist, model, n, cell_seed(13, n, trial))
            fit = ml.solve_klasso(ss.inputs, ss.outputs, K)
            errs.append(float(np.linalg.norm(ml.pushforward_estimate(np.eye(d), fit) - z0)))
            ratios.append(ml.mismatch_covariance(ss.latent, ss.outputs, z0) * math.sqrt(n) / delta)
        med_err[n], med_ratio[n] = float(np.median(errs)), float(np.median(ratios))
    spread = max(med_ratio.values()) / min(med_ratio.values())
    halving = med_err[grid[-1]] / med_err[grid[0]]
    ok = spread <= 4.0 and halving <= 0.5
    _criterion(5, "dithering consistency", ok, f"ratio spread={spread:.2f}<=4, err(n_max)/err(n_min)={halving:.3f}<=0.5")


def test_criterion_06_variable_selection():
    d, n, trials = 64, 2048, 50
    active = (4, 19, 37, 55)
    dist = ml.LatentDistribution("rademacher", d)
    model = ml.VariableSelection(active=active, dim=d, G=ml.MultiFn("sum_of_signs"))
    tv = ml.target_multi_index(model, dist)
    rho_exact = ml.mismatch_covariance_exact(model, dist, tv.z)
    K = ml.L1Ball(radius=float(np.sum(np.abs(tv.z))))
    hits = 0
    for trial in range(trials):
        ss = ml.build_sample_set(dist, model, n, cell_seed(21, n, trial))
        fit = ml.solve_klasso(ss.inputs, ss.outputs, K)
        z_hat = ml.pushforward_estimate(np.eye(d), fit)
        hits += ml.top_k_support(z_hat, len(active)) == active
    rate = hits / trials
    ok = rate >= 0.9 and rho_exact == 0.0
    _criterion(6, "variable selection", ok, f"support recovery rate={rate:.2f}>=0.9, rho_exact={rho_exact}")


def test_criterion_07_mean_widths():
    details = []
    ok = True
    for d in (1, 4, 16, 64):
        est = ml.mean_width_global(ml.L2Ball(1.0), d, n_mc=20_000, seed=d)
        exact = oracles.ball_width_exact(d)
        ok &= abs(est.value - exact) <= 3.0 * est.stderr
        details.append(f"B2^{d} off by {abs(est.value - exact) / est.stderr:.2f} se")
    est = ml.mean_width_global(ml.L1Ball(1.0), 16, n_mc=20_000, seed=1)
    ok &= est.value <= math.sqrt(2.0 * math.log(32.0)) + 3.0 * est.stderr
    details.append(f"B1^16={est.value:.3f}<=2.633")
    for d, s in [(6, 2), (8, 3), (5, 1)]:
        lib = ml.conic_width_l1_descent(d, s).value
        mc, se = oracles.cone_projection_width(d, s, n_draws=2000, seed=17)
        ok &= lib >= mc - 3.0 * se
        details.append(f"cone({d},{s}) {lib:.3f}>={mc:.3f}-3se")
    _criterion(7, "mean widths", ok, "; ".join(details))


def test_criterion_08_projection_and_solver_oracles():
    rng = np.random.default_rng(42)
    worst = 0.0
    for _ in range(1000):
        d = int(rng.integers(1, 7))
        v = rng.standard_normal(d) * rng.uniform(0.1, 5.0)
        r = rng.uniform(0.1, 3.0)
        diff = float(np.linalg.norm(ml.project(ml.L1Ball(r), v) - oracles.l1_projection_qp(v, r)))
        worst = max(worst, diff)

    X = rng.standard_normal((200, 12))
    y = rng.standard_normal(200)
    fit = ml.solve_klasso(X, y, ml.L2Ball(1e6))
    beta_ref = np.linalg.solve(X.T @ X, X.T @ y)
    solver_err = float(np.linalg.norm(fit.beta_hat - beta_ref))
    diffs = np.diff(fit.objective_trace)
    monotone = bool(np.all(diffs <= 1e-12 * (1.0 + fit.objective_trace[:-1])))

    ok = worst <= 1e-8 and solver_err <= 1e-6 and monotone
    _criterion(8, "projection and solver oracles", ok, f"proj worst={worst:.2e}, lsq err={solver_err:.2e}, monotone={monotone}")


def test_criterion_09_mismatch_decomposition():
    setups = [
        ("gaussian", 2, 2, "sum"),
        ("rademacher", 3, 2, "sum_of_signs"),
        ("gaussian", 1, 3, "sign_of_first"),
        ("rademacher", 2, 2, "product"),
        ("gaussian", 4, 2, "sum"),
    ]
    rng = np.random.default_rng(99)
    worst = 0.0
    for i, (kind, d1, d2, gk) in enumerate(setups):
        dist = ml.LatentDistribution(kind, d1 + d2)
        model = ml.NoisySplit(d1=d1, d2=d2, G=ml.MultiFn(gk))
        z = rng.standard_normal(d1 + d2)
        ss = ml.build_sample_set(dist, model, 100_000, 1000 + i)
        rep = ml.mismatch_decomposition(model, z, latent=ss.latent, outputs=ss.outputs)
        worst = max(worst, abs(rep.residual))

    exact = ml.mismatch_decomposition(
        ml.NoisySplit(d1=1, d2=1, G=ml.MultiFn("sum")), [0.0, 0.7], dist=ml.LatentDistribution("gaussian", 2)
    )
    exact_err = abs(exact.rho_total - math.sqrt(1.0 + 0.49))
    ok = worst <= 0.05 and exact_err <= 1e-10
    _criterion(9, "mismatch decomposition", ok, f"worst residual={worst:.4f}<=0.05, exact err={exact_err:.1e}")


def test_criterion_10_adapted_estimation():
    d, p = 16, 24
    rng = np.random.default_rng(5)
    A = rng.standard_normal((p, d))
    A /= np.linalg.svd(A, compute_uv=False).max()
    z0 = rng.standard_normal(d)
    z0 /= np.linalg.norm(z0)
    dist = ml.LatentDistribution("gaussian", d)
    model = ml.Linear(index=z0, noise_sd=0.0)
    K = ml.L2Ball(radius=2.0)
    cfg = ml.SolverConfig(max_iters=20_000, rel_tol=1e-12)
    n = 10 * d
    ss = ml.build_sample_set(dist, model, n, cell_seed(31, n, 0), ml.MixingMatrix.from_array(A))

    fit = ml.solve_adapted(ss.inputs, ss.outputs, A, K, cfg)
    err_exact = float(np.linalg.norm(fit.beta_hat - ml.adapted_reference_beta(A, A, z0)))

    Q = rng.standard_normal((p, d))
    A_tilde = A + 0.05 * np.linalg.svd(A, compute_uv=False).max() / np.linalg.svd(Q, compute_uv=False).max() * Q
    fit2 = ml.solve_adapted(ss.inputs, ss.outputs, A_tilde, K, cfg)
    err_pert = float(np.linalg.norm(fit2.beta_hat - ml.adapted_reference_beta(A, A_tilde, z0)))

    ok = err_exact <= 1e-4 and err_pert <= 5.0 * max(err_exact, 1e-12)
    _criterion(10, "adapted estimation", ok, f"exact err={err_exact:.2e}<=1e-4, perturbed/exact={err_pert / max(err_exact, 1e-300):.2f}<=5")


def test_criterion_11_remark_identity():
    rng = np.random.default_rng(7)
    n = 100_000
    worst = 0.0
    for i in range(10):
        d = int(rng.integers(2, 13))
        dist = ml.LatentDistribution(["gaussian", "rademacher"][i % 2], d)
        z0 = rng.standard_normal(d)
        z0 /= np.linalg.norm(z0)
        model = [
            ml.SIM(index=z0, g=ml.OutputFn("sign")),
            ml.Linear(index=z0, noise_sd=0.3),
            ml.GLMLogistic(index=z0),
        ][i % 3]
        z = rng.standard_normal(d) * 0.8
        ss = ml.build_sample_set(dist, model, n, 5000 + i)
        lhs = ml.mismatch_covariance(ss.latent, ss.outputs, z)
        rhs = float(np.linalg.norm(ss.outputs @ ss.latent / n - z))
        worst = max(worst, abs(lhs - rhs))
    budget = 10.0 / math.sqrt(n)
    ok = worst <= budget
    _criterion(11, "remark identity", ok, f"worst |rho_hat - dist|={worst:.2e} <= {budget:.2e}")
