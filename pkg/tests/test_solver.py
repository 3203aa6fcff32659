import math

import numpy as np
import pytest

from mismatch_lasso.geometry import Box, L1Ball, L2Ball, LinearImage, Shifted, Subspace
from mismatch_lasso.solver import (
    FitResult,
    SolverConfig,
    adapted_reference_beta,
    project,
    pushforward_estimate,
    solve_adapted,
    solve_klasso,
    spectral_norm,
)

import oracles


# ---------------------------------------------------------------------------
# Projections
# ---------------------------------------------------------------------------


def test_project_is_identity_inside():
    v = np.array([0.2, -0.1])
    for K in (L2Ball(1.0), L1Ball(1.0), Box(lo=[-1.0, -1.0], hi=[1.0, 1.0])):
        assert np.array_equal(project(K, v), v)


def test_l1_projection_examples():
    assert np.allclose(project(L1Ball(1.0), np.array([3.0, 0.0])), [1.0, 0.0])
    assert np.allclose(project(L1Ball(1.0), np.array([0.5, 0.5, 0.5])), [1 / 3, 1 / 3, 1 / 3])


def test_l1_projection_matches_qp_oracle():
    rng = np.random.default_rng(42)
    worst = 0.0
    for _ in range(1000):
        d = int(rng.integers(1, 7))
        v = rng.standard_normal(d) * rng.uniform(0.1, 5.0)
        r = rng.uniform(0.1, 3.0)
        worst = max(worst, float(np.linalg.norm(project(L1Ball(r), v) - oracles.l1_projection_qp(v, r))))
    assert worst <= 1e-8


def test_l1_projection_matches_generic_conic_solver():
    cp = pytest.importorskip("cvxpy")
    rng = np.random.default_rng(7)
    x = cp.Variable(5)
    v_par = cp.Parameter(5)
    prob = cp.Problem(cp.Minimize(cp.sum_squares(x - v_par)), [cp.norm1(x) <= 1.0])
    for _ in range(25):
        v_par.value = rng.standard_normal(5)
        prob.solve(solver=cp.CLARABEL)
        assert np.linalg.norm(project(L1Ball(1.0), v_par.value) - x.value) <= 1e-4


@pytest.mark.parametrize(
    "K",
    [
        L2Ball(0.8),
        L1Ball(1.3),
        Box(lo=np.array([-0.5, 0.0, -2.0]), hi=np.array([0.5, 1.0, 0.0])),
        Subspace(basis=np.array([[1.0, 0.0, 0.0], [0.0, 0.0, 1.0]]), radius=1.1),
        Shifted(inner=L1Ball(1.0), center=np.array([1.0, -1.0, 0.0])),
    ],
)
def test_projection_idempotent_and_nonexpansive(K):
    rng = np.random.default_rng(11)
    for _ in range(200):
        v, w = rng.standard_normal(3) * 3, rng.standard_normal(3) * 3
        pv, pw = project(K, v), project(K, w)
        assert np.linalg.norm(pv - project(K, pv)) <= 1e-12
        assert np.linalg.norm(pv - pw) <= np.linalg.norm(v - w) + 1e-12


def test_linear_image_has_no_projection():
    with pytest.raises(ValueError):
        project(LinearImage(matrix=np.eye(2), inner=L2Ball(1.0)), np.zeros(2))


# ---------------------------------------------------------------------------
# Spectral norm
# ---------------------------------------------------------------------------


def test_spectral_norm_examples():
    assert spectral_norm(np.eye(3)) == pytest.approx(1.0, abs=1e-12)
    assert spectral_norm(np.diag([3.0, 1.0])) == pytest.approx(3.0, abs=1e-10)
    assert spectral_norm(np.zeros((4, 2))) == 0.0


def test_spectral_norm_matches_svd():
    rng = np.random.default_rng(2)
    X = rng.standard_normal((50, 20))
    exact = np.linalg.svd(X, compute_uv=False).max()
    assert spectral_norm(X, seed=1) == pytest.approx(exact, abs=1e-8)


# ---------------------------------------------------------------------------
# Constrained least squares
# ---------------------------------------------------------------------------


def test_zero_targets_give_zero_solution():
    X = np.eye(4)
    fit = solve_klasso(X, np.zeros(4), L2Ball(1.0))
    assert np.allclose(fit.beta_hat, 0.0)
    assert fit.objective == 0.0
    assert fit.converged


def test_symmetric_kkt_point_on_l1_budget():
    # rows scaled so the empirical Gram is the identity
    X = math.sqrt(2.0) * np.eye(2)
    fit = solve_klasso(X, np.array([1.0, 1.0]), L1Ball(1.0))
    assert np.allclose(fit.beta_hat, [0.5, 0.5], atol=1e-9)


def test_inactive_constraint_matches_pinv_least_squares():
    rng = np.random.default_rng(3)
    X = rng.standard_normal((60, 8))
    y = rng.standard_normal(60)
    fit = solve_klasso(X, y, L2Ball(1e4))
    assert np.linalg.norm(fit.beta_hat - oracles.least_squares_pinv(X, y)) <= 1e-6


def test_objective_invariants():
    rng = np.random.default_rng(4)
    X = rng.standard_normal((40, 6))
    y = rng.standard_normal(40)
    fit = solve_klasso(X, y, L1Ball(0.7))
    # recomputed objective agrees
    assert fit.objective == pytest.approx(float(np.mean((y - X @ fit.beta_hat) ** 2)), abs=1e-12)
    # monotone trace
    diffs = np.diff(fit.objective_trace)
    assert np.all(diffs <= 1e-12 * (1.0 + fit.objective_trace[:-1]))
    # feasible within projection tolerance
    assert np.linalg.norm(fit.beta_hat - project(L1Ball(0.7), fit.beta_hat)) <= 1e-10


def test_fixed_point_residual_at_convergence():
    rng = np.random.default_rng(5)
    X = rng.standard_normal((80, 5))
    y = rng.standard_normal(80)
    cfg = SolverConfig(max_iters=50_000, rel_tol=1e-9)
    for K in (L2Ball(0.5), L1Ball(0.8), Box(lo=-0.2 * np.ones(5), hi=0.2 * np.ones(5))):
        fit = solve_klasso(X, y, K, cfg)
        assert fit.converged
        assert fit.fixed_point_residual <= 10 * cfg.rel_tol * (1.0 + np.linalg.norm(fit.beta_hat))


def test_solver_rejects_nonfinite_data():
    with pytest.raises(ValueError):
        solve_klasso(np.array([[np.nan]]), np.array([1.0]), L2Ball(1.0))


def test_pushforward_examples():
    fit = FitResult(beta_hat=np.array([1.0, 1.0]), objective=0.0, iters=0, converged=True, fixed_point_residual=0.0)
    assert np.array_equal(pushforward_estimate(np.eye(2), fit), [1.0, 1.0])
    assert np.array_equal(pushforward_estimate(np.diag([2.0, 1.0]), fit), [2.0, 1.0])
    assert fit.z_hat is not None
    with pytest.raises(ValueError):
        pushforward_estimate(np.eye(3), fit)


def test_pushforward_objective_identity():
    rng = np.random.default_rng(6)
    A = rng.standard_normal((5, 3))
    latent = rng.standard_normal((30, 3))
    X = latent @ A.T
    y = rng.standard_normal(30)
    fit = solve_klasso(X, y, L2Ball(1.0))
    z_hat = pushforward_estimate(A, fit)
    obj_latent = float(np.mean((y - latent @ z_hat) ** 2))
    assert obj_latent == pytest.approx(fit.objective, abs=1e-10)


# ---------------------------------------------------------------------------
# Adapted estimation
# ---------------------------------------------------------------------------


def test_adapted_with_identity_matches_plain_solver():
    rng = np.random.default_rng(7)
    X = rng.standard_normal((50, 4))
    y = rng.standard_normal(50)
    K = L2Ball(0.9)
    plain = solve_klasso(X, y, K)
    adapted = solve_adapted(X, y, np.eye(4), K)
    assert np.linalg.norm(plain.beta_hat - adapted.beta_hat) <= 1e-9
    assert np.allclose(adapted.z_hat, adapted.beta_hat)


def test_adapted_range_identity():
    rng = np.random.default_rng(8)
    A_tilde = rng.standard_normal((6, 3))
    X = rng.standard_normal((40, 6))
    y = rng.standard_normal(40)
    fit = solve_adapted(X, y, A_tilde, L2Ball(1.0))
    # beta lives in the range of pinv(A_tilde)^T, so reapplying the map is neutral
    back = np.linalg.pinv(A_tilde).T @ (A_tilde.T @ fit.beta_hat)
    assert np.linalg.norm(back - fit.beta_hat) <= 1e-10
    assert np.allclose(fit.z_hat, A_tilde.T @ fit.beta_hat)


def test_adapted_recovers_reference_beta_noiseless():
    rng = np.random.default_rng(9)
    d, p, n = 6, 9, 60
    A = rng.standard_normal((p, d))
    A /= np.linalg.svd(A, compute_uv=False).max()
    z0 = rng.standard_normal(d)
    z0 /= np.linalg.norm(z0)
    latent = rng.standard_normal((n, d))
    X = latent @ A.T
    y = latent @ z0
    fit = solve_adapted(X, y, A, L2Ball(2.0), SolverConfig(max_iters=20_000, rel_tol=1e-12))
    beta_ref = adapted_reference_beta(A, A, z0)
    assert np.linalg.norm(fit.beta_hat - beta_ref) <= 1e-4
    # with an exactly known mixing matrix the reference is pinv(A)^T z0
    assert np.linalg.norm(beta_ref - np.linalg.pinv(A).T @ z0) <= 1e-12


def test_adapted_rejects_rank_deficient_mixing():
    with pytest.raises(ValueError):
        solve_adapted(np.eye(3), np.zeros(3), np.zeros((3, 2)), L2Ball(1.0))
