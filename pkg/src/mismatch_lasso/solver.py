"""Constrained least squares by projected gradient descent.

Minimizes (1/n) sum_i (y_i - <x_i, beta>)^2 over a convex hypothesis set,
with a fixed step 1/L, L = 2 sigma_max(X)^2 / n, starting from the
projection of the origin. The objective is checked to be non-increasing at
every iteration. A run counts as converged once the relative objective
decrease falls below ``rel_tol`` and the iterate is a fixed point of the
projected gradient map up to 10 * rel_tol * (1 + ||beta||); the latter is
what optimality tests should gate on, and it is reported on the result as
``fixed_point_residual`` either way.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import Box, L1Ball, L2Ball, LinearImage, Shifted, Subspace


@dataclass(frozen=True)
class SolverConfig:
    max_iters: int = 5000
    rel_tol: float = 1e-9
    seed: int = 0

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if not self.rel_tol > 0:
            raise ValueError("rel_tol must be > 0")


@dataclass(eq=False)
class FitResult:
    """Solver output; ``z_hat`` is filled by :func:`pushforward_estimate`."""

    beta_hat: np.ndarray
    objective: float
    iters: int
    converged: bool
    fixed_point_residual: float
    z_hat: np.ndarray | None = None
    objective_trace: np.ndarray | None = None

    def to_json(self) -> dict:
        return {
            "beta_hat": self.beta_hat.tolist(),
            "z_hat": None if self.z_hat is None else self.z_hat.tolist(),
            "objective": self.objective,
            "iters": self.iters,
            "converged": self.converged,
            "fixed_point_residual": self.fixed_point_residual,
        }


def project(K, v: np.ndarray) -> np.ndarray:
    """Euclidean projection onto K. Idempotent and nonexpansive."""
    v = np.asarray(v, dtype=float)
    if isinstance(K, L2Ball):
        nrm = np.linalg.norm(v)
        return v if nrm <= K.radius else v * (K.radius / nrm)
    if isinstance(K, L1Ball):
        return _project_l1(v, K.radius)
    if isinstance(K, Box):
        return np.clip(v, K.lo, K.hi)
    if isinstance(K, Subspace):
        w = (v @ K.basis.T) @ K.basis
        if K.radius is not None:
            nrm = np.linalg.norm(w)
            if nrm > K.radius:
                w = w * (K.radius / nrm)
        return w
    if isinstance(K, Shifted):
        return K.center + project(K.inner, v - K.center)
    if isinstance(K, LinearImage):
        raise ValueError("linear images carry no direct projection; see solve_adapted")
    raise TypeError(f"not a hypothesis set: {K!r}")


def _project_l1(v: np.ndarray, radius: float) -> np.ndarray:
    """Sort-and-threshold projection onto the l1 ball of the given radius."""
    a = np.abs(v)
    if a.sum() <= radius:
        return v.copy()
    u = np.sort(a)[::-1]
    css = np.cumsum(u) - radius
    idx = np.arange(1, v.size + 1)
    rho = idx[u > css / idx][-1]
    theta = css[rho - 1] / rho
    return np.sign(v) * np.maximum(a - theta, 0.0)


def spectral_norm(X: np.ndarray, seed: int = 0) -> float:
    """Largest singular value of X by power iteration on X^T X.

    Iterates until the Rayleigh quotient changes by less than 1e-12
    relatively, or 1000 iterations. Returns 0.0 for the zero matrix.
    """
    X = np.asarray(X, dtype=float)
    if not np.any(X):
        return 0.0
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(X.shape[1])
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(1000):
        w = X.T @ (X @ v)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            # Started in the null space; reseed deterministically.
            v = rng.standard_normal(X.shape[1])
            v /= np.linalg.norm(v)
            continue
        v = w / nw
        lam_new = float(v @ (X.T @ (X @ v)))
        if abs(lam_new - lam) <= 1e-12 * max(lam_new, 1e-300):
            lam = lam_new
            break
        lam = lam_new
    return math.sqrt(lam)


def _objective(X: np.ndarray, y: np.ndarray, beta: np.ndarray) -> float:
    r = y - X @ beta
    return float(r @ r) / y.size


def solve_klasso(X: np.ndarray, y: np.ndarray, K, cfg: SolverConfig | None = None) -> FitResult:
    """Projected gradient descent for the constrained least squares problem."""
    cfg = cfg or SolverConfig()
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    if X.ndim != 2 or X.shape[0] != y.size:
        raise ValueError(f"shape mismatch: X {X.shape} vs y {y.shape}")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise ValueError("inputs must be finite")
    n = y.size
    sigma = spectral_norm(X, seed=cfg.seed)
    # Tiny inflation keeps the descent guarantee when power iteration
    # approaches sigma_max from below.
    L = 2.0 * sigma**2 / n * (1.0 + 1e-9)

    beta = project(K, np.zeros(X.shape[1]))
    obj = _objective(X, y, beta)
    obj0 = max(obj, 1e-300)
    trace = [obj]
    converged = False
    iters = 0
    if L == 0.0:
        # Zero design: the gradient vanishes everywhere and beta0 is optimal.
        fp_res = 0.0
        converged = True
    else:
        for iters in range(1, cfg.max_iters + 1):
            grad = (2.0 / n) * (X.T @ (X @ beta - y))
            beta_next = project(K, beta - grad / L)
            obj_next = _objective(X, y, beta_next)
            if obj_next > obj + 1e-12 * (1.0 + obj):
                raise RuntimeError(
                    f"objective increased at iteration {iters}: {obj} -> {obj_next}"
                )
            step = float(np.linalg.norm(beta_next - beta))
            rel_decrease = (obj - obj_next) / obj0
            beta, obj = beta_next, obj_next
            trace.append(obj)
            if rel_decrease < cfg.rel_tol and step <= 10.0 * cfg.rel_tol * (1.0 + np.linalg.norm(beta)):
                converged = True
                break
        grad = (2.0 / n) * (X.T @ (X @ beta - y))
        fp_res = float(np.linalg.norm(beta - project(K, beta - grad / L)))
    return FitResult(
        beta_hat=beta,
        objective=obj,
        iters=iters,
        converged=converged,
        fixed_point_residual=fp_res,
        objective_trace=np.asarray(trace),
    )


def pushforward_estimate(A, fit: FitResult) -> np.ndarray:
    """Latent-space estimate z_hat = A^T beta_hat, stored on the fit."""
    entries = A.entries if hasattr(A, "entries") else np.asarray(A, dtype=float)
    if entries.shape[0] != fit.beta_hat.size:
        raise ValueError(f"mixing shape {entries.shape} does not match beta of size {fit.beta_hat.size}")
    fit.z_hat = entries.T @ fit.beta_hat
    return fit.z_hat


def adapted_reference_beta(A, A_tilde, z) -> np.ndarray:
    """Reference coefficient vector pinv(A_tilde)^T M^-T z with M = pinv(A_tilde) A.

    This is the parameter vector the adapted estimator of
    :func:`solve_adapted` approximates; with A_tilde = A it reduces to
    pinv(A)^T z.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    A_tilde = np.atleast_2d(np.asarray(A_tilde, dtype=float))
    z = np.asarray(z, dtype=float).ravel()
    pinv = np.linalg.pinv(A_tilde)
    M = pinv @ A
    return pinv.T @ np.linalg.solve(M.T, z)


def solve_adapted(X: np.ndarray, y: np.ndarray, A_tilde: np.ndarray, K_tilde, cfg: SolverConfig | None = None) -> FitResult:
    """Estimation with an (approximately) known mixing matrix.

    Runs projected gradient descent over w in the latent-space set
    ``K_tilde`` after the change of variables beta = pinv(A_tilde)^T w,
    which realizes the hypothesis set pinv(A_tilde)^T K_tilde without ever
    projecting onto a linear image. Returns beta_hat = pinv(A_tilde)^T w_hat
    with z_hat = A_tilde^T beta_hat (= w_hat, by the range identity of the
    pseudo-inverse). The reported objective is recomputed in the original
    variables; iteration counts and the fixed-point residual refer to the
    w-space solve.
    """
    A_tilde = np.atleast_2d(np.asarray(A_tilde, dtype=float))
    smin = np.linalg.svd(A_tilde, compute_uv=False).min()
    if not smin > 1e-8:
        raise ValueError(f"mixing estimate is rank deficient (smallest singular value {smin:.3e})")
    pinv_T = np.linalg.pinv(A_tilde).T
    fit_w = solve_klasso(np.asarray(X, dtype=float) @ pinv_T, y, K_tilde, cfg)
    w_hat = fit_w.beta_hat
    beta_hat = pinv_T @ w_hat
    return FitResult(
        beta_hat=beta_hat,
        objective=_objective(np.asarray(X, dtype=float), np.asarray(y, dtype=float).ravel(), beta_hat),
        iters=fit_w.iters,
        converged=fit_w.converged,
        fixed_point_residual=fit_w.fixed_point_residual,
        z_hat=A_tilde.T @ beta_hat,
        objective_trace=fit_w.objective_trace,
    )
