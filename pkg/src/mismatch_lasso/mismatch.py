"""Mismatch diagnostics and target-vector constructions.

For a latent/output pair (s, y) and a candidate parameter vector z, two
quantities control how well constrained least squares can estimate z:

* the mismatch covariance rho(z) = ||E[(y - <s, z>) s]||, the asymptotic
  bias (for isotropic s it equals the distance ||E[y s] - z||), and
* the mismatch deviation ||y - <s, z>||_psi2, a sub-Gaussian size of the
  residual that drives the variance.

This module estimates both from samples, evaluates them exactly where a
deterministic backend exists (Gauss-Hermite quadrature for Gaussian
single-index laws, full sign-pattern enumeration for Rademacher factors),
and builds the bias-minimizing target vector for each observation-model
family. Exact evaluation never falls back to Monte Carlo silently; the
unsupported combinations raise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .datagen import (
    GLMLogistic,
    DitheredOneBit,
    LatentDistribution,
    Linear,
    MultiFn,
    MultiIndex,
    NoisySplit,
    OutputFn,
    SIM,
    Superimposed,
    VariableSelection,
    model_digest,
    sample_latent,
)
from .quadrature import MAX_ENUM_DIM, gaussian_expect, rademacher_atoms
from .solver import project, spectral_norm

MOMENT_GRID = (1, 2, 4, 8, 16)

PENALTY_SCHEDULE = (1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8)
FEASIBILITY_TOL = 1e-6


class UnsupportedExactError(ValueError):
    """No deterministic backend exists for this (model, distribution) pair."""


class InfeasibleFiberError(RuntimeError):
    """The affine constraint cannot be met inside the hypothesis set."""

    def __init__(self, residual: float):
        super().__init__(f"constraint residual {residual:.3e} exceeds tolerance {FEASIBILITY_TOL:.0e}")
        self.residual = residual


@dataclass(frozen=True)
class MismatchReport:
    rho_hat: float
    dev_hat: float
    n_used: int
    rho_exact: float | None = None
    model_digest: str = ""

    def to_json(self) -> dict:
        return {
            "rho_hat": self.rho_hat,
            "rho_exact": self.rho_exact,
            "dev_hat": self.dev_hat,
            "n_used": self.n_used,
            "model_digest": self.model_digest,
        }


@dataclass(frozen=True, eq=False)
class TargetVector:
    """A constructed target z with the scaling coefficient(s) that built it."""

    z: np.ndarray
    mu: float | np.ndarray | None
    family: str
    mu_stderr: float | None = None


# ---------------------------------------------------------------------------
# Empirical estimators
# ---------------------------------------------------------------------------


def _check_pair(latent, outputs, z=None):
    latent = np.asarray(latent, dtype=float)
    outputs = np.asarray(outputs, dtype=float).ravel()
    if latent.ndim != 2 or latent.shape[0] != outputs.size:
        raise ValueError(f"shape mismatch: latent {latent.shape} vs outputs {outputs.shape}")
    if z is not None:
        z = np.asarray(z, dtype=float).ravel()
        if z.size != latent.shape[1]:
            raise ValueError(f"z has dimension {z.size}, latent has {latent.shape[1]}")
    return latent, outputs, z


def mismatch_covariance(latent, outputs, z) -> float:
    """Empirical mismatch covariance ||mean((y_i - <s_i, z>) s_i)||_2."""
    S, y, z = _check_pair(latent, outputs, z)
    residual = y - S @ z
    return float(np.linalg.norm(residual @ S) / y.size)


def subgaussian_norm(samples) -> float:
    """Moment-grid psi2 proxy: max over q in {1,2,4,8,16} of q^(-1/2) (mean |v|^q)^(1/q).

    A consistent lower proxy for the sub-Gaussian norm; the supremum over
    all q >= 1 is not computable from samples.
    """
    v = np.abs(np.asarray(samples, dtype=float).ravel())
    if v.size == 0:
        raise ValueError("empty sample")
    if v.size < 100:
        raise ValueError(f"need at least 100 samples for a stable moment grid, got {v.size}")
    best = 0.0
    for q in MOMENT_GRID:
        m = float(np.mean(v**q))
        if m > 0.0:
            best = max(best, m ** (1.0 / q) / math.sqrt(q))
    return best


def mismatch_deviation(latent, outputs, z) -> float:
    """Moment-grid psi2 proxy of the residual y - <s, z>."""
    S, y, z = _check_pair(latent, outputs, z)
    return subgaussian_norm(y - S @ z)


def mismatch_report(latent, outputs, z, model=None, dist=None) -> MismatchReport:
    """Bundle empirical mismatch parameters, with the exact value when it exists."""
    rho_hat = mismatch_covariance(latent, outputs, z)
    dev_hat = mismatch_deviation(latent, outputs, z)
    rho_exact = None
    if model is not None and dist is not None:
        try:
            rho_exact = mismatch_covariance_exact(model, dist, z)
        except UnsupportedExactError:
            rho_exact = None
    return MismatchReport(
        rho_hat=rho_hat,
        dev_hat=dev_hat,
        n_used=int(np.asarray(outputs).size),
        rho_exact=rho_exact,
        model_digest=model_digest(model) if model is not None else "",
    )


# ---------------------------------------------------------------------------
# Exact backends
# ---------------------------------------------------------------------------


def _conditional_mean_fn(model):
    """The scalar map t -> E[y | <s, index> = t] for single-index-like models."""
    if isinstance(model, SIM):
        return model.g.conditional_mean
    if isinstance(model, GLMLogistic):
        return expit
    if isinstance(model, DitheredOneBit):
        return lambda t: np.clip(t, -model.delta, model.delta)
    raise TypeError(f"not a single-index-like model: {model!r}")


def _quadrature_breakpoints(model) -> tuple:
    """Kink locations of the conditional mean (0 is always on the grid)."""
    return (model.delta,) if isinstance(model, DitheredOneBit) else ()


def _support_of(z: np.ndarray) -> np.ndarray:
    return np.flatnonzero(np.abs(z) > 0)


def _enum_support(rel_size: int, what: str):
    if rel_size > MAX_ENUM_DIM:
        raise UnsupportedExactError(
            f"enumeration over {what} needs {rel_size} coordinates, limit is {MAX_ENUM_DIM}"
        )


def _rademacher_single_index_corr(index: np.ndarray, cond_mean) -> np.ndarray:
    """E[y s] over sign patterns of the index support; zero elsewhere."""
    rel = _support_of(index)
    _enum_support(rel.size, "the index support")
    atoms = rademacher_atoms(rel.size).astype(float)
    gamma = atoms @ index[rel]
    corr = np.zeros(index.size)
    corr[rel] = np.mean(cond_mean(gamma)[:, None] * atoms, axis=0)
    return corr


def _gaussian_multifn_mu(G: MultiFn, S: int) -> np.ndarray:
    """mu_j = E[G(g_1..g_S) g_j] for independent standard normal arguments."""
    if G.kind == "sum":
        return np.ones(S)
    if G.kind == "sum_of_signs":
        return np.full(S, gaussian_expect(lambda t: np.sign(t) * t))
    if G.kind == "sign_of_first":
        mu = np.zeros(S)
        mu[0] = gaussian_expect(lambda t: np.sign(t) * t)
        return mu
    # product: odd in every other coordinate once S >= 2
    mu = np.zeros(S)
    if S == 1:
        mu[0] = 1.0
    return mu


def _rademacher_multifn_mu(G: MultiFn, S: int) -> np.ndarray:
    """mu_j = E[G(sigma) sigma_j] over all sign patterns."""
    _enum_support(S, "the active coordinates")
    atoms = rademacher_atoms(S).astype(float)
    y = G.apply(atoms)
    return np.mean(y[:, None] * atoms, axis=0)


def exact_output_correlation(model, dist: LatentDistribution) -> np.ndarray:
    """E[y s] evaluated exactly, for the supported (model, distribution) pairs.

    Gaussian factors: quadrature over the one-dimensional law of the index
    projection (single-index, logistic, dithered, superimposed branches) or
    coordinatewise independence (multi-index families). Rademacher factors:
    enumeration over the sign patterns of the coordinates the output reads
    (at most 20). Linear models are exact for every isotropic distribution.

    Raises
    ------
    UnsupportedExactError
        For any other combination; there is no silent Monte Carlo fallback.
    """
    d = dist.dim
    if isinstance(model, Linear):
        return model.index.copy()

    if dist.kind == "gaussian":
        if isinstance(model, (SIM, GLMLogistic, DitheredOneBit)):
            gbar = _conditional_mean_fn(model)
            nrm = float(np.linalg.norm(model.index))
            mu = gaussian_expect(lambda t: gbar(t) * t, sigma=nrm, breakpoints=_quadrature_breakpoints(model)) / nrm**2
            return mu * model.index
        if isinstance(model, Superimposed):
            mu_bar = np.mean([gaussian_expect(lambda t, g=g: g.conditional_mean(t) * t) for g in model.fns])
            return mu_bar * model.index
        if isinstance(model, (MultiIndex, VariableSelection)):
            Z = model.indices
            mu = _gaussian_multifn_mu(model.G, Z.shape[0])
            return mu @ Z
        if isinstance(model, NoisySplit):
            corr = np.zeros(d)
            corr[: model.d1] = _gaussian_multifn_mu(model.G, model.d1)
            return corr

    if dist.kind == "rademacher":
        if isinstance(model, (SIM, GLMLogistic, DitheredOneBit)):
            return _rademacher_single_index_corr(model.index, _conditional_mean_fn(model))
        if isinstance(model, Superimposed):
            parts = [
                _rademacher_single_index_corr(model.index, g.conditional_mean) for g in model.fns
            ]
            return np.mean(parts, axis=0)
        if isinstance(model, (MultiIndex, VariableSelection)):
            Z = model.indices
            rel = np.flatnonzero(np.any(np.abs(Z) > 0, axis=0))
            _enum_support(rel.size, "the union of index supports")
            atoms = rademacher_atoms(rel.size).astype(float)
            y = model.G.apply(atoms @ Z[:, rel].T)
            corr = np.zeros(d)
            corr[rel] = np.mean(y[:, None] * atoms, axis=0)
            return corr
        if isinstance(model, NoisySplit):
            corr = np.zeros(d)
            corr[: model.d1] = _rademacher_multifn_mu(model.G, model.d1)
            return corr

    raise UnsupportedExactError(
        f"no exact backend for model {type(model).__name__} with {dist.kind} factors"
    )


def mismatch_covariance_exact(model, dist: LatentDistribution, z) -> float:
    """rho(z) = ||E[y s] - z|| evaluated through an exact backend."""
    z = np.asarray(z, dtype=float).ravel()
    if z.size != dist.dim:
        raise ValueError(f"z has dimension {z.size}, distribution has {dist.dim}")
    return float(np.linalg.norm(exact_output_correlation(model, dist) - z))


# ---------------------------------------------------------------------------
# Target constructions
# ---------------------------------------------------------------------------


def target_single_index(model, dist: LatentDistribution, n_mc: int | None = None, seed: int = 0) -> TargetVector:
    """Bias-minimizing target mu * index on the span of the index vector.

    mu = E[g(<s, index>) <s, index>] / ||index||^2, evaluated by quadrature
    (gaussian), enumeration (rademacher), or seeded Monte Carlo with an
    explicit sample count for any other distribution.
    """
    if not isinstance(model, (Linear, SIM, GLMLogistic)):
        raise TypeError(f"single-index target needs a Linear, SIM or GLMLogistic model, got {type(model).__name__}")
    index = model.index
    nrm2 = float(index @ index)
    mu_stderr = None
    if isinstance(model, Linear):
        mu = 1.0
    elif dist.kind in ("gaussian", "rademacher"):
        corr = exact_output_correlation(model, dist)
        mu = float(corr @ index) / nrm2
    else:
        if n_mc is None:
            raise UnsupportedExactError(
                f"no exact backend for {dist.kind} factors; pass n_mc for a Monte Carlo estimate"
            )
        gbar = _conditional_mean_fn(model)
        gamma = sample_latent(dist, n_mc, seed) @ index
        vals = gbar(gamma) * gamma / nrm2
        mu = float(np.mean(vals))
        mu_stderr = float(np.std(vals, ddof=1) / math.sqrt(n_mc))
    return TargetVector(z=mu * index, mu=mu, family="single_index", mu_stderr=mu_stderr)


def target_multi_index(model, dist: LatentDistribution, n_mc: int | None = None, seed: int = 0) -> TargetVector:
    """Target sum_j mu_j z_j with mu_j = E[G(<s,z_1>,..,<s,z_S>) <s,z_j>]."""
    if not isinstance(model, (MultiIndex, VariableSelection)):
        raise TypeError(f"multi-index target needs a MultiIndex or VariableSelection model, got {type(model).__name__}")
    Z = model.indices
    S = Z.shape[0]
    mu_stderr = None
    if dist.kind == "rademacher":
        if isinstance(model, VariableSelection):
            mu = _rademacher_multifn_mu(model.G, S)
        else:
            corr = exact_output_correlation(model, dist)
            mu = Z @ corr
    elif dist.kind == "gaussian":
        mu = _gaussian_multifn_mu(model.G, S)
    else:
        if n_mc is None:
            raise UnsupportedExactError(
                f"no exact backend for {dist.kind} factors; pass n_mc for a Monte Carlo estimate"
            )
        V = sample_latent(dist, n_mc, seed) @ Z.T
        y = model.G.apply(V)
        prods = y[:, None] * V
        mu = np.mean(prods, axis=0)
        mu_stderr = float(np.max(np.std(prods, axis=0, ddof=1)) / math.sqrt(n_mc))
    family = "variable_selection" if isinstance(model, VariableSelection) else "multi_index"
    return TargetVector(z=mu @ Z, mu=np.asarray(mu), family=family, mu_stderr=mu_stderr)


def target_superimposed(model: Superimposed, dist: LatentDistribution) -> TargetVector:
    """Averaged scaling mu_bar = mean_j E[g_j(g) g] on the unit-norm index span."""
    if not isinstance(model, Superimposed):
        raise TypeError(f"superimposed target needs a Superimposed model, got {type(model).__name__}")
    if dist.kind != "gaussian":
        raise UnsupportedExactError("superimposed targets are only supported for gaussian factors")
    mu_bar = float(np.mean([gaussian_expect(lambda t, g=g: g.conditional_mean(t) * t) for g in model.fns]))
    return TargetVector(z=mu_bar * model.index, mu=mu_bar, family="superimposed")


# ---------------------------------------------------------------------------
# Noisy-data split
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DecompositionReport:
    """Mismatch split across signal and noise coordinates of a NoisySplit model.

    ``residual`` is rho_total^2 - rho_v^2 - noise_norm^2, which vanishes in
    expectation; the empirical mode reports its sampled value.
    """

    rho_total: float
    rho_v: float
    noise_norm: float
    residual: float
    mode: str


def mismatch_decomposition(model: NoisySplit, z, latent=None, outputs=None, dist=None) -> DecompositionReport:
    """Split rho(z)^2 into the signal-side mismatch and the noise-block norm.

    With ``latent``/``outputs`` given, all quantities are empirical; with
    ``dist`` given instead, the signal-side term is computed by an exact
    backend and the identity holds with zero residual by construction.
    """
    if not isinstance(model, NoisySplit):
        raise TypeError(f"needs a NoisySplit model, got {type(model).__name__}")
    z = np.asarray(z, dtype=float).ravel()
    if z.size != model.d1 + model.d2:
        raise ValueError(f"z has dimension {z.size}, model splits {model.d1} + {model.d2}")
    z_v, z_n = z[: model.d1], z[model.d1 :]
    noise_norm = float(np.linalg.norm(z_n))

    if latent is not None and outputs is not None:
        S, y, _ = _check_pair(latent, outputs, z)
        rho_total = mismatch_covariance(S, y, z)
        rho_v = mismatch_covariance(S[:, : model.d1], y, z_v)
        residual = rho_total**2 - rho_v**2 - noise_norm**2
        return DecompositionReport(rho_total, rho_v, noise_norm, residual, mode="empirical")

    if dist is None:
        raise ValueError("pass either (latent, outputs) for the empirical mode or dist for the exact mode")
    corr_v = exact_output_correlation(model, dist)[: model.d1]
    rho_v = float(np.linalg.norm(corr_v - z_v))
    rho_total = math.sqrt(rho_v**2 + noise_norm**2)
    return DecompositionReport(rho_total, rho_v, noise_norm, 0.0, mode="exact")


@dataclass(frozen=True, eq=False)
class NoisePowerResult:
    beta: np.ndarray
    z_n: np.ndarray
    residual: float


def noise_power_target(A_v, A_n, K, z_v) -> NoisePowerResult:
    """Smallest-norm noise component over the fiber {beta in K : A_v^T beta = z_v}.

    K = None means the full space, solved in closed form through the KKT
    system of the equality-constrained quadratic program. For a projectable
    K, the unconstrained KKT solution is accepted whenever it already lies
    in K; otherwise a quadratic-penalty sweep (eps from 1e-1 down to 1e-8,
    warm started, projected gradient inner loop) drives the constraint
    residual below 1e-6. If it cannot, the fiber is declared infeasible and
    the error carries the best residual reached.
    """
    A_v = np.atleast_2d(np.asarray(A_v, dtype=float))
    A_n = np.atleast_2d(np.asarray(A_n, dtype=float))
    z_v = np.asarray(z_v, dtype=float).ravel()
    p = A_v.shape[0]
    if A_n.shape[0] != p or z_v.size != A_v.shape[1]:
        raise ValueError("inconsistent shapes between A_v, A_n and z_v")

    H = 2.0 * (A_n @ A_n.T)
    kkt = np.vstack(
        [np.hstack([H, A_v]), np.hstack([A_v.T, np.zeros((A_v.shape[1], A_v.shape[1]))])]
    )
    rhs = np.concatenate([np.zeros(p), z_v])
    beta = np.linalg.lstsq(kkt, rhs, rcond=None)[0][:p]
    residual = float(np.linalg.norm(A_v.T @ beta - z_v))
    if K is None:
        if residual > FEASIBILITY_TOL:
            raise InfeasibleFiberError(residual)
        return NoisePowerResult(beta=beta, z_n=A_n.T @ beta, residual=residual)
    if residual <= FEASIBILITY_TOL and np.linalg.norm(beta - project(K, beta)) <= 1e-9:
        # unconstrained optimum is feasible, hence optimal over K as well
        return NoisePowerResult(beta=beta, z_n=A_n.T @ beta, residual=residual)

    sv = spectral_norm(A_v, seed=0)
    sn = spectral_norm(A_n, seed=0)
    beta = project(K, beta)  # warm start from the projected KKT solution
    best = beta
    best_residual = float(np.linalg.norm(A_v.T @ beta - z_v))
    for eps in PENALTY_SCHEDULE:
        L = 2.0 * sn**2 + 2.0 / eps * sv**2
        for _ in range(4000):
            grad = 2.0 * (A_n @ (A_n.T @ beta)) + (2.0 / eps) * (A_v @ (A_v.T @ beta - z_v))
            beta_next = project(K, beta - grad / L)
            step = float(np.linalg.norm(beta_next - beta))
            beta = beta_next
            if step <= 1e-13 * (1.0 + np.linalg.norm(beta)):
                break
        residual = float(np.linalg.norm(A_v.T @ beta - z_v))
        if residual < best_residual:
            best, best_residual = beta, residual
        if best_residual <= 0.1 * FEASIBILITY_TOL:
            break
    if best_residual > FEASIBILITY_TOL:
        raise InfeasibleFiberError(best_residual)
    return NoisePowerResult(beta=best, z_n=A_n.T @ best, residual=best_residual)
