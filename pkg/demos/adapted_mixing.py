# Correlated inputs x = A s: the solver never needs A (it fits beta in
# input space and the latent estimate is A^T beta), but when an estimate
# of A is available the hypothesis set can be adapted so that beta itself
# becomes identifiable. The adapted solve also tolerates a moderately
# wrong mixing estimate.

import numpy as np

import mismatch_lasso as ml

d, p, n = 8, 12, 400
rng = np.random.default_rng(4)
A = rng.standard_normal((p, d))
A /= np.linalg.svd(A, compute_uv=False).max()
z0 = rng.standard_normal(d)
z0 /= np.linalg.norm(z0)

dist = ml.LatentDistribution("gaussian", d)
model = ml.Linear(index=z0, noise_sd=0.05)
mix = ml.MixingMatrix.from_array(A)
ss = ml.build_sample_set(dist, model, n, 11, A=mix)
cfg = ml.SolverConfig(max_iters=20_000, rel_tol=1e-12)

print("=== plain solve: latent estimate is fine, beta is not identified ===")
fit = ml.solve_klasso(ss.inputs, ss.outputs, ml.L2Ball(radius=10.0), cfg)
z_hat = ml.pushforward_estimate(A, fit)
print(f"  ||A^T beta - z0|| = {np.linalg.norm(z_hat - z0):.4f}")
print(f"  ||beta|| = {np.linalg.norm(fit.beta_hat):.3f} (one of many minimizers when p > d)")

print()
print("=== adapted solve with the exact mixing matrix ===")
K_latent = ml.L2Ball(radius=2.0)
fit = ml.solve_adapted(ss.inputs, ss.outputs, A, K_latent, cfg)
beta_ref = ml.adapted_reference_beta(A, A, z0)
print(f"  ||A^T beta - z0||  = {np.linalg.norm(fit.z_hat - z0):.4f}")
print(f"  ||beta - beta_ref|| = {np.linalg.norm(fit.beta_hat - beta_ref):.4f}")

print()
print("=== adapted solve with a perturbed mixing estimate ===")
for rel in (0.02, 0.05, 0.1):
    Q = rng.standard_normal((p, d))
    A_tilde = A + rel * np.linalg.svd(A, compute_uv=False).max() / np.linalg.svd(Q, compute_uv=False).max() * Q
    fit = ml.solve_adapted(ss.inputs, ss.outputs, A_tilde, K_latent, cfg)
    beta_ref = ml.adapted_reference_beta(A, A_tilde, z0)
    print(f"  perturbation {rel:4.2f}:  ||A~^T beta - z0|| = {np.linalg.norm(fit.z_hat - z0):.4f}   ||beta - beta_ref|| = {np.linalg.norm(fit.beta_hat - beta_ref):.4f}")
