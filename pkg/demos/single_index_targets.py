# Single-index observations y = g(<s, z0>): which vector does constrained
# least squares actually estimate?
#
# The answer is the rescaled index mu * z0 with mu = E[g(gamma) gamma] /
# ||z0||^2. For Gaussian factors the estimator is consistent for mu * z0
# (zero mismatch covariance); for Rademacher factors a bias can remain, and
# the classic two-vector example below shows a bias of exactly 1/2.

import numpy as np

import mismatch_lasso as ml

d = 16
z0 = np.zeros(d)
z0[0], z0[1] = 1.0, 0.5

print("=== scalings mu for common output functions (gaussian factors) ===")
dist = ml.LatentDistribution("gaussian", d)
for kind in ("identity", "sign", "tanh", "abs"):
    model = ml.SIM(index=z0, g=ml.OutputFn(kind))
    tv = ml.target_single_index(model, dist)
    print(f"  g = {kind:9s} mu = {tv.mu:+.6f}")

print()
print("=== gaussian sign model: error to mu*z0 decays with n ===")
model = ml.SIM(index=z0, g=ml.OutputFn("sign"))
target = ml.target_single_index(model, dist).z
K = ml.L2Ball(radius=float(np.linalg.norm(target)))
for n in (256, 1024, 4096):
    errs = []
    for trial in range(10):
        ss = ml.build_sample_set(dist, model, n, seed=1000 * trial + n)
        fit = ml.solve_klasso(ss.inputs, ss.outputs, K)
        errs.append(np.linalg.norm(ml.pushforward_estimate(np.eye(d), fit) - target))
    print(f"  n = {n:5d}  median error = {np.median(errs):.4f}")

print()
print("=== rademacher worst case: two indistinguishable index vectors ===")
rade = ml.LatentDistribution("rademacher", d)
plain = z0.copy()
plain[1] = 0.0
for z, name in ((plain, "z = (1, 0, ...)"), (z0, "z = (1, 1/2, ...)")):
    rho = ml.mismatch_covariance_exact(model, rade, z)
    print(f"  exact mismatch covariance at {name}: {rho}")
print("  the sign observations agree for both, so the estimator converges")
print("  to the first vector and keeps a bias of 1/2 toward the second:")
for n in (256, 4096):
    errs = []
    for trial in range(10):
        ss = ml.build_sample_set(rade, model, n, seed=77 * trial + n)
        fit = ml.solve_klasso(ss.inputs, ss.outputs, ml.L2Ball(radius=float(np.linalg.norm(z0))))
        errs.append(np.linalg.norm(ml.pushforward_estimate(np.eye(d), fit) - z0))
    print(f"  n = {n:5d}  median error to the biased target = {np.median(errs):.4f}")
