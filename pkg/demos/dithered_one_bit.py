# One-bit observations from non-Gaussian factors are biased in general:
# with Rademacher factors, y = sign(<s, z0>) for z0 = (1, 1/2, 0, ...)
# cannot be told apart from y = sign(s_1), so no estimator reaches z0.
# Randomly shifting the quantization threshold before taking the sign
# ("dithering") removes the bias once the dither level grows like
# sqrt(log 2n), and the estimator becomes consistent for z0 itself,
# magnitude included.

import numpy as np

import mismatch_lasso as ml

d = 16
z0 = np.zeros(d)
z0[0], z0[1] = 1.0, 0.5
dist = ml.LatentDistribution("rademacher", d)
kappa = dist.subgaussian_constant
lam = 1.2  # known upper bound on ||z0|| ~ 1.118

print("=== dithered one-bit recovery, delta = kappa * lam * sqrt(log 2n) ===")
print(f"{'n':>7s} {'delta':>7s} {'rho_hat':>9s} {'rho*sqrt(n)/delta':>18s} {'median err':>11s}")
for n in (256, 1024, 4096, 16384):
    delta = ml.dithering_scale(kappa, lam, n, C=1.0)
    model = ml.DitheredOneBit(index=z0, delta=delta)
    K = ml.L2Ball(radius=lam)
    errs, rhos = [], []
    for trial in range(8):
        ss = ml.build_sample_set(dist, model, n, seed=31 * trial + n)
        fit = ml.solve_klasso(ss.inputs, ss.outputs, K)
        errs.append(np.linalg.norm(ml.pushforward_estimate(np.eye(d), fit) - z0))
        rhos.append(ml.mismatch_covariance(ss.latent, ss.outputs, z0))
    rho = float(np.median(rhos))
    print(f"{n:7d} {delta:7.3f} {rho:9.4f} {rho * np.sqrt(n) / delta:18.3f} {np.median(errs):11.4f}")

print()
print("the normalized bias rho*sqrt(n)/delta stays flat while the error")
print("keeps shrinking: the bias-variance trade-off is controlled by delta.")
print()
print("for contrast, plain sign observations of the same index stall at")
print("the exact bias floor rho(z0) =", ml.mismatch_covariance_exact(ml.SIM(index=z0, g=ml.OutputFn("sign")), dist, z0))
model = ml.SIM(index=z0, g=ml.OutputFn("sign"))
for n in (256, 16384):
    errs = []
    for trial in range(8):
        ss = ml.build_sample_set(dist, model, n, seed=91 * trial + n)
        fit = ml.solve_klasso(ss.inputs, ss.outputs, ml.L2Ball(radius=lam))
        errs.append(np.linalg.norm(ml.pushforward_estimate(np.eye(d), fit) - z0))
    print(f"  n = {n:5d}  median error = {np.median(errs):.4f}")
