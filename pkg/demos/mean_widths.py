# Gaussian mean widths: the complexity dial of every sample-size condition
# in this package. Monte Carlo estimates using exact support functions,
# checked against closed forms where they exist.

import math

import numpy as np

import mismatch_lasso as ml

print("=== global widths ===")
print("w(B2^d) vs the exact Gamma-ratio value:")
for d in (2, 8, 32, 128):
    est = ml.mean_width_global(ml.L2Ball(1.0), d, n_mc=20_000, seed=d)
    exact = math.sqrt(2) * math.exp(math.lgamma((d + 1) / 2) - math.lgamma(d / 2))
    print(f"  d = {d:4d}  mc = {est.value:.4f} +- {est.stderr:.4f}   exact = {exact:.4f}")

print()
print("w(B1^d) grows only like sqrt(log d) - the l1 ball is tiny:")
for d in (16, 64, 256):
    est = ml.mean_width_global(ml.L1Ball(1.0), d, n_mc=20_000, seed=d)
    print(f"  d = {d:4d}  mc = {est.value:.4f}   sqrt(2 log 2d) = {math.sqrt(2 * math.log(2 * d)):.4f}")

print()
print("=== conic width of the l1 descent cone at an s-sparse point ===")
d = 128
for s in (1, 4, 16):
    val = ml.conic_width_l1_descent(d, s).value
    print(f"  d = {d}, s = {s:3d}:  width = {val:.3f}   (~ sqrt(2 s log(d/s)) = {math.sqrt(2 * s * math.log(d / s)):.3f})")

print()
print("=== local width upper bound interpolates between the two ===")
z = np.zeros(d)
z[:4] = [1.0, -1.0, 0.5, 0.5]
K = ml.L1Ball(radius=3.0)  # z sits exactly on the boundary
for t in (10.0, 1.0, 0.1, 0.001):
    est = ml.local_width_bound(K, z, t, n_mc=20_000, seed=3)
    print(f"  scale t = {t:6.3f}:  bound = {est.value:.3f}")

print()
print("=== sample-size calculator ===")
w_sq = ml.conic_width_l1_descent(d, 4).value ** 2
kappa = ml.LatentDistribution("gaussian", d).subgaussian_constant
for delta in (1.0, 0.5, 0.25):
    n_global = ml.required_samples(ml.mean_width_global(ml.L1Ball(3.0), d, seed=0).value ** 2, kappa, delta, "global")
    n_conic = ml.required_samples(w_sq, kappa, delta, "conic")
    print(f"  delta = {delta:4.2f}:  n_global >= {n_global:6d}   n_conic >= {n_conic:6d}")
