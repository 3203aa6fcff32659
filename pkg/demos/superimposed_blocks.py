# Superimposed observations: M transmitters share one unit-norm index
# vector; each applies its own distortion g_j to its linear measurement and
# the receiver only sees the averaged latent block and the summed output,
#
#     s = M^(-1/2) sum_j s^j,    y = M^(-1/2) sum_j g_j(<s^j, z0>).
#
# Constrained least squares on (s, y) estimates mu_bar * z0 where mu_bar
# averages the per-branch scalings.

import math

import numpy as np

import mismatch_lasso as ml

d = 12
z0 = np.zeros(d)
z0[2] = 1.0
dist = ml.LatentDistribution("gaussian", d)

print("=== averaged scaling across distorted branches ===")
branches = {
    "3 x identity": (ml.OutputFn("identity"),) * 3,
    "3 x sign": (ml.OutputFn("sign"),) * 3,
    "identity + sign": (ml.OutputFn("identity"), ml.OutputFn("sign")),
    "tanh + sign + abs": (ml.OutputFn("tanh"), ml.OutputFn("sign"), ml.OutputFn("abs")),
}
for name, fns in branches.items():
    model = ml.Superimposed(index=z0, fns=fns)
    tv = ml.target_superimposed(model, dist)
    print(f"  {name:18s} mu_bar = {tv.mu:+.6f}")
print(f"  (reference: E[sign(g) g] = sqrt(2/pi) = {math.sqrt(2 / math.pi):.6f})")

print()
print("=== recovery of the averaged target ===")
model = ml.Superimposed(index=z0, fns=(ml.OutputFn("identity"), ml.OutputFn("sign")))
target = ml.target_superimposed(model, dist).z
K = ml.L2Ball(radius=float(np.linalg.norm(target)))
for n in (256, 1024, 4096):
    errs = []
    for trial in range(10):
        ss = ml.build_sample_set(dist, model, n, seed=7 * trial + n)
        fit = ml.solve_klasso(ss.inputs, ss.outputs, K)
        errs.append(np.linalg.norm(ml.pushforward_estimate(np.eye(d), fit) - target))
    print(f"  n = {n:5d}  median error = {np.median(errs):.4f}")
