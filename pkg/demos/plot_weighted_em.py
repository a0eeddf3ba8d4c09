"""
Fitting a mixture to an attention map
=====================================

A discrete attention map is a set of grid cells with weights. Weighted EM
fits a Gaussian mixture density to it.
"""

import numpy as np

from mmattn import WeightedDataset, init_params, run_em
from mmattn.em import run_em_restarts
from mmattn.synthetic import blob_weights

rng = np.random.default_rng(0)

# a 24 x 32 weight map drawn from three blobs with multiplicative noise
data, truth = blob_weights(rng, 24, 32, 3)
print("cells:", len(data), " total weight:", data.weights.sum())

# one run from one random initialization, at the test-time budget of 10 iterations
report = run_em(data, init_params(data, 3, seed=1), max_iters=10, tol=None)
print("loglik per iteration:", np.round(report.loglik_trace, 4))

# the trace never goes down
assert np.diff(report.loglik_trace).min() >= -1e-9

# three restarts, keeping the best final log-likelihood
best = run_em_restarts(data, 3, restarts=3, max_iters=10, seed=0, tol=None)
print("best of 3 restarts:", round(best.loglik, 4))
for pi, mean in zip(best.params.pis, best.params.means):
    print(f"  pi={pi:.3f}  mean=({mean[0]:.3f}, {mean[1]:.3f})")

print("generating means:")
for pi, mean in zip(truth.pis, truth.means):
    print(f"  pi={pi:.3f}  mean=({mean[0]:.3f}, {mean[1]:.3f})")

# weights only matter up to scale
rescaled = WeightedDataset(data.locations, data.weights * 1024.0)
again = run_em(rescaled, init_params(rescaled, 3, seed=1), max_iters=10, tol=None)
print("identical trace after rescaling:", again.loglik_trace == report.loglik_trace)
