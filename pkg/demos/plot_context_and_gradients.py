"""
Context vectors and their gradients
===================================

A feature grid is turned into a continuous feature function with Gaussian
RBFs and ridge regression. The context vector is its expectation under the
mixture density, which is closed form, and so are its derivatives.
"""

import numpy as np

from mmattn import fit_ridge, make_grid_basis, multimodal_backward, multimodal_context
from mmattn.synthetic import feature_grid, random_mixture

rng = np.random.default_rng(3)
grid = feature_grid(rng, 19, 32, dim=6)

# 100 RBFs on a 10 x 10 lattice with variance 0.001, ridge penalty 0.01
f = fit_ridge(grid, make_grid_basis(10, 0.001), 0.01)
m = random_mixture(rng, 2, var_range=(0.005, 0.03))

ctx = multimodal_context(f, m)
print("context:", np.round(ctx.value, 5))
for pi, part in ctx.per_component:
    print(f"  pi={pi:.3f}  c_k={np.round(part, 5)}")

# %%
# Backward pass against an upstream gradient (here d loss / d c = c, as for
# the loss 0.5 |c|^2).
g = multimodal_backward(f, m, ctx.value)
print("d loss / d mean:\n", g.grad_mean)
print("d loss / d cov (a, b, c):\n", g.grad_cov)

# %%
# A quick finite-difference look at the first mean coordinate.
h = 1e-6
means = m.means.copy()
means[0, 0] += h
bumped = type(m)(m.pis, means, m.covs)
loss = lambda mix: 0.5 * np.sum(multimodal_context(f, mix).value ** 2)
print("finite difference:", (loss(bumped) - loss(m)) / h, " analytic:", g.grad_mean[0, 0])
