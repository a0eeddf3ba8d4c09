"""
Choosing the number of components
=================================

Each candidate K is fitted with restarts and scored by -2 loglik + lambda K.
"""

import numpy as np

from mmattn import SelectionConfig, select_k
from mmattn.selection import choose_k
from mmattn.synthetic import separated_blobs

for true_k in (1, 2, 3):
    data, _ = separated_blobs(np.random.default_rng([1, true_k]), true_k)
    rep = select_k(data, SelectionConfig(lam=5.0, k_max=4))
    print(f"true K={true_k} -> chosen K={rep.chosen_k}")
    for r in rep.per_k:
        print(f"    k={r.k}  loglik={r.loglik:9.4f}  criterion={r.criterion:9.4f}")

# %%
# The stored per-k log-likelihoods can be re-scored for any lambda without
# refitting. Larger penalties never pick more components.
ks = [r.k for r in rep.per_k]
lls = [r.loglik for r in rep.per_k]
for lam in (0.1, 1.0, 5.0, 25.0, 125.0):
    print(f"lambda={lam:6.1f} -> K={choose_k(ks, lls, lam)}")
