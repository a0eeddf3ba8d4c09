"""
Comparing attention maps
========================

Discrete, unimodal and multimodal attention densities are discretized on the
same grid and ranked by Jensen-Shannon divergence (in bits) to a reference.
"""

import numpy as np

from mmattn import DensityGrid, MixtureParams, SelectionConfig, WeightedDataset, compare_models, discretize, select_k
from mmattn.attention import moment_match
from mmattn.synthetic import separated_blobs

h = w = 32
clean, truth = separated_blobs(np.random.default_rng(5), 3, side=h)
rng = np.random.default_rng(6)
noisy = WeightedDataset(clean.locations, clean.weights * np.exp(0.3 * rng.standard_normal(len(clean))))

reference = discretize(truth, h, w)
discrete = DensityGrid(noisy.weights.reshape(h, w))
unimodal = discretize(MixtureParams.from_components([(1.0, moment_match(noisy))]), h, w)
multimodal = discretize(select_k(noisy, SelectionConfig()).chosen_params, h, w)

for rank, (name, js) in enumerate(
    compare_models(reference, [("discrete", discrete), ("unimodal", unimodal), ("multimodal", multimodal)]), 1
):
    print(f"{rank}. {name:<10s} JS = {js:.4f}")
