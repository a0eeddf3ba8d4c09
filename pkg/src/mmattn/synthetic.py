"""Seeded synthetic weight maps and feature grids for tests, demos and harnesses."""
from __future__ import annotations

import numpy as np

from .basis import FeatureGrid, cell_centers
from .em import MixtureParams, WeightedDataset


def random_spd(rng: np.random.Generator, lo: float, hi: float, size: int | None = None) -> np.ndarray:
    """Random covariances with eigenvalues log-uniform in ``[lo, hi]`` and random orientation."""
    n = 1 if size is None else size
    eig = np.exp(rng.uniform(np.log(lo), np.log(hi), size=(n, 2)))
    theta = rng.uniform(0, np.pi, size=n)
    c, s = np.cos(theta), np.sin(theta)
    rot = np.stack([np.stack([c, -s], -1), np.stack([s, c], -1)], -2)  # (n, 2, 2)
    covs = np.einsum("nij,nj,nkj->nik", rot, eig, rot)
    covs[:, 1, 0] = covs[:, 0, 1]
    return covs[0] if size is None else covs


def random_mixture(
    rng: np.random.Generator,
    n_components: int,
    var_range: tuple[float, float] = (0.002, 0.05),
    mean_range: tuple[float, float] = (0.15, 0.85),
) -> MixtureParams:
    pis = rng.dirichlet(np.full(n_components, 2.0))
    pis = np.maximum(pis, 0.02)
    return MixtureParams(
        pis / pis.sum(),
        rng.uniform(*mean_range, size=(n_components, 2)),
        random_spd(rng, *var_range, size=n_components),
    )


def blob_weights(
    rng: np.random.Generator,
    height: int,
    width: int,
    n_blobs: int,
    noise: float = 0.3,
    var_range: tuple[float, float] = (0.002, 0.05),
) -> tuple[WeightedDataset, MixtureParams]:
    """Weight map from a random Gaussian mixture with multiplicative log-normal noise.

    Returns the weights and the generating mixture.
    """
    truth = random_mixture(rng, n_blobs, var_range)
    x = cell_centers(height, width)
    w = np.exp(truth.log_density(x) + noise * rng.standard_normal(len(x)))
    return WeightedDataset(x, w), truth


def separated_blobs(
    rng: np.random.Generator,
    n_blobs: int,
    side: int = 32,
    sigma: float = 1.0 / 128,
    min_separation: float = 0.25,
    width: int | None = None,
) -> tuple[WeightedDataset, MixtureParams]:
    """Isotropic blobs centered on cells of a ``side x width`` grid, pairwise at least ``min_separation`` apart.

    ``width`` defaults to ``side``. The default ``sigma`` is a quarter of a cell
    of the default 32 x 32 grid, so each blob is close to a point mass.

    Returns the weight map and the generating mixture. Blob weights are drawn
    uniformly from ``[0.5, 1]`` before normalization.
    """
    if min_separation < 6 * sigma:
        raise ValueError("blobs must be at least 6 sigma apart")
    width = side if width is None else width
    cells = np.array([width, side])
    for _ in range(10_000):
        centers = (np.floor(rng.uniform(0.05, 0.95, size=(n_blobs, 2)) * cells) + 0.5) / cells
        d = np.sqrt(((centers[:, None] - centers[None]) ** 2).sum(-1))
        if n_blobs == 1 or d[np.triu_indices(n_blobs, 1)].min() >= min_separation:
            break
    else:
        raise RuntimeError(f"could not place {n_blobs} blobs {min_separation} apart")
    pis = rng.uniform(0.5, 1.0, n_blobs)
    truth = MixtureParams(pis / pis.sum(), centers, np.broadcast_to(sigma**2 * np.eye(2), (n_blobs, 2, 2)))
    x = cell_centers(side, width)
    return WeightedDataset(x, np.exp(truth.log_density(x))), truth


def feature_grid(rng: np.random.Generator, height: int, width: int, dim: int, smooth: float = 0.15) -> FeatureGrid:
    """Smooth random features: each channel is a random combination of a few wide bumps."""
    x = cell_centers(height, width)
    centers = rng.uniform(0, 1, size=(6, 2))
    bumps = np.exp(-((x[:, None] - centers[None]) ** 2).sum(-1) / (2 * smooth**2))  # (L, 6)
    feats = rng.standard_normal((dim, 6)) @ bumps.T
    return FeatureGrid(x, feats)
