"""Discrete, unimodal and multimodal (Gaussian mixture) attention.

Continuous context vectors are expectations of a Gaussian-RBF feature
function under the attention density. For a Gaussian density every basis
expectation is a Gaussian product integral, so the forward pass and its
Jacobians are closed form; a mixture density just mixes the per-component
contexts with its mixing weights.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import softmax

from .basis import FeatureFunction, FeatureGrid
from .em import MixtureParams, WeightedDataset, _weighted_cov, floor_covariance
from .gauss2d import Gaussian2, Spd2, product_integral_batch, product_integral_grad_batch


@dataclass(frozen=True)
class ContextVector:
    value: np.ndarray  # (D,)
    pis: np.ndarray  # (K,)
    parts: np.ndarray  # (K, D) per-component contexts c_k

    @property
    def per_component(self) -> list[tuple[float, np.ndarray]]:
        return [(float(p), c) for p, c in zip(self.pis, self.parts)]

    def to_dict(self) -> dict:
        return {
            "value": self.value.tolist(),
            "per_component": [{"pi": p, "context": c.tolist()} for p, c in self.per_component],
        }


@dataclass(frozen=True)
class AttentionGradients:
    """Jacobians of the context vector and their contractions with an upstream gradient.

    Covariance derivatives use the ``(a, b, c)`` encoding of ``[[a, b], [b, c]]``:
    the ``b`` column already includes the factor 2 from the two symmetric
    off-diagonal entries. Mixing-weight derivatives are raw partials (no
    simplex projection).
    """

    d_mean: np.ndarray  # (K, D, 2)
    d_cov: np.ndarray  # (K, D, 3)
    d_pi: np.ndarray  # (K, D)
    grad_mean: np.ndarray  # (K, 2)
    grad_cov: np.ndarray  # (K, 3)
    grad_pi: np.ndarray  # (K,)

    def to_dict(self) -> dict:
        return {k: getattr(self, k).tolist() for k in ("grad_mean", "grad_cov", "grad_pi", "d_mean", "d_cov", "d_pi")}


def softmax_weights(scores) -> np.ndarray:
    scores = np.asarray(scores, dtype=float)
    if not np.all(np.isfinite(scores)):
        raise ValueError("scores must be finite")
    return softmax(scores)


def discrete_context(grid: FeatureGrid, p) -> np.ndarray:
    """``V p``: the probability-weighted average of the feature columns."""
    p = np.asarray(p, dtype=float)
    if p.shape != (len(grid),):
        raise ValueError(f"attention weights have shape {p.shape}, expected ({len(grid)},)")
    return grid.features @ p


def moment_match(data: WeightedDataset) -> Gaussian2:
    """Single Gaussian with the data's weighted mean and (floored) covariance."""
    mean = data.weights @ data.locations
    cov = floor_covariance(_weighted_cov(data.locations, data.weights, mean))
    return Gaussian2(mean, Spd2.from_matrix(cov))


def _as_mixture(m) -> MixtureParams:
    if isinstance(m, Gaussian2):
        return MixtureParams.from_components([(1.0, m)])
    return m


def _basis_expectations(f: FeatureFunction, m: MixtureParams) -> np.ndarray:
    """``r[k, j] = E_{p_k}[psi_j]``, shape ``(K, N)``."""
    return product_integral_batch(m.means, m.covs, f.basis.means, f.basis.covs)


def _component_contexts(r: np.ndarray, coeffs: np.ndarray) -> np.ndarray:
    """``c_k = B r_k`` row by row, so each row is independent of K (BLAS blocking is not)."""
    return np.einsum("kn,dn->kd", r, coeffs)


def unimodal_context(f: FeatureFunction, g: Gaussian2) -> ContextVector:
    """``B E_g[psi(x)]`` for a single Gaussian density."""
    return multimodal_context(f, _as_mixture(g))


def multimodal_context(f: FeatureFunction, m: MixtureParams) -> ContextVector:
    """``sum_k pi_k c_k`` with ``c_k = B E_{p_k}[psi(x)]``."""
    m = _as_mixture(m)
    parts = _component_contexts(_basis_expectations(f, m), f.coeffs)  # (K, D)
    return ContextVector(m.pis @ parts, np.array(m.pis), parts)


def multimodal_backward(f: FeatureFunction, m: MixtureParams, upstream) -> AttentionGradients:
    """Closed-form Jacobians of :func:`multimodal_context` and their VJPs with ``upstream``."""
    m = _as_mixture(m)
    upstream = np.asarray(upstream, dtype=float)
    if upstream.shape != (f.dim,):
        raise ValueError(f"upstream gradient has shape {upstream.shape}, expected ({f.dim},)")
    r, dmean, dcov = product_integral_grad_batch(m.means, m.covs, f.basis.means, f.basis.covs)
    dcov_abc = np.stack([dcov[..., 0, 0], 2.0 * dcov[..., 0, 1], dcov[..., 1, 1]], axis=-1)  # (K, N, 3)
    pis = np.asarray(m.pis)
    B = f.coeffs
    d_pi = _component_contexts(r, B)
    d_mean = pis[:, None, None] * np.einsum("dn,kni->kdi", B, dmean)
    d_cov = pis[:, None, None] * np.einsum("dn,kni->kdi", B, dcov_abc)
    return AttentionGradients(
        d_mean=d_mean,
        d_cov=d_cov,
        d_pi=d_pi,
        grad_mean=np.einsum("d,kdi->ki", upstream, d_mean),
        grad_cov=np.einsum("d,kdi->ki", upstream, d_cov),
        grad_pi=d_pi @ upstream,
    )
