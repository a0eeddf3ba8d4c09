"""Gaussian RBF feature functions fitted to discrete feature grids."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .gauss2d import Gaussian2, Spd2, log_pdf_batch

# conditioning above which the ridge system is reported as singular
MAX_CONDITION = 1e14


class SingularSystem(np.linalg.LinAlgError):
    pass


def cell_centers(height: int, width: int) -> np.ndarray:
    """Centers of an ``height x width`` grid in the unit square, row-major, shape ``(H*W, 2)``.

    Cell ``(i, j)`` maps to ``((j + 0.5) / W, (i + 0.5) / H)``.
    """
    if height < 1 or width < 1:
        raise ValueError(f"grid dimensions must be positive, got {height}x{width}")
    v = (np.arange(height) + 0.5) / height
    u = (np.arange(width) + 0.5) / width
    uu, vv = np.meshgrid(u, v)
    return np.column_stack([uu.ravel(), vv.ravel()])


@dataclass(frozen=True)
class RBFBasis:
    """N bivariate Gaussian basis functions, stored stacked."""

    means: np.ndarray  # (N, 2)
    covs: np.ndarray  # (N, 2, 2)

    def __post_init__(self):
        means = np.asarray(self.means, dtype=float).reshape(-1, 2)
        covs = np.asarray(self.covs, dtype=float).reshape(-1, 2, 2)
        if len(means) < 1 or len(means) != len(covs):
            raise ValueError("basis needs at least one component and matching means/covariances")
        for m, c in zip(means, covs):
            Gaussian2(m, Spd2.from_matrix(c))
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "covs", covs)

    @classmethod
    def from_components(cls, components) -> "RBFBasis":
        components = list(components)
        return cls(np.array([g.mean for g in components]), np.array([g.cov.matrix for g in components]))

    @property
    def size(self) -> int:
        return len(self.means)

    @property
    def components(self) -> list[Gaussian2]:
        return [Gaussian2(m, Spd2.from_matrix(c)) for m, c in zip(self.means, self.covs)]


def make_grid_basis(side: int, var: float) -> RBFBasis:
    """``side**2`` isotropic RBFs with means on a lattice spanning ``[0, 1]^2``.

    Lattice points sit at ``i / (side - 1)`` (both endpoints included); a
    single-point lattice sits at 0.5.
    """
    if side < 1:
        raise ValueError(f"side must be >= 1, got {side}")
    if not var > 0:
        raise ValueError(f"basis variance must be positive, got {var}")
    ticks = np.array([0.5]) if side == 1 else np.linspace(0.0, 1.0, side)
    uu, vv = np.meshgrid(ticks, ticks, indexing="ij")
    means = np.column_stack([uu.ravel(), vv.ravel()])
    covs = np.broadcast_to(var * np.eye(2), (len(means), 2, 2)).copy()
    return RBFBasis(means, covs)


def eval_psi(basis: RBFBasis, x) -> np.ndarray:
    """Basis responses at ``x``: shape ``(N,)`` for one point, ``(L, N)`` for ``(L, 2)``."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    out = np.exp(log_pdf_batch(basis.means, basis.covs, x.reshape(-1, 2)))
    return out[0] if single else out


@dataclass(frozen=True)
class FeatureGrid:
    locations: np.ndarray  # (L, 2)
    features: np.ndarray  # (D, L)

    def __post_init__(self):
        locations = np.asarray(self.locations, dtype=float)
        features = np.asarray(self.features, dtype=float)
        if features.ndim == 1:
            features = features[None]
        if locations.ndim != 2 or locations.shape[1] != 2 or len(locations) < 1:
            raise ValueError(f"locations must have shape (L, 2), got {locations.shape}")
        if features.ndim != 2 or features.shape[1] != len(locations) or features.shape[0] < 1:
            raise ValueError(f"features must have shape (D, {len(locations)}), got {features.shape}")
        if not (np.all(np.isfinite(locations)) and np.all(np.isfinite(features))):
            raise ValueError("feature grid contains non-finite values")
        if np.any(locations < 0.0) or np.any(locations > 1.0):
            raise ValueError("grid locations must lie in the unit square")
        object.__setattr__(self, "locations", locations)
        object.__setattr__(self, "features", features)

    @classmethod
    def from_array(cls, features) -> "FeatureGrid":
        """Build from a ``(D, H, W)`` feature map using cell-center locations."""
        features = np.asarray(features, dtype=float)
        d, h, w = features.shape
        return cls(cell_centers(h, w), features.reshape(d, h * w))

    @property
    def dim(self) -> int:
        return self.features.shape[0]

    def __len__(self) -> int:
        return len(self.locations)


@dataclass(frozen=True)
class FeatureFunction:
    """Continuous feature map ``x -> B psi(x)``."""

    basis: RBFBasis
    coeffs: np.ndarray  # (D, N)

    def __post_init__(self):
        coeffs = np.asarray(self.coeffs, dtype=float)
        if coeffs.ndim == 1:
            coeffs = coeffs[None]
        if coeffs.ndim != 2 or coeffs.shape[1] != self.basis.size:
            raise ValueError(f"coefficients must have {self.basis.size} columns, got shape {coeffs.shape}")
        object.__setattr__(self, "coeffs", coeffs)

    @property
    def dim(self) -> int:
        return self.coeffs.shape[0]


def design_matrix(basis: RBFBasis, locations) -> np.ndarray:
    """``Psi[j, l] = psi_j(x_l)``, shape ``(N, L)``."""
    return eval_psi(basis, np.asarray(locations, dtype=float).reshape(-1, 2)).T


def fit_ridge(grid: FeatureGrid, basis: RBFBasis, penalty: float) -> FeatureFunction:
    """Ridge regression ``B = V Psi^T (Psi Psi^T + penalty I)^-1``.

    Solves the N x N primal system by Cholesky.

    Raises
    ------
    SingularSystem
        If the regularized Gram matrix has condition number above 1e14.
    """
    if not penalty > 0:
        raise ValueError(f"ridge penalty must be positive, got {penalty}")
    psi = design_matrix(basis, grid.locations)
    gram = psi @ psi.T
    gram[np.diag_indices_from(gram)] += penalty
    # gram is SPD, so cond = max/min eigenvalue
    eig = np.linalg.eigvalsh(gram)
    cond = eig[-1] / eig[0] if eig[0] > 0 else np.inf
    if cond > MAX_CONDITION:
        raise SingularSystem(f"ridge system is numerically singular (condition {cond:.3g})")
    rhs = psi @ grid.features.T  # (N, D)
    coeffs = scipy.linalg.cho_solve(scipy.linalg.cho_factor(gram), rhs).T
    return FeatureFunction(basis, coeffs)


def eval_feature(f: FeatureFunction, x) -> np.ndarray:
    """``B psi(x)``; shape ``(D,)`` for one point, ``(L, D)`` for ``(L, 2)`` points."""
    return eval_psi(f.basis, x) @ f.coeffs.T
