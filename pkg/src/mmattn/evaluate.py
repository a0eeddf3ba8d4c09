"""Grid discretization of attention densities and Jensen-Shannon comparison."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .basis import cell_centers
from .em import MixtureParams


class GridMismatch(ValueError):
    def __init__(self, message: str, name: str | None = None):
        super().__init__(message)
        self.name = name


@dataclass(frozen=True)
class DensityGrid:
    """Nonnegative ``H x W`` mass map summing to one."""

    mass: np.ndarray

    def __post_init__(self):
        mass = np.array(self.mass, dtype=float)
        if mass.ndim != 2 or mass.size == 0:
            raise ValueError(f"density grid must be a non-empty 2-D array, got shape {mass.shape}")
        if not np.all(np.isfinite(mass)) or np.any(mass < 0):
            raise ValueError("density grid entries must be finite and nonnegative")
        if abs(mass.sum() - 1.0) > 1e-9:
            raise ValueError(f"density grid must sum to 1, got {mass.sum()!r}")
        mass.flags.writeable = False
        object.__setattr__(self, "mass", mass)

    @classmethod
    def normalized(cls, values) -> "DensityGrid":
        values = np.asarray(values, dtype=float)
        total = values.sum()
        if not total > 0:
            raise ValueError("cannot normalize a grid with no positive mass")
        return cls(values / total)

    @property
    def height(self) -> int:
        return self.mass.shape[0]

    @property
    def width(self) -> int:
        return self.mass.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.mass.shape


def cell_mass(m: MixtureParams, height: int, width: int) -> np.ndarray:
    """Mixture density at each cell center times the cell area (not renormalized)."""
    centers = cell_centers(height, width)
    return np.exp(m.log_density(centers)).reshape(height, width) / (height * width)


def discretize(m: MixtureParams, height: int, width: int) -> DensityGrid:
    """Cell masses renormalized to one.

    Normalization happens in the log domain, so a density too tight to be
    representable at any cell center still yields a valid grid.
    """
    logd = m.log_density(cell_centers(height, width)).reshape(height, width)
    return DensityGrid.normalized(np.exp(logd - logd.max()))


def _kl2_to_mid(p: np.ndarray, q: np.ndarray) -> float:
    """KL(p || (p + q) / 2) in bits, written so the midpoint never underflows."""
    nz = p > 0
    pn = p[nz]
    return float(np.sum(pn * (1.0 + np.log2(pn / (pn + q[nz])))))


def js_divergence(p: DensityGrid, q: DensityGrid) -> float:
    """Jensen-Shannon divergence in bits (bounded by 1)."""
    if p.shape != q.shape:
        raise GridMismatch(f"grid shapes differ: {p.shape} vs {q.shape}")
    a, b = p.mass.ravel(), q.mass.ravel()
    js = 0.5 * _kl2_to_mid(a, b) + 0.5 * _kl2_to_mid(b, a)
    return min(max(js, 0.0), 1.0)


def compare_models(reference: DensityGrid, candidates) -> list[tuple[str, float]]:
    """Candidates ``(name, grid)`` ranked by ascending divergence from ``reference``.

    The sort is stable, so equal divergences keep their input order.
    """
    scored = []
    for name, grid in candidates:
        if grid.shape != reference.shape:
            raise GridMismatch(f"{name}: grid shape {grid.shape} does not match reference {reference.shape}", name)
        scored.append((name, js_divergence(reference, grid)))
    return sorted(scored, key=lambda item: item[1])
