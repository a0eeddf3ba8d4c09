"""Bivariate Gaussian primitives.

Covariances are 2x2 and handled in closed form. Scalar value types
(:class:`Spd2`, :class:`Gaussian2`) validate once at construction; the
``*_batch`` helpers operate on stacked ``(K, 2)`` means and ``(K, 2, 2)``
covariances and assume their inputs were validated upstream.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

LOG_2PI = math.log(2.0 * math.pi)

# relative tolerance on det(S) against a*c
SPD_RTOL = 1e-12


class NotPositiveDefinite(ValueError):
    pass


@dataclass(frozen=True)
class Spd2:
    """Symmetric positive-definite matrix ``[[a, b], [b, c]]``."""

    a: float
    b: float
    c: float

    def __post_init__(self):
        a, b, c = float(self.a), float(self.b), float(self.c)
        if not (math.isfinite(a) and math.isfinite(b) and math.isfinite(c)):
            raise NotPositiveDefinite(f"non-finite covariance entries ({a}, {b}, {c})")
        if a <= 0.0 or c <= 0.0 or a * c - b * b <= SPD_RTOL * a * c:
            raise NotPositiveDefinite(f"covariance [[{a}, {b}], [{b}, {c}]] is not positive definite")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", c)

    @classmethod
    def from_matrix(cls, m) -> "Spd2":
        m = np.asarray(m, dtype=float)
        if m.shape != (2, 2):
            raise NotPositiveDefinite(f"expected a 2x2 matrix, got shape {m.shape}")
        if m[0, 1] != m[1, 0]:
            raise NotPositiveDefinite("covariance matrix is not symmetric")
        return cls(m[0, 0], m[0, 1], m[1, 1])

    @classmethod
    def isotropic(cls, var: float) -> "Spd2":
        return cls(var, 0.0, var)

    @property
    def det(self) -> float:
        return self.a * self.c - self.b * self.b

    def inv(self) -> "Spd2":
        d = self.det
        return Spd2(self.c / d, -self.b / d, self.a / d)

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[self.a, self.b], [self.b, self.c]])

    def __add__(self, other: "Spd2") -> "Spd2":
        return Spd2(self.a + other.a, self.b + other.b, self.c + other.c)


@dataclass(frozen=True)
class Gaussian2:
    mean: tuple
    cov: Spd2

    def __post_init__(self):
        mean = tuple(float(v) for v in np.asarray(self.mean, dtype=float).reshape(-1))
        if len(mean) != 2 or not all(math.isfinite(v) for v in mean):
            raise ValueError(f"mean must be two finite reals, got {self.mean!r}")
        if not isinstance(self.cov, Spd2):
            object.__setattr__(self, "cov", Spd2.from_matrix(self.cov))
        object.__setattr__(self, "mean", mean)


def _quad_form(a, b, c, du, dv):
    """(du, dv) S^-1 (du, dv)^T for S = [[a, b], [b, c]]."""
    det = a * c - b * b
    return (c * du * du - 2.0 * b * du * dv + a * dv * dv) / det, det


def log_pdf(g: Gaussian2, x) -> np.ndarray | float:
    """Log density of ``g`` at ``x`` (shape ``(2,)`` or ``(..., 2)``)."""
    x = np.asarray(x, dtype=float)
    du = x[..., 0] - g.mean[0]
    dv = x[..., 1] - g.mean[1]
    q, det = _quad_form(g.cov.a, g.cov.b, g.cov.c, du, dv)
    out = -LOG_2PI - 0.5 * math.log(det) - 0.5 * q
    return float(out) if np.ndim(out) == 0 else out


def pdf(g: Gaussian2, x) -> np.ndarray | float:
    out = np.exp(log_pdf(g, x))
    return float(out) if np.ndim(out) == 0 else out


def product_integral(g1: Gaussian2, g2: Gaussian2) -> float:
    """Closed form of ``int N(x; mu1, S1) N(x; mu2, S2) dx = N(mu1; mu2, S1 + S2)``."""
    a = g1.cov.a + g2.cov.a
    b = g1.cov.b + g2.cov.b
    c = g1.cov.c + g2.cov.c
    q, det = _quad_form(a, b, c, g1.mean[0] - g2.mean[0], g1.mean[1] - g2.mean[1])
    return math.exp(-LOG_2PI - 0.5 * math.log(det) - 0.5 * q)


def product_integral_grad(g1: Gaussian2, g2: Gaussian2) -> tuple[np.ndarray, np.ndarray]:
    """Derivatives of :func:`product_integral` with respect to ``g1``'s parameters.

    Returns
    -------
    dmean : ndarray, shape (2,)
        ``r S^-1 (mu2 - mu1)``.
    dcov : ndarray, shape (2, 2)
        Symmetric matrix ``r/2 (S^-1 d d^T S^-1 - S^-1)`` with ``d = mu2 - mu1``.
        Entries are partials with respect to a full (unconstrained) matrix; in the
        ``(a, b, c)`` encoding ``dr/db = 2 * dcov[0, 1]``.
    """
    dmean, dcov = product_integral_grad_batch(
        np.asarray(g1.mean)[None], g1.cov.matrix[None], np.asarray(g2.mean)[None], g2.cov.matrix[None]
    )[1:]
    return dmean[0, 0], dcov[0, 0]


# ---------------------------------------------------------------------------
# stacked helpers


def log_pdf_batch(means: np.ndarray, covs: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Log densities of K Gaussians at L points, shape ``(L, K)``."""
    a, b, c = covs[:, 0, 0], covs[:, 0, 1], covs[:, 1, 1]
    du = x[:, 0, None] - means[None, :, 0]
    dv = x[:, 1, None] - means[None, :, 1]
    q, det = _quad_form(a, b, c, du, dv)
    return -LOG_2PI - 0.5 * np.log(det) - 0.5 * q


def product_integral_batch(m1: np.ndarray, c1: np.ndarray, m2: np.ndarray, c2: np.ndarray) -> np.ndarray:
    """Table ``r[k, j] = N(m1[k]; m2[j], c1[k] + c2[j])``, shape ``(K, J)``."""
    s = c1[:, None] + c2[None, :]
    d = m1[:, None] - m2[None, :]
    q, det = _quad_form(s[..., 0, 0], s[..., 0, 1], s[..., 1, 1], d[..., 0], d[..., 1])
    return np.exp(-LOG_2PI - 0.5 * np.log(det) - 0.5 * q)


def product_integral_grad_batch(m1, c1, m2, c2):
    """Product-integral table and its derivatives with respect to ``(m1, c1)``.

    Returns ``(r, dmean, dcov)`` with shapes ``(K, J)``, ``(K, J, 2)`` and
    ``(K, J, 2, 2)``; see :func:`product_integral_grad` for the convention.
    """
    s = c1[:, None] + c2[None, :]
    a, b, c = s[..., 0, 0], s[..., 0, 1], s[..., 1, 1]
    det = a * c - b * b
    ia, ib, ic = c / det, -b / det, a / det
    du = m2[None, :, 0] - m1[:, None, 0]
    dv = m2[None, :, 1] - m1[:, None, 1]
    # S^-1 d
    su = ia * du + ib * dv
    sv = ib * du + ic * dv
    # same table as the forward pass, bit for bit
    r = product_integral_batch(m1, c1, m2, c2)
    dmean = np.stack([r * su, r * sv], axis=-1)
    half = 0.5 * r
    dcov = np.empty(s.shape)
    dcov[..., 0, 0] = half * (su * su - ia)
    dcov[..., 0, 1] = half * (su * sv - ib)
    dcov[..., 1, 0] = dcov[..., 0, 1]
    dcov[..., 1, 1] = half * (sv * sv - ic)
    return r, dmean, dcov
