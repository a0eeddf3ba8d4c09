import math
import sys
from pathlib import Path

import numpy as np
import pytest

from mmattn import FeatureFunction, MixtureParams, make_grid_basis
from mmattn.synthetic import random_mixture

DATA = Path(__file__).parent / "data"


def pytest_terminal_summary(terminalreporter):
    acceptance = sys.modules.get("test_acceptance")
    if acceptance is not None and acceptance.SUMMARY:
        terminalreporter.section("acceptance criteria")
        for line in sorted(acceptance.SUMMARY, key=lambda l: int(l.split()[1])):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def paper_basis():
    return make_grid_basis(10, 0.001)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def scalar_gauss_pdf(mean, cov, x):
    """Independent scalar transcription of the bivariate normal density."""
    (a, b), (_, c) = cov
    det = a * c - b * b
    du, dv = x[0] - mean[0], x[1] - mean[1]
    q = (c * du * du - 2 * b * du * dv + a * dv * dv) / det
    return math.exp(-0.5 * q) / (2 * math.pi * math.sqrt(det))


def trapezoid_weights(lo, hi, n):
    grid = np.linspace(lo, hi, n)
    w = np.full(n, grid[1] - grid[0])
    w[[0, -1]] *= 0.5
    return grid, w


def quadrature_context(f: FeatureFunction, m: MixtureParams, lo=-1.0, hi=2.0, n=600):
    """Trapezoidal quadrature of int p(x) B psi(x) dx over [lo, hi]^2.

    Uses that each isotropic basis function factorizes as g(u) g(v).
    """
    g, w = trapezoid_weights(lo, hi, n)
    uu, vv = np.meshgrid(g, g, indexing="ij")
    pts = np.column_stack([uu.ravel(), vv.ravel()])
    dens = np.exp(m.log_density(pts)).reshape(n, n) * w[:, None] * w[None, :]
    var_u = f.basis.covs[:, 0, 0]
    var_v = f.basis.covs[:, 1, 1]
    assert np.all(f.basis.covs[:, 0, 1] == 0), "quadrature oracle needs axis-aligned basis"
    gu = np.exp(-((g[None] - f.basis.means[:, 0, None]) ** 2) / (2 * var_u[:, None])) / np.sqrt(2 * np.pi * var_u[:, None])
    gv = np.exp(-((g[None] - f.basis.means[:, 1, None]) ** 2) / (2 * var_v[:, None])) / np.sqrt(2 * np.pi * var_v[:, None])
    r = np.einsum("ju,uv,jv->j", gu, dens, gv)
    return f.coeffs @ r


def central_difference(fn, x0: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """Central differences of a vector-valued ``fn`` along every coordinate of ``x0``.

    Returns shape ``(fn_dim, x0.size)``.
    """
    x0 = np.asarray(x0, dtype=float).ravel()
    cols = []
    for i in range(x0.size):
        xp, xm = x0.copy(), x0.copy()
        xp[i] += h
        xm[i] -= h
        cols.append((np.atleast_1d(fn(xp)) - np.atleast_1d(fn(xm))) / (2 * h))
    return np.stack(cols, axis=-1)


def column_close(analytic, fd, rtol=1e-5, atol=1e-9):
    """Per-column relative agreement: |a - f| <= rtol * max|f in column| + atol."""
    analytic = np.atleast_2d(analytic)
    fd = np.atleast_2d(fd)
    scale = np.abs(fd).max(axis=0, keepdims=True)
    return np.abs(analytic - fd) <= rtol * scale + atol


def mixture_instance(rng, n_components=None, var_range=(0.005, 0.05), dim=8, n_basis_side=10):
    k = int(rng.integers(1, 5)) if n_components is None else n_components
    m = random_mixture(rng, k, var_range=var_range)
    basis = make_grid_basis(n_basis_side, 0.001)
    return FeatureFunction(basis, rng.standard_normal((dim, basis.size))), m


def mixture_from_vector(theta: np.ndarray, k: int) -> tuple:
    """Unpack ``[pis (k), means (2k), covs abc (3k)]`` into stacked arrays without validation."""
    pis = theta[:k]
    means = theta[k : 3 * k].reshape(k, 2)
    abc = theta[3 * k :].reshape(k, 3)
    covs = np.empty((k, 2, 2))
    covs[:, 0, 0], covs[:, 0, 1], covs[:, 1, 0], covs[:, 1, 1] = abc[:, 0], abc[:, 1], abc[:, 1], abc[:, 2]
    return pis, means, covs


def mixture_to_vector(m: MixtureParams) -> np.ndarray:
    abc = np.stack([m.covs[:, 0, 0], m.covs[:, 0, 1], m.covs[:, 1, 1]], axis=-1)
    return np.concatenate([m.pis, m.means.ravel(), abc.ravel()])


def clip_eigenvalues(cov: np.ndarray, eps: float = 1e-6) -> np.ndarray:
    lam, vec = np.linalg.eigh(cov)
    if lam[0] >= eps:
        return cov
    out = vec @ np.diag(np.maximum(lam, eps)) @ vec.T
    return 0.5 * (out + out.T)


def textbook_em(x: np.ndarray, pis, means, covs, iters: int):
    """Unweighted EM written per component with explicit loops.

    Returns the list of ``(pis, means, covs)`` after every iteration.
    """
    pis, means, covs = np.array(pis, float), np.array(means, float), np.array(covs, float)
    n, k = len(x), len(pis)
    out = []
    for _ in range(iters):
        logp = np.empty((n, k))
        for j in range(k):
            d = x - means[j]
            inv = np.linalg.inv(covs[j])
            q = np.einsum("ni,ij,nj->n", d, inv, d)
            logp[:, j] = np.log(pis[j]) - 0.5 * q - np.log(2 * np.pi) - 0.5 * np.log(np.linalg.det(covs[j]))
        top = logp.max(axis=1, keepdims=True)
        resp = np.exp(logp - top)
        resp /= resp.sum(axis=1, keepdims=True)
        nk = resp.sum(axis=0)
        new_means = np.empty_like(means)
        new_covs = np.empty_like(covs)
        for j in range(k):
            new_means[j] = resp[:, j] @ x / nk[j]
            d = x - new_means[j]
            new_covs[j] = clip_eigenvalues((resp[:, j, None] * d).T @ d / nk[j])
        pis, means, covs = nk / n, new_means, new_covs
        out.append((pis.copy(), means.copy(), covs.copy()))
    return out


def context_from_vector(f: FeatureFunction, theta: np.ndarray, k: int) -> np.ndarray:
    """``sum_k pi_k B E_k[psi]`` for raw parameters (pis need not be on the simplex)."""
    from mmattn.gauss2d import product_integral_batch

    pis, means, covs = mixture_from_vector(theta, k)
    r = product_integral_batch(means, covs, f.basis.means, f.basis.covs)
    return pis @ (r @ f.coeffs.T)


def analytic_jacobian(grads, k: int) -> np.ndarray:
    """Stack AttentionGradients into ``(D, 6k)`` in :func:`mixture_to_vector` order."""
    cols = [grads.d_pi.T]
    cols += [grads.d_mean.transpose(1, 0, 2).reshape(grads.d_mean.shape[1], 2 * k)]
    cols += [grads.d_cov.transpose(1, 0, 2).reshape(grads.d_cov.shape[1], 3 * k)]
    return np.concatenate(cols, axis=1)
