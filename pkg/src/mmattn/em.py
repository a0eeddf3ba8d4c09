"""Weighted-data EM for two-dimensional Gaussian mixtures.

Each observation is a grid location with a nonnegative importance weight.
The objective is ``sum_l w_l log sum_k pi_k N(x_l; mu_k, Sigma_k)`` with the
weights normalized to sum to one; with uniform weights every update reduces
to the textbook EM iteration.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .basis import cell_centers
from .gauss2d import Gaussian2, Spd2, log_pdf_batch

COV_FLOOR = 1e-6
COLLAPSE_PI = 1e-12
DEFAULT_TOL = 1e-6


class ComponentCollapse(ArithmeticError):
    """A mixture component lost (numerically) all of its mass.

    ``params`` holds the last valid parameters when raised from :func:`run_em`;
    ``component`` is the index of the collapsed component.
    """

    def __init__(self, component: int, pi: float, params: "MixtureParams | None" = None, loglik_trace=()):
        super().__init__(f"component {component} collapsed (pi = {pi:.3g})")
        self.component = component
        self.pi = pi
        self.params = params
        self.loglik_trace = list(loglik_trace)


@dataclass(frozen=True)
class WeightedDataset:
    """Grid locations with weights normalized to sum to one."""

    locations: np.ndarray  # (L, 2)
    weights: np.ndarray  # (L,)

    def __post_init__(self):
        x = np.asarray(self.locations, dtype=float)
        w = np.asarray(self.weights, dtype=float)
        if x.ndim != 2 or x.shape[1] != 2 or w.shape != (len(x),):
            raise ValueError(f"expected (L, 2) locations and (L,) weights, got {x.shape} and {w.shape}")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(w))):
            raise ValueError("dataset contains non-finite values")
        if np.any(w < 0):
            raise ValueError("weights must be nonnegative")
        if np.any(x < 0.0) or np.any(x > 1.0):
            raise ValueError("locations must lie in the unit square")
        total = w.sum()
        if not total > 0:
            raise ValueError("at least one weight must be strictly positive")
        x = x.copy()
        x.flags.writeable = False
        w = w / total
        w.flags.writeable = False
        object.__setattr__(self, "locations", x)
        object.__setattr__(self, "weights", w)

    @classmethod
    def from_grid(cls, weights) -> "WeightedDataset":
        """From an ``H x W`` weight map (row-major, cell-center locations)."""
        weights = np.asarray(weights, dtype=float)
        if weights.ndim != 2:
            raise ValueError(f"weight map must be 2-D, got shape {weights.shape}")
        return cls(cell_centers(*weights.shape), weights.ravel())

    def __len__(self) -> int:
        return len(self.weights)

    @property
    def support_size(self) -> int:
        return int(np.count_nonzero(self.weights > 0))


@dataclass(frozen=True)
class MixtureParams:
    """Mixing weights ``(K,)``, means ``(K, 2)`` and covariances ``(K, 2, 2)``."""

    pis: np.ndarray
    means: np.ndarray
    covs: np.ndarray

    def __post_init__(self):
        pis = np.array(self.pis, dtype=float).reshape(-1)
        means = np.array(self.means, dtype=float).reshape(-1, 2)
        covs = np.array(self.covs, dtype=float).reshape(-1, 2, 2)
        if not (len(pis) == len(means) == len(covs) >= 1):
            raise ValueError("pis, means and covs must describe the same number (>= 1) of components")
        if np.any(pis <= 0) or np.any(pis > 1) or abs(pis.sum() - 1.0) > 1e-10:
            raise ValueError(f"mixing weights must lie in (0, 1] and sum to 1, got {pis}")
        for m, c in zip(means, covs):
            Gaussian2(m, Spd2.from_matrix(c))
        for arr in (pis, means, covs):
            arr.flags.writeable = False
        object.__setattr__(self, "pis", pis)
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "covs", covs)

    @classmethod
    def from_components(cls, components) -> "MixtureParams":
        """From ``(pi, Gaussian2)`` pairs."""
        components = list(components)
        return cls(
            [pi for pi, _ in components],
            [g.mean for _, g in components],
            [g.cov.matrix for _, g in components],
        )

    @property
    def n_components(self) -> int:
        return len(self.pis)

    @property
    def components(self) -> list[tuple[float, Gaussian2]]:
        return [
            (float(p), Gaussian2(m, Spd2.from_matrix(c)))
            for p, m, c in zip(self.pis, self.means, self.covs)
        ]

    def to_dict(self) -> dict:
        return {
            "components": [
                {"pi": float(p), "mean": [float(v) for v in m], "cov": [[float(v) for v in row] for row in c]}
                for p, m, c in zip(self.pis, self.means, self.covs)
            ]
        }

    @classmethod
    def from_dict(cls, obj) -> "MixtureParams":
        try:
            comps = obj["components"]
            pis = [float(c["pi"]) for c in comps]
            means = [[float(v) for v in c["mean"]] for c in comps]
            covs = [[[float(v) for v in row] for row in c["cov"]] for c in comps]
        except (KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"malformed mixture description: {exc}") from exc
        if any(len(m) != 2 for m in means) or any(len(c) != 2 or any(len(r) != 2 for r in c) for c in covs):
            raise ValueError("mixture means must be length 2 and covariances 2x2")
        return cls(pis, means, covs)

    def log_density(self, x) -> np.ndarray:
        """``log p(x)`` of the mixture at ``(L, 2)`` points."""
        x = np.asarray(x, dtype=float).reshape(-1, 2)
        return logsumexp(log_pdf_batch(self.means, self.covs, x) + np.log(self.pis), axis=1)


@dataclass
class EMReport:
    params: MixtureParams
    loglik_trace: list = field(default_factory=list)
    iterations_run: int = 0
    converged: bool = False

    @property
    def loglik(self) -> float:
        return self.loglik_trace[-1]


def floor_covariance(covs: np.ndarray, eps: float = COV_FLOOR) -> np.ndarray:
    """Raise every covariance eigenvalue below ``eps`` to ``eps``.

    Matrices already satisfying the bound are returned unchanged. Clipping is
    the maximizer of the M-step objective under the eigenvalue constraint, so
    EM stays monotone when the floor is active.
    """
    covs = np.array(covs, dtype=float)
    flat = covs.reshape(-1, 2, 2)
    a, b, c = flat[:, 0, 0], flat[:, 0, 1], flat[:, 1, 1]
    lam_min = 0.5 * (a + c) - np.hypot(0.5 * (a - c), b)
    low = lam_min < eps
    if np.any(low):
        lam, vec = np.linalg.eigh(flat[low])
        lam = np.maximum(lam, eps)
        fixed = np.einsum("nij,nj,nkj->nik", vec, lam, vec)
        fixed[:, 1, 0] = fixed[:, 0, 1]
        flat[low] = fixed
    return flat.reshape(covs.shape)


def _weighted_cov(x, w, mean):
    d = x - mean
    cov = (w[:, None] * d).T @ d
    cov[1, 0] = cov[0, 1]
    return cov


def _joint_log(data: WeightedDataset, params: MixtureParams) -> np.ndarray:
    return log_pdf_batch(params.means, params.covs, data.locations) + np.log(params.pis)


def weighted_loglik(data: WeightedDataset, params: MixtureParams) -> float:
    """``sum_l w_l log sum_k pi_k N(x_l; mu_k, Sigma_k)``."""
    return float(data.weights @ logsumexp(_joint_log(data, params), axis=1))


def e_step(data: WeightedDataset, params: MixtureParams) -> np.ndarray:
    """Responsibilities ``gamma[l, k]``, computed in the log domain; shape ``(L, K)``."""
    joint = _joint_log(data, params)
    return np.exp(joint - logsumexp(joint, axis=1, keepdims=True))


def m_step(data: WeightedDataset, resp: np.ndarray) -> MixtureParams:
    """Weighted re-estimation of ``(pi, mu, Sigma)`` from responsibilities.

    Raises
    ------
    ComponentCollapse
        If some component receives total weight below 1e-12.
    """
    x, w = data.locations, data.weights
    wr = w[:, None] * resp  # (L, K)
    pis = wr.sum(axis=0)
    k = int(np.argmin(pis))
    if pis[k] < COLLAPSE_PI:
        raise ComponentCollapse(k, float(pis[k]))
    means = (wr.T @ x) / pis[:, None]
    d = x[None, :, :] - means[:, None, :]  # (K, L, 2)
    covs = np.einsum("lk,kli,klj->kij", wr, d, d) / pis[:, None, None]
    covs[:, 1, 0] = covs[:, 0, 1]  # einsum order is not guaranteed symmetric
    # resp rows sum to 1 only up to rounding
    pis = pis / pis.sum()
    return MixtureParams(pis, means, floor_covariance(covs))


def run_em(
    data: WeightedDataset,
    init: MixtureParams,
    max_iters: int = 10,
    tol: float | None = DEFAULT_TOL,
) -> EMReport:
    """Alternate E and M steps from ``init``.

    ``loglik_trace[0]`` is the log-likelihood at ``init``; one entry is added per
    iteration. Stops after ``max_iters`` iterations or once an iteration improves
    the log-likelihood by less than ``tol`` (``tol=None`` runs the full budget).

    Raises
    ------
    ComponentCollapse
        Carrying the last valid parameters and the trace so far.
    """
    if max_iters < 1:
        raise ValueError(f"max_iters must be >= 1, got {max_iters}")
    params = init
    trace = [weighted_loglik(data, params)]
    converged = False
    it = 0
    for it in range(1, max_iters + 1):
        try:
            params_new = m_step(data, e_step(data, params))
        except ComponentCollapse as exc:
            raise ComponentCollapse(exc.component, exc.pi, params, trace) from None
        params = params_new
        trace.append(weighted_loglik(data, params))
        if tol is not None and trace[-1] - trace[-2] < tol:
            converged = True
            break
    return EMReport(params, trace, it, converged)


def init_params(data: WeightedDataset, n_components: int, seed: int) -> MixtureParams:
    """Random initialization for ``n_components`` components.

    Means are distinct observed locations drawn without replacement with
    probability proportional to weight; mixing weights are uniform and every
    covariance starts at the global weighted covariance divided by K (floored).
    """
    if n_components < 1:
        raise ValueError(f"number of components must be >= 1, got {n_components}")
    if n_components > data.support_size:
        raise ValueError(
            f"cannot place {n_components} components on {data.support_size} positively weighted observations"
        )
    rng = np.random.default_rng(seed)
    idx = rng.choice(len(data), size=n_components, replace=False, p=data.weights)
    means = data.locations[idx]
    mean = data.weights @ data.locations
    cov = _weighted_cov(data.locations, data.weights, mean) / n_components
    covs = floor_covariance(np.broadcast_to(cov, (n_components, 2, 2)))
    return MixtureParams(np.full(n_components, 1.0 / n_components), means, covs)


def restart_seeds(seed: int, restarts: int) -> list[int]:
    """Independent per-restart seeds derived from one base seed."""
    return [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(seed).spawn(restarts)]


def run_em_restarts(
    data: WeightedDataset,
    n_components: int,
    restarts: int = 3,
    max_iters: int = 10,
    seed: int = 0,
    tol: float | None = DEFAULT_TOL,
) -> EMReport:
    """Best of ``restarts`` EM runs by final weighted log-likelihood.

    Ties go to the lowest restart index. Collapsed restarts are skipped.

    Raises
    ------
    ComponentCollapse
        If every restart collapses (the last failure is re-raised).
    """
    if restarts < 1:
        raise ValueError(f"restarts must be >= 1, got {restarts}")
    best = None
    failure = None
    for s in restart_seeds(seed, restarts):
        try:
            report = run_em(data, init_params(data, n_components, s), max_iters, tol)
        except ComponentCollapse as exc:
            failure = exc
            continue
        if best is None or report.loglik > best.loglik:
            best = report
    if best is None:
        raise failure
    return best


def mixture_moments(params: MixtureParams) -> tuple[np.ndarray, np.ndarray]:
    """Overall mean and covariance of a mixture."""
    mean = params.pis @ params.means
    d = params.means - mean
    cov = np.einsum("k,kij->ij", params.pis, params.covs + d[:, :, None] * d[:, None, :])
    return mean, cov


__all__ = [
    "COV_FLOOR",
    "ComponentCollapse",
    "EMReport",
    "MixtureParams",
    "WeightedDataset",
    "e_step",
    "floor_covariance",
    "init_params",
    "m_step",
    "run_em",
    "run_em_restarts",
    "weighted_loglik",
]
