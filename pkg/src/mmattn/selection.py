"""Choosing the number of mixture components with a linear complexity penalty."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .em import ComponentCollapse, MixtureParams, WeightedDataset, run_em_restarts

DEFAULT_LAMBDA = 5.0
DEFAULT_K_MAX = 4


class SelectionFailed(ArithmeticError):
    pass


@dataclass(frozen=True)
class SelectionConfig:
    k_min: int = 1
    k_max: int = DEFAULT_K_MAX
    lam: float = DEFAULT_LAMBDA
    restarts: int = 3
    max_iters: int = 10
    base_seed: int = 0
    tol: float | None = None

    def __post_init__(self):
        if self.k_min < 1 or self.k_min > self.k_max:
            raise ValueError(f"need 1 <= k_min <= k_max, got k_min={self.k_min}, k_max={self.k_max}")
        if not self.lam > 0:
            raise ValueError(f"lambda must be positive, got {self.lam}")
        if self.restarts < 1 or self.max_iters < 1:
            raise ValueError("restarts and max_iters must be >= 1")


@dataclass(frozen=True)
class KResult:
    k: int
    loglik: float  # -inf when every restart collapsed
    criterion: float  # +inf when excluded
    params: MixtureParams | None = None
    loglik_trace: tuple = ()


@dataclass(frozen=True)
class SelectionReport:
    chosen_k: int
    chosen_params: MixtureParams
    lam: float
    per_k: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "chosen_k": self.chosen_k,
            "lambda": self.lam,
            "chosen_params": self.chosen_params.to_dict(),
            "per_k": [
                {
                    "k": r.k,
                    "loglik": r.loglik if math.isfinite(r.loglik) else None,
                    "criterion": r.criterion if math.isfinite(r.criterion) else None,
                    "collapsed": r.params is None,
                    "loglik_trace": list(r.loglik_trace),
                    "params": None if r.params is None else r.params.to_dict(),
                }
                for r in self.per_k
            ],
        }


def criterion(loglik: float, k: int, lam: float) -> float:
    """``-2 loglik + lam * k``."""
    return -2.0 * loglik + lam * k


def choose_k(ks, logliks, lam: float) -> int:
    """Minimizer of the criterion over ``ks``; ties go to the smallest k.

    Entries with ``loglik = -inf`` never win.
    """
    best_k, best_c = None, math.inf
    for k, ll in sorted(zip(ks, logliks)):
        c = criterion(ll, k, lam)
        if c < best_c:
            best_k, best_c = k, c
    if best_k is None:
        raise SelectionFailed("no candidate number of components has a finite criterion")
    return best_k


def select_k(data: WeightedDataset, cfg: SelectionConfig = SelectionConfig()) -> SelectionReport:
    """Fit every ``k`` in ``[k_min, k_max]`` with restarts and keep the criterion minimizer.

    A ``k`` whose restarts all collapse (or that exceeds the number of
    positively weighted observations) is recorded with an infinite criterion.
    Seeds differ per ``k`` but derive deterministically from ``cfg.base_seed``.
    """
    per_k = []
    for k in range(cfg.k_min, cfg.k_max + 1):
        if k > data.support_size:
            per_k.append(KResult(k, -math.inf, math.inf))
            continue
        try:
            rep = run_em_restarts(data, k, cfg.restarts, cfg.max_iters, seed=_k_seed(cfg.base_seed, k), tol=cfg.tol)
        except ComponentCollapse:
            per_k.append(KResult(k, -math.inf, math.inf))
            continue
        per_k.append(KResult(k, rep.loglik, criterion(rep.loglik, k, cfg.lam), rep.params, tuple(rep.loglik_trace)))
    chosen = choose_k([r.k for r in per_k], [r.loglik for r in per_k], cfg.lam)
    params = next(r.params for r in per_k if r.k == chosen)
    return SelectionReport(chosen, params, cfg.lam, per_k)


def _k_seed(base_seed: int, k: int) -> int:
    return int(np.random.SeedSequence([base_seed, k]).generate_state(1)[0])


def sample_train_k(rng: np.random.Generator, k_max: int = DEFAULT_K_MAX) -> int:
    """Uniform draw from ``{1, ..., k_max}`` (the training-time policy)."""
    return int(rng.integers(1, k_max + 1))
