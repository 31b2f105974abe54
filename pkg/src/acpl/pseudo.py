"""Pseudo-label construction: density-weighted mixup of model and KNN votes,
plus the single-source and random-weight alternatives."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeError

STRATEGIES = ("informative_mixup", "model_only", "knn_only", "random_alpha")


@dataclass(frozen=True)
class PseudoStrategy:
    kind: str = "informative_mixup"
    seed: int = 0
    beta_a: float = 1.0
    beta_b: float = 1.0

    def __post_init__(self):
        if self.kind not in STRATEGIES:
            raise ValueError(f"unknown pseudo strategy {self.kind!r}; expected one of {STRATEGIES}")
        if self.beta_a <= 0 or self.beta_b <= 0:
            raise ValueError("Beta shape parameters must be positive")

    def rng(self, *stream):
        return np.random.default_rng([self.seed, *stream])


def mix_weights(strategy: PseudoStrategy, density, rng=None) -> np.ndarray:
    """Weight on the model prediction for each sample."""
    d = np.atleast_1d(np.asarray(density, dtype=np.float64))
    if not np.all(np.isfinite(d)):
        raise ValueError("density scores must be finite")
    if strategy.kind == "informative_mixup":
        return np.clip(d, 0.0, 1.0)
    if strategy.kind == "model_only":
        return np.ones_like(d)
    if strategy.kind == "knn_only":
        return np.zeros_like(d)
    rng = rng if rng is not None else strategy.rng()
    return rng.beta(strategy.beta_a, strategy.beta_b, size=d.shape)


def make_pseudo_labels(strategy: PseudoStrategy, y_model, y_knn, density, rng=None):
    """Row-wise ``w * y_model + (1 - w) * y_knn`` with ``w`` from
    :func:`mix_weights`. Inputs are ``(n, C)``; output is clipped to [0, 1]."""
    ym = np.atleast_2d(np.asarray(y_model, dtype=np.float64))
    yk = np.atleast_2d(np.asarray(y_knn, dtype=np.float64))
    if ym.shape != yk.shape:
        raise ShapeError(f"model prediction {ym.shape} and KNN prediction {yk.shape} differ")
    w = mix_weights(strategy, density, rng)
    if w.shape[0] != ym.shape[0]:
        raise ShapeError("one density score per sample is required")
    if strategy.kind == "model_only":
        return ym.copy()
    if strategy.kind == "knn_only":
        return yk.copy()
    w = w[:, None]
    return np.clip(w * ym + (1.0 - w) * yk, 0.0, 1.0)


def make_pseudo_label(strategy: PseudoStrategy, y_model, y_knn, d, rng=None) -> np.ndarray:
    ym = np.asarray(y_model, dtype=np.float64)
    yk = np.asarray(y_knn, dtype=np.float64)
    if ym.ndim != 1 or ym.shape != yk.shape:
        raise ShapeError(f"prediction lengths differ: {ym.shape} vs {yk.shape}")
    return make_pseudo_labels(strategy, ym[None, :], yk[None, :], [d], rng)[0]
