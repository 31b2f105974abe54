"""Informativeness of unlabelled samples from a 1-D Gaussian mixture over
density scores.

Components are ordered by ascending mean after fitting. The lowest-density
component is the *high* information one: those samples sit furthest from the
anchor set.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import DegenerateDataError, FitError

VARIANCE_FLOOR = 1e-6
EMPTY_WEIGHT = 1e-8

COMPONENT_NAMES = {
    2: ("high", "low"),
    3: ("high", "medium", "low"),
    4: ("high", "medium", "medium_low", "low"),
}


@dataclass
class InfoGmm:
    means: np.ndarray
    variances: np.ndarray
    weights: np.ndarray
    n_iter: int = 0
    log_likelihood: float = float("nan")
    history: list = field(default_factory=list)
    frozen: np.ndarray | None = None

    @property
    def num_components(self):
        return self.means.size

    @property
    def names(self):
        return COMPONENT_NAMES.get(self.num_components,
                                   tuple(f"c{i}" for i in range(self.num_components)))

    def component(self, name) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise ValueError(f"no component {name!r} among {self.names}") from None

    def to_dict(self):
        return {
            "components": list(self.names),
            "means": self.means.tolist(),
            "variances": self.variances.tolist(),
            "weights": self.weights.tolist(),
            "iterations": self.n_iter,
            "log_likelihood": self.log_likelihood,
        }


def _initial_params(x, m):
    q = np.percentile(x, 100.0 * np.arange(1, m + 1) / (m + 1))
    var = np.full(m, max(x.var(), VARIANCE_FLOOR))
    return q.astype(np.float64), var, np.full(m, 1.0 / m)


def fit_em(scores, seed=0, tol=1e-6, max_iter=200, num_components=3,
           init_means=None) -> InfoGmm:
    """Fit a 1-D mixture by EM.

    Means start at evenly spaced percentiles (25/50/75 for three components),
    variances at the global variance, weights uniform; ``init_means`` overrides
    the starting means. Stops when the total log-likelihood improves by less
    than ``tol`` or after ``max_iter`` M-steps. ``seed`` is accepted for
    interface symmetry; the fit is deterministic.
    """
    del seed
    x = np.asarray(scores, dtype=np.float64).ravel()
    m = int(num_components)
    if m < 1:
        raise FitError("need at least one component")
    if x.size < m:
        raise FitError(f"{x.size} scores cannot support {m} components")
    if not np.all(np.isfinite(x)):
        raise FitError("scores must be finite")
    if np.ptp(x) == 0.0:
        raise DegenerateDataError("all density scores are identical")

    means, variances, weights = _initial_params(x, m)
    if init_means is not None:
        means = np.asarray(init_means, dtype=np.float64).copy()
        if means.size != m:
            raise FitError("init_means length does not match num_components")
    frozen = np.zeros(m, dtype=bool)
    history = []
    n_iter = 0
    while True:
        lj, norm = kernels.gmm_log_joint(x, means, variances, weights)
        ll = float(norm.sum())
        history.append(ll)
        if n_iter >= max_iter or (len(history) > 1 and ll - history[-2] < tol):
            break
        resp = np.exp(lj - norm[:, None])
        nk = resp.sum(axis=0)
        weights = nk / nk.sum()
        frozen = weights < EMPTY_WEIGHT
        live = ~frozen
        mu = (resp[:, live] * x[:, None]).sum(axis=0) / nk[live]
        var = (resp[:, live] * (x[:, None] - mu) ** 2).sum(axis=0) / nk[live]
        means = means.copy()
        variances = variances.copy()
        means[live] = mu
        variances[live] = np.maximum(var, VARIANCE_FLOOR)
        n_iter += 1

    order = np.argsort(means, kind="stable")
    return InfoGmm(means[order], variances[order], weights[order], n_iter,
                   history[-1], history, frozen[order])


def posteriors(gmm: InfoGmm, scores) -> np.ndarray:
    """Responsibilities ``(n, m)``, columns in ``gmm.names`` order."""
    x = np.atleast_1d(np.asarray(scores, dtype=np.float64))
    lj, norm = kernels.gmm_log_joint(x, gmm.means, gmm.variances, gmm.weights)
    return np.exp(lj - norm[:, None])


def posterior(gmm: InfoGmm, score: float) -> dict:
    """Posterior over informativeness for one score, keyed by component name."""
    p = posteriors(gmm, [score])[0]
    return dict(zip(gmm.names, p.tolist()))


def select_by_posterior(post, target_col):
    """Rows whose target column strictly beats every other column."""
    post = np.asarray(post, dtype=np.float64)
    others = np.delete(post, target_col, axis=1)
    return post[:, target_col] > others.max(axis=1)


def select_high_info(gmm: InfoGmm, scored_samples, target="high") -> set:
    """Ids whose ``target`` posterior is a strict argmax.

    ``scored_samples`` is an iterable of ``(id, density)``. An emptied target
    component (weight below 1e-8) selects nothing.
    """
    pairs = list(scored_samples)
    col = gmm.component(target)
    if not pairs or gmm.weights[col] < EMPTY_WEIGHT:
        return set()
    ids = np.asarray([p[0] for p in pairs], dtype=np.int64)
    post = posteriors(gmm, [p[1] for p in pairs])
    return set(ids[select_by_posterior(post, col)].tolist())
