"""Base learner p(x) = act(head(extractor(x))), its losses, and SGD/Adam training."""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import expit, log_softmax, softmax

from .data import MULTICLASS, MULTILABEL, DataPools
from .errors import ShapeError, TrainingError

PARAM_NAMES = ("W1", "b1", "W2", "b2")
WEIGHT_INITS = ("xavier", "zeros", "identity")


@dataclass
class TrainConfig:
    # Reference schedule at image scale was Adam, lr 0.05 / 0.001, batch 16 / 32,
    # warm-up 20 / 40 epochs; these defaults are sized for small feature vectors.
    learning_rate: float = 0.5
    batch_size: int = 32
    warmup_epochs: int = 100
    stage_epochs: int = 30
    seed: int = 0
    weight_init: str = "xavier"
    optimizer: str = "sgd"

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.warmup_epochs < 0 or self.stage_epochs < 0:
            raise ValueError("epoch counts must be >= 0")
        if self.weight_init not in WEIGHT_INITS:
            raise ValueError(f"weight_init must be one of {WEIGHT_INITS}")
        if self.optimizer not in ("sgd", "adam"):
            raise ValueError("optimizer must be 'sgd' or 'adam'")


class BaseLearner:
    """Linear or one-hidden-layer (tanh) extractor followed by a linear head.

    The head output goes through softmax (multiclass) or sigmoid (multilabel).
    ``shadow`` holds the exponential moving average of the parameters.
    """

    def __init__(self, dim, num_classes, task_kind, hidden=None, extractor="mlp",
                 ema_decay=0.99, weight_init="xavier", seed=0):
        if task_kind not in (MULTICLASS, MULTILABEL):
            raise ValueError(f"unknown task_kind {task_kind!r}")
        if extractor not in ("mlp", "linear"):
            raise ValueError("extractor must be 'mlp' or 'linear'")
        if not 0.0 <= ema_decay <= 1.0:
            raise ValueError("ema_decay must lie in [0, 1]")
        self.dim = int(dim)
        self.num_classes = int(num_classes)
        self.task_kind = task_kind
        self.extractor = extractor
        self.feature_dim = int(hidden) if hidden else self.dim
        self.ema_decay = float(ema_decay)
        self.weight_init = weight_init
        self.seed = seed
        self.params = self._init_params(weight_init, np.random.default_rng(seed))
        self.shadow = {k: v.copy() for k, v in self.params.items()}
        self.loss_history = []

    def _init_params(self, scheme, rng):
        d, f, c = self.dim, self.feature_dim, self.num_classes
        if scheme == "zeros":
            return {"W1": np.zeros((d, f)), "b1": np.zeros(f),
                    "W2": np.zeros((f, c)), "b2": np.zeros(c)}
        if scheme == "identity":
            if f != d:
                raise ValueError("identity init needs feature_dim == dim")
            return {"W1": np.eye(d), "b1": np.zeros(f),
                    "W2": np.zeros((f, c)), "b2": np.zeros(c)}
        if scheme != "xavier":
            raise ValueError(f"unknown weight_init {scheme!r}")
        a1 = np.sqrt(6.0 / (d + f))
        a2 = np.sqrt(6.0 / (f + c))
        return {"W1": rng.uniform(-a1, a1, (d, f)), "b1": np.zeros(f),
                "W2": rng.uniform(-a2, a2, (f, c)), "b2": np.zeros(c)}

    # -- forward -----------------------------------------------------------

    def _check(self, x):
        x = np.asarray(x, dtype=np.float64)
        single = x.ndim == 1
        x2 = x[None, :] if single else x
        if x2.ndim != 2 or x2.shape[1] != self.dim:
            raise ShapeError(f"expected inputs of length {self.dim}, got shape {x.shape}")
        return x2, single

    def _features(self, x, p):
        h = x @ p["W1"] + p["b1"]
        return np.tanh(h) if self.extractor == "mlp" else h

    def extract_features(self, x, use_ema=False):
        x2, single = self._check(x)
        f = self._features(x2, self.shadow if use_ema else self.params)
        return f[0] if single else f

    def logits(self, x, use_ema=False):
        x2, single = self._check(x)
        p = self.shadow if use_ema else self.params
        z = self._features(x2, p) @ p["W2"] + p["b2"]
        return z[0] if single else z

    def predict(self, x, use_ema=False):
        z = self.logits(x, use_ema)
        return activate(z, self.task_kind)

    # -- EMA / copies -------------------------------------------------------

    def update_ema(self):
        d = self.ema_decay
        for k, v in self.params.items():
            self.shadow[k] = d * self.shadow[k] + (1.0 - d) * v

    def reset_ema(self):
        self.shadow = {k: v.copy() for k, v in self.params.items()}

    def copy(self) -> "BaseLearner":
        out = object.__new__(BaseLearner)
        out.__dict__.update(self.__dict__)
        out.params = {k: v.copy() for k, v in self.params.items()}
        out.shadow = {k: v.copy() for k, v in self.shadow.items()}
        out.loss_history = list(self.loss_history)
        return out

    def ema_learner(self) -> "BaseLearner":
        """A copy whose live parameters are this learner's EMA shadow."""
        out = self.copy()
        out.params = {k: v.copy() for k, v in self.shadow.items()}
        return out

    def meta(self):
        return {"dim": self.dim, "num_classes": self.num_classes, "task_kind": self.task_kind,
                "hidden": self.feature_dim, "extractor": self.extractor,
                "ema_decay": self.ema_decay, "weight_init": self.weight_init, "seed": self.seed}


def activate(z, task_kind):
    if task_kind == MULTICLASS:
        return softmax(z, axis=-1)
    return expit(z)


# --------------------------------------------------------------------------
# losses
# --------------------------------------------------------------------------

def classification_loss(y, p, task_kind):
    """Per-sample loss from probabilities: soft-target cross-entropy
    (multiclass) or class-averaged binary cross-entropy (multilabel).
    ``0 * log 0`` is taken as 0."""
    y = np.atleast_2d(np.asarray(y, dtype=np.float64))
    p = np.atleast_2d(np.asarray(p, dtype=np.float64))
    with np.errstate(divide="ignore", invalid="ignore"):
        pos = np.where(y > 0, y * np.log(p), 0.0)
        if task_kind == MULTICLASS:
            return -pos.sum(axis=1)
        neg = np.where(y < 1, (1 - y) * np.log1p(-p), 0.0)
    return -(pos + neg).mean(axis=1)


def _loss_from_logits(z, y, task_kind):
    if task_kind == MULTICLASS:
        return -(y * log_softmax(z, axis=1)).sum(axis=1)
    return (np.logaddexp(0.0, z) - y * z).mean(axis=1)


def loss_and_grad(learner: BaseLearner, x, y, weights):
    """Weighted loss ``sum_i w_i * l(y_i, p(x_i))`` and its parameter gradients."""
    p = learner.params
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    w = np.asarray(weights, dtype=np.float64)
    h = x @ p["W1"] + p["b1"]
    f = np.tanh(h) if learner.extractor == "mlp" else h
    z = f @ p["W2"] + p["b2"]
    loss = float(w @ _loss_from_logits(z, y, learner.task_kind))
    if learner.task_kind == MULTICLASS:
        dz = softmax(z, axis=1) * y.sum(axis=1, keepdims=True) - y
    else:
        dz = (expit(z) - y) / y.shape[1]
    dz *= w[:, None]
    df = dz @ p["W2"].T
    dh = df * (1.0 - f * f) if learner.extractor == "mlp" else df
    grads = {"W1": x.T @ dh, "b1": dh.sum(axis=0), "W2": f.T @ dz, "b2": dz.sum(axis=0)}
    return loss, grads


def _pool_weights(n_labelled, n_pseudo):
    w = np.full(n_labelled + n_pseudo, 1.0 / n_labelled)
    if n_pseudo:
        w[n_labelled:] = 1.0 / n_pseudo
    return w


def acpl_loss(learner, x_lab, y_lab, x_ps=None, y_ps=None):
    """Mean loss over the labelled set plus mean loss over the pseudo set
    (the second term is dropped when the pseudo set is empty)."""
    total = float(classification_loss(y_lab, learner.predict(x_lab), learner.task_kind).mean())
    if x_ps is not None and len(x_ps):
        total += float(classification_loss(y_ps, learner.predict(x_ps), learner.task_kind).mean())
    return total


# --------------------------------------------------------------------------
# optimisation
# --------------------------------------------------------------------------

class _Sgd:
    def __init__(self, lr):
        self.lr = lr

    def step(self, params, grads):
        for k in PARAM_NAMES:
            params[k] -= self.lr * grads[k]


class _Adam:
    def __init__(self, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.b1, self.b2, self.eps = lr, beta1, beta2, eps
        self.m, self.v, self.t = {}, {}, 0

    def step(self, params, grads):
        self.t += 1
        for k in PARAM_NAMES:
            g = grads[k]
            self.m[k] = self.b1 * self.m.get(k, 0.0) + (1 - self.b1) * g
            self.v[k] = self.b2 * self.v.get(k, 0.0) + (1 - self.b2) * g * g
            mhat = self.m[k] / (1 - self.b1 ** self.t)
            vhat = self.v[k] / (1 - self.b2 ** self.t)
            params[k] -= self.lr * mhat / (np.sqrt(vhat) + self.eps)


def _optimizer(cfg: TrainConfig):
    return _Adam(cfg.learning_rate) if cfg.optimizer == "adam" else _Sgd(cfg.learning_rate)


def fit_epochs(learner, x, y, weights, epochs, cfg: TrainConfig, rng, update_ema):
    """Mini-batch passes over one shuffled pool.

    Each batch minimises ``(n / |batch|) * sum_batch w_i * l_i``, an unbiased
    estimate of the full weighted objective ``sum_i w_i * l_i``.
    """
    n = x.shape[0]
    opt = _optimizer(cfg)
    history = []
    for _ in range(epochs):
        order = rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            b = order[start:start + cfg.batch_size]
            _, grads = loss_and_grad(learner, x[b], y[b], weights[b] * (n / b.size))
            opt.step(learner.params, grads)
            if update_ema:
                learner.update_ema()
        full = float(weights @ _loss_from_logits(learner.logits(x), y, learner.task_kind))
        if not np.isfinite(full):
            raise TrainingError("loss became non-finite; lower the learning rate")
        history.append(full)
    return history


def warmup_train(learner: BaseLearner, pools: DataPools, cfg: TrainConfig) -> BaseLearner:
    """Supervised training on the labelled pool only; the EMA shadow is reset to the result."""
    ids, y = pools.labelled_arrays()
    if ids.size == 0:
        raise TrainingError("cannot warm up on an empty labelled set")
    x = pools.features(ids)
    rng = np.random.default_rng([cfg.seed, 0])
    learner.loss_history = fit_epochs(learner, x, y, _pool_weights(ids.size, 0),
                                      cfg.warmup_epochs, cfg, rng, update_ema=False)
    learner.reset_ema()
    return learner


def train_stage(learner: BaseLearner, pools: DataPools, cfg: TrainConfig, stage=1) -> BaseLearner:
    """Minimise the joint labelled + pseudo-labelled objective, updating the
    EMA shadow after every optimiser step."""
    lab_ids, y_lab = pools.labelled_arrays()
    if lab_ids.size == 0:
        raise TrainingError("labelled set is empty")
    ps_ids, y_ps = pools.pseudo_arrays()
    ids = np.concatenate([lab_ids, ps_ids])
    x = pools.features(ids)
    y = np.concatenate([y_lab, y_ps])
    w = _pool_weights(lab_ids.size, ps_ids.size)
    rng = np.random.default_rng([cfg.seed, stage])
    learner.loss_history = fit_epochs(learner, x, y, w, cfg.stage_epochs, cfg, rng,
                                      update_ema=True)
    return learner


# --------------------------------------------------------------------------
# checkpoints
# --------------------------------------------------------------------------

_MAGIC = b"ACPLCKPT\n"


def save_checkpoint(learner: BaseLearner, path):
    """Magic line, one JSON header line with shapes and offsets, then raw
    little-endian float64 payload."""
    arrays = [(k, learner.params[k]) for k in PARAM_NAMES]
    arrays += [("ema." + k, learner.shadow[k]) for k in PARAM_NAMES]
    entries, offset = [], 0
    for name, a in arrays:
        nbytes = a.size * 8
        entries.append({"name": name, "shape": list(a.shape), "dtype": "<f8",
                        "offset": offset, "nbytes": nbytes})
        offset += nbytes
    header = json.dumps({"format": 1, "meta": learner.meta(), "arrays": entries},
                        sort_keys=True).encode("utf-8")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("wb") as fh:
        fh.write(_MAGIC)
        fh.write(header + b"\n")
        for _, a in arrays:
            fh.write(np.ascontiguousarray(a, dtype="<f8").tobytes())


def load_checkpoint(path) -> BaseLearner:
    raw = Path(path).read_bytes()
    if not raw.startswith(_MAGIC):
        raise ValueError(f"{path}: not a learner checkpoint")
    end = raw.index(b"\n", len(_MAGIC))
    header = json.loads(raw[len(_MAGIC):end].decode("utf-8"))
    payload = memoryview(raw)[end + 1:]
    meta = header["meta"]
    learner = BaseLearner(meta["dim"], meta["num_classes"], meta["task_kind"],
                          hidden=meta["hidden"], extractor=meta["extractor"],
                          ema_decay=meta["ema_decay"], weight_init="zeros", seed=meta["seed"])
    learner.weight_init = meta["weight_init"]
    for e in header["arrays"]:
        buf = payload[e["offset"]:e["offset"] + e["nbytes"]]
        a = np.frombuffer(buf, dtype=e["dtype"]).reshape(e["shape"]).astype(np.float64)
        if e["name"].startswith("ema."):
            learner.shadow[e["name"][4:]] = a
        else:
            learner.params[e["name"]] = a
    return learner
