"""Comparators: supervised-only training and fixed-threshold pseudo-labelling."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import MULTICLASS, DataPools
from .errors import TrainingError
from .evaluation import harden, pseudo_label_accuracy
from .model import BaseLearner, TrainConfig, train_stage, warmup_train
from .trainer import AcplConfig, AcplResult, StageRecord, _class_counts, _test_metrics


def run_supervised(pools: DataPools, learner: BaseLearner, cfg: AcplConfig,
                   test_set=None) -> AcplResult:
    """Warm-up on the labelled pool only, evaluated through the EMA copy like ACPL runs."""
    warmup_train(learner, pools, cfg.train)
    final = learner.ema_learner()
    return AcplResult(final, [], pools, "supervised", _test_metrics(final, test_set))


@dataclass
class ThresholdPseudoConfig:
    threshold: float = 0.95
    stages: int = 5
    train: TrainConfig = field(default_factory=TrainConfig)

    def __post_init__(self):
        if not 0.0 <= self.threshold < 1.0:
            raise ValueError("threshold must lie in [0, 1)")
        if self.stages < 0:
            raise ValueError("stages must be >= 0")


def confident_mask(probs, task_kind, threshold):
    """Multiclass: top probability above ``threshold``. Multilabel: every
    class has ``max(p, 1 - p)`` above it."""
    p = np.atleast_2d(probs)
    if task_kind == MULTICLASS:
        return p.max(axis=1) > threshold
    return (np.maximum(p, 1.0 - p) > threshold).all(axis=1)


def run_threshold_pseudo(pools: DataPools, learner: BaseLearner, cfg: ThresholdPseudoConfig,
                         test_set=None) -> AcplResult:
    """Classic self-training: each stage hard-labels every unlabelled sample
    the current model is confident about, retrains and migrates."""
    if not pools.labelled:
        raise TrainingError("labelled set is empty")
    warmup_train(learner, pools, cfg.train)
    records = []
    stop = "stages"
    for t in range(1, cfg.stages + 1):
        unl = pools.unlabelled_ids()
        if unl.size == 0:
            stop = "unlabelled_empty"
            break
        probs = learner.predict(pools.features(unl))
        keep = confident_mask(probs, pools.task_kind, cfg.threshold)
        if not keep.any():
            stop = "empty_selection"
            break
        s_ids = unl[keep]
        y_hard = harden(probs[keep], pools.task_kind)
        pools.set_pseudo(s_ids, y_hard)
        train_stage(learner, pools, cfg.train, stage=t)
        truth = pools.hidden_truth(s_ids)
        known = truth[~np.isnan(truth).any(axis=1)]
        acc = pseudo_label_accuracy(y_hard, truth, pools.task_kind) if len(known) == len(truth) else None
        n = pools.migrate()
        pools.check_invariants()
        records.append(StageRecord(
            stage=t, n_labelled=len(pools.labelled), n_unlabelled=len(pools.unlabelled),
            n_pseudo=n, n_anchor=len(pools.anchor), n_anchor_added=0, gmm=None,
            pseudo_accuracy=acc, pseudo_class_counts=_class_counts(known),
            pseudo_class_counts_predicted=_class_counts(y_hard),
            metrics=_test_metrics(learner.ema_learner(), test_set)))
    final = learner.ema_learner()
    return AcplResult(final, records, pools, stop, _test_metrics(final, test_set))
