"""The staged anti-curriculum pseudo-labelling loop, ablation grids and run
directory output."""
from __future__ import annotations

import csv
import dataclasses
import json
import logging
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import asp, cdsi, density
from .data import Dataset, DataPools, split_pools
from .errors import ConfigError, DegenerateDataError, FitError
from .evaluation import evaluate_learner, harden, pseudo_label_accuracy
from .model import BaseLearner, TrainConfig, save_checkpoint, train_stage, warmup_train
from .pseudo import PseudoStrategy, make_pseudo_labels

log = logging.getLogger(__name__)

INFO_TARGETS = ("low", "medium", "high")


@dataclass
class ModelConfig:
    hidden: int = 16
    extractor: str = "mlp"
    ema_decay: float = 0.99


@dataclass
class AcplConfig:
    stages: int = 5
    k: int = 50
    asp_k: int | None = None
    info_target: str = "high"
    asp_enabled: bool = True
    num_gmm_components: int = 3
    em_tol: float = 1e-6
    em_max_iter: int = 200
    seed: int = 0
    train: TrainConfig = field(default_factory=TrainConfig)
    strategy: PseudoStrategy = field(default_factory=PseudoStrategy)
    model: ModelConfig = field(default_factory=ModelConfig)

    def __post_init__(self):
        if self.stages < 0:
            raise ConfigError("stages must be >= 0")
        if self.k < 1 or (self.asp_k is not None and self.asp_k < 1):
            raise ConfigError("K must be >= 1")
        if self.num_gmm_components not in cdsi.COMPONENT_NAMES:
            raise ConfigError(f"num_gmm_components must be one of {sorted(cdsi.COMPONENT_NAMES)}")
        if self.info_target not in cdsi.COMPONENT_NAMES[self.num_gmm_components]:
            raise ConfigError(f"info_target {self.info_target!r} not available with "
                              f"{self.num_gmm_components} components")

    # -- flat key/value view -------------------------------------------------

    _NESTED = {"train": TrainConfig, "strategy": PseudoStrategy, "model": ModelConfig}
    _RENAMES = {"strategy": {"kind": "pseudo_strategy", "seed": "pseudo_seed"},
                "train": {"seed": "train_seed"}}

    @classmethod
    def flat_keys(cls):
        """Flat key -> (section or None, field name)."""
        keys = {}
        for f in dataclasses.fields(cls):
            if f.name in cls._NESTED:
                ren = cls._RENAMES.get(f.name, {})
                for g in dataclasses.fields(cls._NESTED[f.name]):
                    keys[ren.get(g.name, g.name)] = (f.name, g.name)
            else:
                keys[f.name] = (None, f.name)
        return keys

    def to_flat(self):
        out = {}
        for key, (section, name) in self.flat_keys().items():
            obj = self if section is None else getattr(self, section)
            out[key] = getattr(obj, name)
        return out

    @classmethod
    def from_flat(cls, values: dict) -> "AcplConfig":
        keys = cls.flat_keys()
        top, nested = {}, {s: {} for s in cls._NESTED}
        for key, raw in values.items():
            if key not in keys:
                raise ConfigError(f"unknown config key {key!r}")
            section, name = keys[key]
            target_cls = cls if section is None else cls._NESTED[section]
            ftype = {f.name: f.type for f in dataclasses.fields(target_cls)}[name]
            value = _coerce(key, raw, ftype)
            (top if section is None else nested[section])[name] = value
        try:
            for s, c in cls._NESTED.items():
                top[s] = c(**nested[s])
            return cls(**top)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def replace(self, **flat) -> "AcplConfig":
        merged = self.to_flat()
        merged.update(flat)
        return AcplConfig.from_flat(merged)


def _coerce(key, raw, ftype):
    if not isinstance(raw, str):
        return raw
    text = raw.strip()
    t = str(ftype)
    try:
        if text.lower() in ("none", "null", "") and "None" in t:
            return None
        if t.startswith("bool"):
            if text.lower() in ("1", "true", "yes", "on"):
                return True
            if text.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
        if t.startswith("int"):
            return int(text)
        if t.startswith("float"):
            return float(text)
    except ValueError:
        raise ConfigError(f"config key {key!r}: cannot parse {raw!r} as {t}") from None
    return text


@dataclass
class StageRecord:
    stage: int
    n_labelled: int
    n_unlabelled: int
    n_pseudo: int
    n_anchor: int
    n_anchor_added: int
    gmm: dict | None
    pseudo_accuracy: float | None
    pseudo_class_counts: list
    pseudo_class_counts_predicted: list
    metrics: dict | None
    asp: dict | None = None

    def to_dict(self):
        return dataclasses.asdict(self)


@dataclass
class AcplResult:
    learner: BaseLearner
    records: list
    pools: DataPools
    stop_reason: str
    metrics: dict | None = None


def make_learner(pools_or_dataset, cfg: AcplConfig) -> BaseLearner:
    ds = pools_or_dataset.dataset if isinstance(pools_or_dataset, DataPools) else pools_or_dataset
    m = cfg.model
    return BaseLearner(ds.dim, ds.num_classes, ds.task_kind, hidden=m.hidden,
                       extractor=m.extractor, ema_decay=m.ema_decay,
                       weight_init=cfg.train.weight_init, seed=cfg.seed)


def _test_metrics(learner, test_set):
    if test_set is None:
        return None
    return evaluate_learner(learner, test_set).to_dict()


def _class_counts(y):
    if len(y) == 0:
        return []
    return [int(v) for v in (np.asarray(y) > 0.5).sum(axis=0)]


def _truth_counts(pools, ids):
    truth = pools.hidden_truth(ids) if len(ids) else np.empty((0, pools.num_classes))
    known = truth[~np.isnan(truth).any(axis=1)] if len(truth) else truth
    return truth, known


def run_acpl(pools: DataPools, learner: BaseLearner, cfg: AcplConfig,
             test_set: Dataset | None = None) -> AcplResult:
    """Warm up on the labelled pool, then per stage: score the unlabelled
    pool against the anchor set, keep the samples the mixture assigns to
    ``info_target``, pseudo-label them, grow the anchor set (purified or not),
    retrain on labelled + pseudo-labelled and merge the latter into the
    labelled pool.

    Stops after ``cfg.stages`` stages, when nothing is left unlabelled, or when a stage
    selects nothing. ``pools`` and ``learner`` are modified in place; the
    returned learner is the EMA copy used for evaluation.
    """
    warmup_train(learner, pools, cfg.train)
    records = []
    stop = "stages"
    t = 0
    asp_k = cfg.asp_k or cfg.k
    while t < cfg.stages:
        unl_ids = pools.unlabelled_ids()
        if unl_ids.size == 0:
            stop = "unlabelled_empty"
            break
        anc_ids, anc_y = pools.anchor_arrays()
        f_anchor = learner.extract_features(pools.features(anc_ids))
        x_unl = pools.features(unl_ids)
        f_unl = learner.extract_features(x_unl)
        anchor_index = density.build_index(anc_ids, f_anchor, anc_y, cfg.k, pools.task_kind)
        d_unl = density.density_scores(anchor_index, f_unl)

        try:
            gmm = cdsi.fit_em(d_unl, seed=cfg.seed, tol=cfg.em_tol, max_iter=cfg.em_max_iter,
                              num_components=cfg.num_gmm_components)
        except DegenerateDataError:
            stop = "degenerate_scores"
            break
        except FitError:
            stop = "too_few_unlabelled"
            break
        chosen = cdsi.select_high_info(gmm, zip(unl_ids.tolist(), d_unl), cfg.info_target)
        if not chosen:
            stop = "empty_selection"
            log.info("stage %d: empty selection, stopping", t + 1)
            break
        sel = np.isin(unl_ids, np.fromiter(chosen, dtype=np.int64))
        s_ids = unl_ids[sel]

        y_model = learner.predict(x_unl[sel])
        y_knn = density.knn_labels(anchor_index, f_unl[sel])
        rng = cfg.strategy.rng(t + 1)
        y_tilde = make_pseudo_labels(cfg.strategy, y_model, y_knn, d_unl[sel], rng)
        pools.set_pseudo(s_ids, y_tilde)

        asp_report = None
        if cfg.asp_enabled:
            unl_index = density.build_index(unl_ids, f_unl, None, asp_k)
            asp_anchor = anchor_index if asp_k == cfg.k else density.build_index(
                anc_ids, f_anchor, anc_y, asp_k, pools.task_kind)
            report = asp.purify(s_ids, f_unl[sel], unl_index, asp_anchor, asp_k)
            keep = np.isin(s_ids, np.asarray(report.selected, dtype=np.int64))
            pools.add_anchors(s_ids[keep], y_tilde[keep])
            n_added = int(keep.sum())
            asp_report = {"threshold": report.threshold, "n_selected": len(report.selected)}
        else:
            pools.add_anchors(s_ids, y_tilde)
            n_added = int(s_ids.size)

        t += 1
        train_stage(learner, pools, cfg.train, stage=t)

        truth, known = _truth_counts(pools, s_ids)
        acc = None
        if len(known) == len(truth) and len(truth):
            acc = pseudo_label_accuracy(y_tilde, truth, pools.task_kind)
        n_pseudo = pools.migrate()
        pools.check_invariants()
        records.append(StageRecord(
            stage=t,
            n_labelled=len(pools.labelled),
            n_unlabelled=len(pools.unlabelled),
            n_pseudo=n_pseudo,
            n_anchor=len(pools.anchor),
            n_anchor_added=n_added,
            gmm=gmm.to_dict(),
            pseudo_accuracy=acc,
            pseudo_class_counts=_class_counts(known),
            pseudo_class_counts_predicted=_class_counts(harden(y_tilde, pools.task_kind)),
            metrics=_test_metrics(learner.ema_learner(), test_set),
            asp=asp_report,
        ))
        log.info("stage %d: pseudo=%d labelled=%d unlabelled=%d anchors=%d", t, n_pseudo,
                 len(pools.labelled), len(pools.unlabelled), len(pools.anchor))
    final = learner.ema_learner()
    return AcplResult(final, records, pools, stop, _test_metrics(final, test_set))


# --------------------------------------------------------------------------
# ablations
# --------------------------------------------------------------------------

TABLE4_GRID = [{"info_target": t, "asp_enabled": a}
               for t in ("low", "medium", "high") for a in (False, True)]
TABLE5_GRID = [{"pseudo_strategy": s}
               for s in ("model_only", "knn_only", "random_alpha", "informative_mixup")]
COMPONENTS_GRID = [{"num_gmm_components": m} for m in (2, 3, 4)]
GRIDS = {"table4": TABLE4_GRID, "table5": TABLE5_GRID, "components": COMPONENTS_GRID}


def variant_id(delta: dict) -> str:
    if not delta:
        return "base"
    return ",".join(f"{k}={_fmt(v)}" for k, v in sorted(delta.items()))


def _fmt(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    return str(v)


def _run_one(args):
    dataset, test_set, base, delta, seed, fraction, stratified, out_dir = args
    cfg = base.replace(**delta, seed=seed, train_seed=seed, pseudo_seed=seed)
    pools = split_pools(dataset, fraction, stratified, seed)
    learner = make_learner(pools, cfg)
    result = run_acpl(pools, learner, cfg, test_set)
    if out_dir is not None:
        write_run(Path(out_dir), cfg, result)
    return result.metrics, [r.to_dict() for r in result.records]


def run_ablation(dataset: Dataset, test_set: Dataset, base: AcplConfig, grid, seeds,
                 labelled_fraction, stratified=True, out_dir=None, workers=None):
    """Run every grid variant for every seed; pools depend only on the seed,
    so all variants see the same split per seed.

    Returns one row per variant with seed-wise mean and sample std of the
    final test metrics (std is 0 for a single seed).
    """
    seeds = list(seeds)
    if not seeds:
        raise ConfigError("at least one seed is required")
    if not grid:
        raise ConfigError("the ablation grid is empty")
    workers = workers or int(os.environ.get("ACPL_WORKERS", "1"))
    jobs = []
    for delta in grid:
        vid = variant_id(delta)
        for s in seeds:
            run_dir = None if out_dir is None else Path(out_dir) / "runs" / f"{vid}__seed{s}"
            jobs.append((dataset, test_set, base, delta, s, labelled_fraction, stratified, run_dir))
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_run_one, jobs))
    else:
        results = [_run_one(j) for j in jobs]

    rows = []
    for i, delta in enumerate(grid):
        chunk = results[i * len(seeds):(i + 1) * len(seeds)]
        aucs = np.array([m["macro_auc"] for m, _ in chunk], dtype=np.float64)
        f1s = np.array([m["macro_f1"] for m, _ in chunk], dtype=np.float64)
        sens = np.array([m["macro_sensitivity"] for m, _ in chunk], dtype=np.float64)
        rows.append({
            "variant": variant_id(delta),
            "delta": dict(delta),
            "mean_auc": float(aucs.mean()),
            "std_auc": float(aucs.std(ddof=1)) if aucs.size > 1 else 0.0,
            "mean_f1": float(f1s.mean()),
            "mean_sensitivity": float(sens.mean()),
            "aucs": aucs.tolist(),
            "records": [r for _, r in chunk],
        })
    return rows


def write_comparison(rows, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["variant", "config_delta", "mean_auc", "std_auc", "mean_f1",
                    "mean_sensitivity"])
        for r in rows:
            w.writerow([r["variant"], json.dumps(r["delta"], sort_keys=True),
                        repr(r["mean_auc"]), repr(r["std_auc"]), repr(r["mean_f1"]),
                        repr(r["mean_sensitivity"])])


# --------------------------------------------------------------------------
# run directory
# --------------------------------------------------------------------------

def _dump(obj):
    return json.dumps(obj, sort_keys=True)


def write_run(run_dir: Path, cfg: AcplConfig, result: AcplResult, extra_config=None):
    """config.json, stages.jsonl, metrics.json, checkpoint.bin and per-stage
    class histograms under ``histograms/``."""
    run_dir = Path(run_dir)
    (run_dir / "histograms").mkdir(parents=True, exist_ok=True)
    conf = cfg.to_flat()
    if extra_config:
        conf.update(extra_config)
    (run_dir / "config.json").write_text(_dump(conf) + "\n", encoding="utf-8")
    with (run_dir / "stages.jsonl").open("w", encoding="utf-8") as fh:
        for r in result.records:
            fh.write(_dump(r.to_dict()) + "\n")
    metrics = {"final": result.metrics, "stop_reason": result.stop_reason,
               "stages_run": len(result.records),
               "n_labelled_final": len(result.pools.labelled),
               "n_anchor_final": len(result.pools.anchor)}
    (run_dir / "metrics.json").write_text(_dump(metrics) + "\n", encoding="utf-8")
    if result.metrics is not None:
        with (run_dir / "per_class_metrics.csv").open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["class", "auc", "f1", "sensitivity"])
            m = result.metrics
            for c in range(len(m["per_class_f1"])):
                w.writerow([c, m["per_class_auc"][c], m["per_class_f1"][c],
                            m["per_class_sensitivity"][c]])
    save_checkpoint(result.learner, run_dir / "checkpoint.bin")
    for r in result.records:
        write_histogram(run_dir / "histograms" / f"stage{r.stage}_class_dist.csv", r)


def write_histogram(path, record: StageRecord):
    truth = record.pseudo_class_counts
    pred = record.pseudo_class_counts_predicted
    n = record.n_pseudo
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["class", "count_truth", "percent_truth", "count_pseudo", "percent_pseudo"])
        for c in range(len(pred)):
            ct = truth[c] if truth else ""
            pt = repr(100.0 * truth[c] / n) if truth and n else ""
            w.writerow([c, ct, pt, pred[c], repr(100.0 * pred[c] / n) if n else ""])


def minority_percentage(counts, minority_classes, n_samples):
    """Share of ``n_samples`` whose truth includes one of ``minority_classes``
    (counted per class, so multilabel samples may add more than once)."""
    if n_samples == 0:
        return 0.0
    return 100.0 * sum(counts[c] for c in minority_classes) / n_samples
