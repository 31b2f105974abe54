"""Datasets, CSV ingestion, synthetic generation and the four sample pools."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from .errors import LabelError, ParseError, SchemaError, SpecError, SplitError

MULTICLASS = "multiclass"
MULTILABEL = "multilabel"
TASK_KINDS = (MULTICLASS, MULTILABEL)


def _check_task_kind(task_kind):
    if task_kind not in TASK_KINDS:
        raise ValueError(f"task_kind must be one of {TASK_KINDS}, got {task_kind!r}")


@dataclass(frozen=True)
class LabelVector:
    values: np.ndarray
    task_kind: str
    hardness: str = "hard"

    def __post_init__(self):
        _check_task_kind(self.task_kind)
        v = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "values", v)
        if v.ndim != 1 or v.size == 0:
            raise LabelError("label vector must be a non-empty 1-D array")
        if self.hardness == "hard":
            if not np.all((v == 0.0) | (v == 1.0)):
                raise LabelError(f"hard label has entries outside {{0,1}}: {v.tolist()}")
            if self.task_kind == MULTICLASS and v.sum() != 1.0:
                raise LabelError(f"multiclass label must be one-hot, got {v.tolist()}")
        elif self.hardness == "soft":
            if np.any(v < 0.0) or np.any(v > 1.0) or not np.all(np.isfinite(v)):
                raise LabelError(f"soft label entries must lie in [0, 1]: {v.tolist()}")
            if self.task_kind == MULTICLASS and abs(v.sum() - 1.0) > 1e-6:
                raise LabelError(f"multiclass soft label must sum to 1, got {v.sum()}")
        else:
            raise ValueError(f"hardness must be 'hard' or 'soft', got {self.hardness!r}")

    def __len__(self):
        return self.values.size


@dataclass(frozen=True)
class Sample:
    id: int
    features: np.ndarray
    label: LabelVector | None = None


@dataclass
class Dataset:
    """Row-aligned arrays: ids ``(n,)``, features ``(n, D)``, labels ``(n, C)``.

    Unlabelled rows carry NaN labels.
    """

    ids: np.ndarray
    features: np.ndarray
    labels: np.ndarray
    task_kind: str
    _pos: dict = field(init=False, repr=False)

    def __post_init__(self):
        _check_task_kind(self.task_kind)
        self.ids = np.asarray(self.ids, dtype=np.int64)
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.float64)
        n = self.ids.shape[0]
        if self.features.ndim != 2 or self.features.shape[0] != n:
            raise SchemaError("features must be a (n, D) array aligned with ids")
        if self.labels.ndim != 2 or self.labels.shape[0] != n:
            raise SchemaError("labels must be a (n, C) array aligned with ids")
        if not np.all(np.isfinite(self.features)):
            raise ParseError("features contain NaN or Inf")
        self._pos = {int(i): r for r, i in enumerate(self.ids)}
        if len(self._pos) != n:
            raise SchemaError("sample ids must be unique")

    def __len__(self):
        return self.ids.shape[0]

    def __iter__(self) -> Iterator[Sample]:
        for r in range(len(self)):
            yield self.sample(r)

    def sample(self, row) -> Sample:
        y = self.labels[row]
        label = None if np.isnan(y).any() else LabelVector(y.copy(), self.task_kind)
        return Sample(int(self.ids[row]), self.features[row].copy(), label)

    @property
    def dim(self):
        return self.features.shape[1]

    @property
    def num_classes(self):
        return self.labels.shape[1]

    @property
    def labelled_mask(self):
        return ~np.isnan(self.labels).any(axis=1)

    def rows(self, ids) -> np.ndarray:
        try:
            return np.fromiter((self._pos[int(i)] for i in ids), dtype=np.int64)
        except KeyError as exc:
            raise KeyError(f"unknown sample id {exc.args[0]}") from None

    def subset(self, rows) -> "Dataset":
        rows = np.asarray(rows, dtype=np.int64)
        return Dataset(self.ids[rows], self.features[rows], self.labels[rows], self.task_kind)

    def class_of(self, rows=None) -> np.ndarray:
        """Stratum per row: argmax for multiclass, first positive class for
        multilabel (``num_classes`` for an all-zero label row)."""
        y = self.labels if rows is None else self.labels[rows]
        first = np.argmax(y > 0.5, axis=1)
        if self.task_kind == MULTILABEL:
            first = np.where((y > 0.5).any(axis=1), first, self.num_classes)
        return first


# --------------------------------------------------------------------------
# CSV
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class CsvSchema:
    id_column: str = "id"
    feature_columns: tuple | None = None
    label_columns: tuple | None = None
    task_kind: str | None = None

    def resolve(self, header):
        feats = self.feature_columns
        labs = self.label_columns
        if feats is None:
            feats = tuple(h for h in header if h.startswith("f") and h[1:].isdigit())
        if labs is None:
            labs = tuple(h for h in header if h.startswith("y") and h[1:].isdigit())
        missing = [c for c in (self.id_column, *feats, *labs) if c not in header]
        if missing:
            raise SchemaError(f"columns not in header: {missing}")
        if not feats:
            raise SchemaError("no feature columns")
        if not labs:
            raise SchemaError("no label columns")
        return feats, labs


def load_csv(path, schema: CsvSchema | None = None) -> Dataset:
    """Read the ``id,f0..f{D-1},y0..y{C-1}`` format.

    Rows whose label cells are all empty become unlabelled samples. When the
    schema leaves ``task_kind`` unset it is inferred: multiclass if every
    labelled row is one-hot, multilabel otherwise.
    """
    schema = schema or CsvSchema()
    path = Path(path)
    ids, feats, labels = [], [], []
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        fcols, lcols = schema.resolve(header)
        col = {h: i for i, h in enumerate(header)}
        fidx = [col[c] for c in fcols]
        lidx = [col[c] for c in lcols]
        for row in reader:
            line = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise SchemaError(
                    f"line {line}: expected {len(header)} cells, got {len(row)}")
            try:
                sid = int(row[col[schema.id_column]])
            except ValueError:
                raise ParseError(f"bad id {row[col[schema.id_column]]!r}", line) from None
            x = []
            for i in fidx:
                try:
                    v = float(row[i])
                except ValueError:
                    raise ParseError(f"bad feature value {row[i]!r} (id {sid})", line) from None
                if not math.isfinite(v):
                    raise ParseError(f"non-finite feature {row[i]!r} (id {sid})", line)
                x.append(v)
            cells = [row[i].strip() for i in lidx]
            if all(c == "" for c in cells):
                y = [math.nan] * len(cells)
            elif any(c == "" for c in cells):
                raise LabelError(f"line {line}: partially empty label cells (id {sid})")
            else:
                try:
                    y = [float(c) for c in cells]
                except ValueError:
                    raise ParseError(f"bad label cell in {cells} (id {sid})", line) from None
                if any(v not in (0.0, 1.0) for v in y):
                    raise LabelError(f"line {line}: labels must be 0 or 1, got {cells}")
            ids.append(sid)
            feats.append(x)
            labels.append(y)
    if not ids:
        raise SchemaError(f"{path}: no data rows")
    labels_arr = np.asarray(labels, dtype=np.float64)
    task_kind = schema.task_kind
    labelled = ~np.isnan(labels_arr).any(axis=1)
    positives = labels_arr[labelled].sum(axis=1)
    if task_kind is None:
        task_kind = MULTICLASS if np.all(positives == 1.0) else MULTILABEL
    _check_task_kind(task_kind)
    if task_kind == MULTICLASS and np.any(positives != 1.0):
        bad = np.asarray(ids)[labelled][positives != 1.0][0]
        raise LabelError(f"multiclass row id {bad} does not have exactly one positive label")
    return Dataset(np.asarray(ids), np.asarray(feats, dtype=np.float64), labels_arr, task_kind)


def write_csv(dataset: Dataset, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = (["id"] + [f"f{j}" for j in range(dataset.dim)]
              + [f"y{c}" for c in range(dataset.num_classes)])
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in range(len(dataset)):
            y = dataset.labels[r]
            ycells = [""] * y.size if np.isnan(y).any() else [str(int(v)) for v in y]
            w.writerow([str(int(dataset.ids[r]))]
                       + [repr(float(v)) for v in dataset.features[r]] + ycells)


# --------------------------------------------------------------------------
# synthetic data
# --------------------------------------------------------------------------

@dataclass
class SyntheticSpec:
    """Per-class Gaussians. For multilabel data, ``counts`` are per primary
    class; class ``j`` co-activates on a primary-``c`` sample with probability
    ``co_activation[c][j]`` and shifts its features by
    ``co_shift * means[j]``.

    ``mode_offsets[c]``, when given, is a list of offset vectors: each
    class-``c`` sample is centred on ``means[c]`` plus one of them, picked
    uniformly, which turns the class into a mixture of equal-covariance modes.
    """

    counts: Sequence[int]
    means: Sequence[Sequence[float]]
    covs: Sequence | None = None
    task_kind: str = MULTICLASS
    co_activation: Sequence[Sequence[float]] | None = None
    co_shift: float = 0.5
    mode_offsets: Sequence | None = None

    @classmethod
    def from_dict(cls, d) -> "SyntheticSpec":
        d = dict(d)
        unknown = set(d) - {"counts", "means", "covs", "variances", "task_kind",
                            "co_activation", "co_shift", "mode_offsets", "num_classes", "dim"}
        if unknown:
            raise SpecError(f"unknown synthetic spec keys: {sorted(unknown)}")
        variances = d.pop("variances", None)
        d.pop("num_classes", None)
        d.pop("dim", None)
        if "counts" not in d or "means" not in d:
            raise SpecError("synthetic spec needs 'counts' and 'means'")
        if variances is not None and d.get("covs") is None:
            dim = len(d["means"][0])
            d["covs"] = [(np.eye(dim) * float(v)).tolist() for v in variances]
        return cls(**d)

    @classmethod
    def from_json(cls, path) -> "SyntheticSpec":
        try:
            with open(path, encoding="utf-8") as fh:
                return cls.from_dict(json.load(fh))
        except json.JSONDecodeError as exc:
            raise SpecError(f"{path}: invalid JSON ({exc})") from None


def _validated(spec: SyntheticSpec):
    _check_task_kind(spec.task_kind)
    counts = np.asarray(spec.counts, dtype=np.int64)
    means = np.atleast_2d(np.asarray(spec.means, dtype=np.float64))
    c = counts.size
    if c < 1 or np.any(counts < 1):
        raise SpecError(f"every class count must be >= 1, got {counts.tolist()}")
    if means.shape[0] != c:
        raise SpecError(f"{c} counts but {means.shape[0]} means")
    dim = means.shape[1]
    if spec.covs is None:
        covs = np.stack([np.eye(dim)] * c)
    else:
        covs = np.asarray(spec.covs, dtype=np.float64)
        if covs.ndim == 1:
            covs = covs[:, None, None] * np.eye(dim)
        if covs.shape != (c, dim, dim):
            raise SpecError(f"covariances must have shape {(c, dim, dim)}, got {covs.shape}")
    for k in range(c):
        if not np.allclose(covs[k], covs[k].T, atol=1e-12):
            raise SpecError(f"covariance of class {k} is not symmetric")
        if np.linalg.eigvalsh(covs[k]).min() < -1e-10:
            raise SpecError(f"covariance of class {k} is not positive semi-definite")
    co = None
    if spec.task_kind == MULTILABEL and spec.co_activation is not None:
        co = np.asarray(spec.co_activation, dtype=np.float64)
        if co.shape != (c, c) or np.any(co < 0) or np.any(co > 1):
            raise SpecError("co_activation must be a (C, C) table of probabilities")
    modes = None
    if spec.mode_offsets is not None:
        if len(spec.mode_offsets) != c:
            raise SpecError(f"{c} counts but {len(spec.mode_offsets)} mode offset lists")
        modes = []
        for k, off in enumerate(spec.mode_offsets):
            off = np.atleast_2d(np.asarray(off, dtype=np.float64))
            if off.shape[0] < 1 or off.shape[1] != dim:
                raise SpecError(f"mode offsets of class {k} must have shape (m, {dim})")
            modes.append(off)
    return counts, means, covs, co, modes


def generate_synthetic(spec: SyntheticSpec, seed: int) -> Dataset:
    """Draw a labelled dataset. Ids are ``0..n-1`` assigned after a seeded
    shuffle so id order carries no class information."""
    counts, means, covs, co, modes = _validated(spec)
    rng = np.random.default_rng(seed)
    c, dim = means.shape
    xs, ys = [], []
    for k in range(c):
        x = rng.multivariate_normal(means[k], covs[k], size=int(counts[k]), method="eigh")
        if modes is not None:
            x = x + modes[k][rng.integers(0, modes[k].shape[0], size=int(counts[k]))]
        y = np.zeros((counts[k], c))
        y[:, k] = 1.0
        if co is not None:
            draw = rng.random((counts[k], c)) < co[k]
            draw[:, k] = False
            y[draw] = 1.0
            x = x + spec.co_shift * (draw.astype(np.float64) @ means)
        xs.append(x)
        ys.append(y)
    x = np.concatenate(xs)
    y = np.concatenate(ys)
    perm = rng.permutation(x.shape[0])
    return Dataset(np.arange(x.shape[0]), x[perm], y[perm], spec.task_kind)


# --------------------------------------------------------------------------
# pools
# --------------------------------------------------------------------------

def _ceil_fraction(fraction, n):
    return int(math.ceil(fraction * n - 1e-9))


@dataclass
class DataPools:
    """Labelled, unlabelled, pseudo-labelled and anchor pools keyed by sample id.

    ``labelled``, ``pseudo`` and ``anchor`` map id -> target vector. Ground
    truth for unlabelled ids stays inside ``dataset``; training code should
    only read it through :meth:`features` and the pool targets.
    """

    dataset: Dataset
    labelled: dict = field(default_factory=dict)
    unlabelled: list = field(default_factory=list)
    pseudo: dict = field(default_factory=dict)
    anchor: dict = field(default_factory=dict)
    ever_pseudo: set = field(default_factory=set)

    def __post_init__(self):
        self._total = len(self.labelled) + len(self.unlabelled)

    @property
    def task_kind(self):
        return self.dataset.task_kind

    @property
    def num_classes(self):
        return self.dataset.num_classes

    def copy(self) -> "DataPools":
        out = DataPools(
            self.dataset,
            {k: v.copy() for k, v in self.labelled.items()},
            list(self.unlabelled),
            {k: v.copy() for k, v in self.pseudo.items()},
            {k: v.copy() for k, v in self.anchor.items()},
            set(self.ever_pseudo),
        )
        out._total = self._total
        return out

    def features(self, ids) -> np.ndarray:
        return self.dataset.features[self.dataset.rows(ids)]

    @staticmethod
    def _stack(pool: dict, width):
        ids = np.fromiter(sorted(pool), dtype=np.int64, count=len(pool))
        if not ids.size:
            return ids, np.empty((0, width))
        return ids, np.stack([pool[int(i)] for i in ids])

    def labelled_arrays(self):
        return self._stack(self.labelled, self.num_classes)

    def pseudo_arrays(self):
        return self._stack(self.pseudo, self.num_classes)

    def anchor_arrays(self):
        return self._stack(self.anchor, self.num_classes)

    def unlabelled_ids(self) -> np.ndarray:
        return np.asarray(sorted(self.unlabelled), dtype=np.int64)

    def hidden_truth(self, ids) -> np.ndarray:
        """Ground truth of (possibly unlabelled) samples, for evaluation only."""
        return self.dataset.labels[self.dataset.rows(ids)]

    def set_pseudo(self, ids, targets):
        unl = set(self.unlabelled)
        self.pseudo = {}
        for i, t in zip(ids, targets):
            i = int(i)
            if i not in unl:
                raise SplitError(f"pseudo-label for id {i} which is not unlabelled")
            self.pseudo[i] = np.asarray(t, dtype=np.float64).copy()
        self.ever_pseudo.update(self.pseudo)

    def add_anchors(self, ids, targets):
        for i, t in zip(ids, targets):
            self.anchor[int(i)] = np.asarray(t, dtype=np.float64).copy()

    def migrate(self):
        """Move the pseudo-labelled pool into the labelled pool and out of the
        unlabelled one, then clear it."""
        moved = set(self.pseudo)
        self.labelled.update(self.pseudo)
        self.unlabelled = [i for i in self.unlabelled if i not in moved]
        self.pseudo = {}
        return len(moved)

    def check_invariants(self):
        lab = set(self.labelled)
        unl = set(self.unlabelled)
        if lab & unl:
            raise AssertionError(f"labelled and unlabelled overlap: {sorted(lab & unl)[:5]}")
        if len(unl) != len(self.unlabelled):
            raise AssertionError("duplicate ids in unlabelled pool")
        if len(lab) + len(unl) != self._total:
            raise AssertionError("labelled + unlabelled size changed")
        if not set(self.pseudo) <= unl:
            raise AssertionError("pseudo ids not drawn from the unlabelled pool")
        if not set(self.anchor) <= lab | self.ever_pseudo:
            raise AssertionError("anchor ids outside labelled and past pseudo ids")


def split_pools(dataset: Dataset, labelled_fraction: float, stratified: bool = True,
                seed: int = 0) -> DataPools:
    """Partition a dataset into labelled and unlabelled pools; the anchor set
    starts as a copy of the labelled pool.

    ``ceil(fraction * n)`` samples are labelled, counted per stratum when
    ``stratified``. Rows that are already unlabelled in ``dataset`` (CSV input
    with empty label cells) always go to the unlabelled pool.
    """
    if not 0.0 < labelled_fraction <= 1.0:
        raise SplitError(f"labelled_fraction must be in (0, 1], got {labelled_fraction}")
    rng = np.random.default_rng(seed)
    mask = dataset.labelled_mask
    rows = np.flatnonzero(mask)
    if rows.size == 0:
        raise SplitError("dataset has no labelled rows")
    if stratified:
        strata = dataset.class_of(rows)
        chosen = []
        for c in range(dataset.num_classes):
            members = rows[strata == c]
            if members.size == 0:
                raise SplitError(f"stratified split impossible: class {c} has no samples")
            take = _ceil_fraction(labelled_fraction, members.size)
            chosen.append(rng.permutation(members)[:take])
        extra = rows[strata == dataset.num_classes]
        if extra.size:
            chosen.append(rng.permutation(extra)[:_ceil_fraction(labelled_fraction, extra.size)])
        picked = np.concatenate(chosen)
    else:
        picked = rng.permutation(rows)[:_ceil_fraction(labelled_fraction, rows.size)]
    picked_set = set(picked.tolist())
    labelled = {int(dataset.ids[r]): dataset.labels[r].copy() for r in sorted(picked_set)}
    unlabelled = sorted(int(dataset.ids[r]) for r in range(len(dataset)) if r not in picked_set)
    anchor = {k: v.copy() for k, v in labelled.items()}
    return DataPools(dataset, labelled, unlabelled, {}, anchor)


def holdout_split(dataset: Dataset, fraction: float, seed: int = 0):
    """Stratified ``(rest, held_out)`` split of the labelled rows; unlabelled
    rows stay in ``rest``."""
    if not 0.0 < fraction < 1.0:
        raise SplitError(f"held-out fraction must be in (0, 1), got {fraction}")
    rng = np.random.default_rng(seed)
    rows = np.flatnonzero(dataset.labelled_mask)
    strata = dataset.class_of(rows)
    held = []
    for c in np.unique(strata):
        members = rng.permutation(rows[strata == c])
        held.append(members[:int(math.floor(fraction * members.size + 1e-9))])
    held = np.sort(np.concatenate(held))
    if held.size == 0:
        raise SplitError("held-out split is empty; raise the fraction")
    rest = np.setdiff1d(np.arange(len(dataset)), held)
    return dataset.subset(rest), dataset.subset(held)
