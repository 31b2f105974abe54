import numpy as np
import pytest

from acpl.data import (CsvSchema, Dataset, LabelVector, SyntheticSpec, generate_synthetic,
                       holdout_split, load_csv, split_pools, write_csv)
from acpl.errors import LabelError, ParseError, SchemaError, SpecError, SplitError


def _write(tmp_path, text, name="d.csv"):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return p


class TestLabelVector:
    def test_multiclass_hard_must_be_one_hot(self):
        LabelVector([0, 1, 0], "multiclass")
        with pytest.raises(LabelError):
            LabelVector([1, 1, 0], "multiclass")

    def test_multilabel_hard_allows_several(self):
        assert LabelVector([1, 1, 0], "multilabel").values.tolist() == [1, 1, 0]

    def test_soft_range_and_sum(self):
        LabelVector([0.3, 0.7], "multiclass", "soft")
        with pytest.raises(LabelError):
            LabelVector([0.3, 0.6], "multiclass", "soft")
        with pytest.raises(LabelError):
            LabelVector([1.2, 0.0], "multilabel", "soft")


class TestLoadCsv:
    def test_three_rows_one_unlabelled(self, tmp_path):
        p = _write(tmp_path, "id,f0,f1,y0,y1\n0,0.5,1.0,1,0\n1,-1,2,0,1\n2,3,4,,\n")
        ds = load_csv(p)
        assert len(ds) == 3
        assert ds.task_kind == "multiclass"
        assert ds.labelled_mask.tolist() == [True, True, False]
        samples = list(ds)
        assert samples[2].label is None
        assert samples[0].label.values.tolist() == [1.0, 0.0]
        assert samples[1].features.tolist() == [-1.0, 2.0]

    def test_nan_feature_names_row(self, tmp_path):
        p = _write(tmp_path, "id,f0,f1,y0,y1\n0,0.5,1.0,1,0\n7,nan,2,0,1\n")
        with pytest.raises(ParseError, match="line 3") as exc:
            load_csv(p)
        assert "id 7" in str(exc.value)

    def test_multilabel_row(self, tmp_path):
        p = _write(tmp_path, "id,f0,y0,y1,y2\n0,0.1,1,1,0\n1,0.2,0,0,1\n")
        ds = load_csv(p, CsvSchema(task_kind="multilabel"))
        assert ds.labels[0].tolist() == [1.0, 1.0, 0.0]
        assert ds.task_kind == "multilabel"

    def test_inferred_multilabel(self, tmp_path):
        p = _write(tmp_path, "id,f0,y0,y1,y2\n0,0.1,1,1,0\n")
        assert load_csv(p).task_kind == "multilabel"

    def test_multiclass_row_with_two_positives(self, tmp_path):
        p = _write(tmp_path, "id,f0,y0,y1\n0,0.1,1,1\n")
        with pytest.raises(LabelError):
            load_csv(p, CsvSchema(task_kind="multiclass"))

    def test_inconsistent_width(self, tmp_path):
        p = _write(tmp_path, "id,f0,f1,y0\n0,0.1,0.2,1\n1,0.3,1\n")
        with pytest.raises(SchemaError, match="line 3"):
            load_csv(p)

    def test_malformed_cell(self, tmp_path):
        p = _write(tmp_path, "id,f0,y0,y1\n0,abc,1,0\n")
        with pytest.raises(ParseError, match="line 2"):
            load_csv(p)

    def test_round_trip(self, tmp_path):
        ds = generate_synthetic(SyntheticSpec([5, 4], [[0, 0], [2, 2]]), seed=3)
        write_csv(ds, tmp_path / "x.csv")
        back = load_csv(tmp_path / "x.csv")
        np.testing.assert_array_equal(back.features, ds.features)
        np.testing.assert_array_equal(back.labels, ds.labels)
        np.testing.assert_array_equal(back.ids, ds.ids)


class TestSynthetic:
    def test_deterministic_two_class(self):
        spec = SyntheticSpec([10, 10], [[-2.0], [2.0]], [[[1.0]], [[1.0]]])
        a = generate_synthetic(spec, 7)
        b = generate_synthetic(spec, 7)
        assert len(a) == 20
        assert a.labels.sum(axis=0).tolist() == [10, 10]
        np.testing.assert_array_equal(a.features, b.features)
        np.testing.assert_array_equal(a.labels, b.labels)

    def test_zero_count_rejected(self):
        with pytest.raises(SpecError):
            generate_synthetic(SyntheticSpec([0, 10], [[-2.0], [2.0]]), 7)

    def test_histogram_by_construction(self):
        spec = SyntheticSpec([700, 150, 100, 50], np.eye(4).tolist())
        ds = generate_synthetic(spec, 0)
        assert ds.labels.sum(axis=0).astype(int).tolist() == [700, 150, 100, 50]

    def test_non_psd_covariance(self):
        bad = [[[1.0, 2.0], [2.0, 1.0]], np.eye(2).tolist()]
        with pytest.raises(SpecError, match="semi-definite"):
            generate_synthetic(SyntheticSpec([3, 3], [[0, 0], [1, 1]], bad), 0)

    def test_multilabel_co_activation(self):
        co = [[0, 1.0, 0], [0, 0, 0], [0, 0, 0]]
        spec = SyntheticSpec([20, 5, 5], np.eye(3).tolist(), task_kind="multilabel",
                             co_activation=co)
        ds = generate_synthetic(spec, 1)
        primary0 = (ds.labels[:, 0] == 1)
        # class 1 always co-fires with primary class 0
        assert np.all(ds.labels[primary0, 1] == 1)
        assert ds.labels.sum(axis=0).tolist() == [20, 25, 5]


class TestSplit:
    def test_stratified_balanced(self):
        ds = generate_synthetic(SyntheticSpec([50, 50], [[0.0], [1.0]]), 0)
        pools = split_pools(ds, 0.2, stratified=True, seed=1)
        ids, y = pools.labelled_arrays()
        assert ids.size == 20
        assert y.sum(axis=0).tolist() == [10, 10]
        assert len(pools.unlabelled) == 80
        assert pools.pseudo == {}
        assert set(pools.anchor) == set(pools.labelled)

    def test_full_fraction(self):
        ds = generate_synthetic(SyntheticSpec([5, 5], [[0.0], [1.0]]), 0)
        pools = split_pools(ds, 1.0, seed=0)
        assert pools.unlabelled == []
        assert set(pools.anchor) == set(pools.labelled) == set(ds.ids.tolist())

    def test_minority_gets_one(self):
        # ceil(0.02 * 49) = 1 by hand
        ds = generate_synthetic(SyntheticSpec([700, 150, 100, 49], np.eye(4).tolist()), 0)
        pools = split_pools(ds, 0.02, stratified=True, seed=0)
        _, y = pools.labelled_arrays()
        assert y.sum(axis=0).astype(int).tolist() == [14, 3, 2, 1]

    def test_missing_class_is_split_error(self):
        labels = np.array([[1, 0, 0], [1, 0, 0], [0, 1, 0]], dtype=float)
        ds = Dataset(np.arange(3), np.zeros((3, 1)), labels, "multiclass")
        with pytest.raises(SplitError):
            split_pools(ds, 0.5, stratified=True)

    def test_unstratified_count(self):
        ds = generate_synthetic(SyntheticSpec([30, 10], [[0.0], [1.0]]), 0)
        pools = split_pools(ds, 0.1, stratified=False, seed=4)
        assert len(pools.labelled) == 4

    def test_same_seed_same_membership(self):
        ds = generate_synthetic(SyntheticSpec([30, 10], [[0.0], [1.0]]), 0)
        a = split_pools(ds, 0.3, seed=9)
        b = split_pools(ds, 0.3, seed=9)
        assert list(a.labelled) == list(b.labelled)
        assert a.unlabelled == b.unlabelled

    def test_hidden_labels_kept_for_oracles(self):
        ds = generate_synthetic(SyntheticSpec([30, 10], [[0.0], [1.0]]), 0)
        pools = split_pools(ds, 0.3, seed=9)
        u = pools.unlabelled_ids()
        np.testing.assert_array_equal(pools.hidden_truth(u), ds.labels[ds.rows(u)])

    def test_csv_unlabelled_rows_stay_unlabelled(self):
        labels = np.array([[1, 0], [0, 1], [np.nan, np.nan], [1, 0]])
        ds = Dataset(np.arange(4), np.eye(4)[:, :2] + 0.1, labels, "multiclass")
        pools = split_pools(ds, 1.0, stratified=True)
        assert pools.unlabelled == [2]


class TestPools:
    def _pools(self):
        ds = generate_synthetic(SyntheticSpec([20, 20], [[0.0], [1.0]]), 0)
        return split_pools(ds, 0.25, seed=0)

    def test_migration_bookkeeping(self):
        pools = self._pools()
        n_l, n_u = len(pools.labelled), len(pools.unlabelled)
        pick = pools.unlabelled_ids()[:7]
        pools.set_pseudo(pick, np.full((7, 2), 0.5))
        pools.add_anchors(pick[:2], np.full((2, 2), 0.5))
        pools.check_invariants()
        assert pools.migrate() == 7
        pools.check_invariants()
        assert len(pools.labelled) == n_l + 7
        assert len(pools.unlabelled) == n_u - 7
        assert not set(pick) & set(pools.unlabelled)

    def test_pseudo_must_come_from_unlabelled(self):
        pools = self._pools()
        lab = next(iter(pools.labelled))
        with pytest.raises(SplitError):
            pools.set_pseudo([lab], [[1.0, 0.0]])

    def test_invariant_violation_detected(self):
        pools = self._pools()
        pools.anchor[pools.unlabelled[0]] = np.array([1.0, 0.0])
        with pytest.raises(AssertionError):
            pools.check_invariants()


def test_holdout_split_is_stratified_and_disjoint():
    ds = generate_synthetic(SyntheticSpec([100, 20], [[0.0], [1.0]]), 0)
    rest, held = holdout_split(ds, 0.25, seed=0)
    assert held.labels.sum(axis=0).tolist() == [25, 5]
    assert not set(rest.ids.tolist()) & set(held.ids.tolist())
    assert len(rest) + len(held) == 120


def test_mode_offsets_make_multimodal_classes():
    offsets = [[[-5.0], [5.0]], [[0.0]]]
    spec = SyntheticSpec([400, 50], [[0.0], [0.0]], [[[0.01]], [[0.01]]], mode_offsets=offsets)
    ds = generate_synthetic(spec, 0)
    x0 = ds.features[ds.labels[:, 0] == 1, 0]
    assert np.all(np.abs(np.abs(x0) - 5.0) < 0.5)
    assert 150 < (x0 > 0).sum() < 250
    with pytest.raises(SpecError):
        generate_synthetic(SyntheticSpec([4, 5], [[0.0], [0.0]], mode_offsets=offsets[:1]), 0)
