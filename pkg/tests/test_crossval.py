import numpy as np
import pytest

from descomp import ClassifierSpec, MethodParams, numeric_dataset
from descomp.crossval import (CvConfig, MethodSpec, cross_validate, effective_folds,
                              evaluate_fold, reduce_fold_results, stratified_folds,
                              stratified_split)
from descomp.metrics import CRITERIA

from conftest import make_blobs

SMALL_POOL = (ClassifierSpec("nearest_centroid"), ClassifierSpec("lda"))
FAST_BOOT = MethodSpec("bootstrap", MethodParams(k_bootstrap=2))


class TestStratifiedFolds:
    def test_exact_partition(self):
        labels = np.array([0, 1] * 15)
        folds = stratified_folds(labels, 3, seed=4)
        combined = np.sort(np.concatenate(folds))
        np.testing.assert_array_equal(combined, np.arange(30))

    def test_deterministic(self):
        labels = np.array([0, 1, 2] * 8)
        a = stratified_folds(labels, 4, seed=9)
        b = stratified_folds(labels, 4, seed=9)
        for fa, fb in zip(a, b):
            np.testing.assert_array_equal(fa, fb)

    def test_class_ratio_within_one(self):
        rng = np.random.default_rng(3)
        labels = rng.integers(0, 3, size=61)
        folds = stratified_folds(labels, 2, seed=1)
        for c in range(3):
            total = (labels == c).sum()
            for fold in folds:
                in_fold = (labels[fold] == c).sum()
                assert abs(in_fold - total / 2) <= 1


class TestStratifiedSplit:
    def test_partition_and_ratio(self):
        labels = np.array([0] * 30 + [1] * 15)
        a, b = stratified_split(labels, 2 / 3, seed=2)
        assert sorted(np.concatenate([a, b]).tolist()) == list(range(45))
        assert (labels[a] == 0).sum() == 20 and (labels[a] == 1).sum() == 10

    def test_second_part_never_empty(self):
        labels = np.array([0, 1])
        a, b = stratified_split(labels, 0.99, seed=0)
        assert b.size >= 1 and a.size + b.size == 2


class TestEffectiveFolds:
    def test_reduction_with_warning(self):
        labels = np.array([0] * 10 + [1] * 3)
        folds, warning = effective_folds(labels, 5)
        assert folds == 3 and "reduced folds" in warning

    def test_too_small(self):
        labels = np.array([0] * 10 + [1])
        with pytest.raises(ValueError, match="too small for 2 folds"):
            effective_folds(labels, 2)

    def test_no_reduction(self):
        assert effective_folds(np.array([0, 0, 1, 1]), 2) == (2, None)


class TestCrossValidate:
    def test_result_shape_and_determinism(self):
        ds = make_blobs(n=48, seed=10)
        cv = CvConfig(folds=2, repeats=2)
        a = cross_validate(ds, SMALL_POOL, [FAST_BOOT], cv, seed=5)
        b = cross_validate(ds, SMALL_POOL, [FAST_BOOT], cv, seed=5)
        assert a.losses == b.losses
        assert set(a.losses["bootstrap"].keys()) == set(CRITERIA)
        assert a.folds_used == 2 and a.repeats == 2

    def test_easy_data_scores_high(self):
        ds = make_blobs(n=60, centers=((-6.0, 0.0), (6.0, 0.0)), scale=0.4, seed=11)
        result = cross_validate(ds, SMALL_POOL, [FAST_BOOT],
                                CvConfig(folds=2, repeats=1), seed=6)
        assert result.losses["bootstrap"]["MiFNR"] <= 0.05

    def test_methods_share_failures_and_pool(self):
        ds = make_blobs(n=48, seed=12)
        methods = [FAST_BOOT, MethodSpec("rrc_beta", MethodParams(mc_samples=300))]
        result = cross_validate(ds, SMALL_POOL, methods,
                                CvConfig(folds=2, repeats=1), seed=7)
        assert set(result.methods) == {"bootstrap", "rrc_beta"}

    def test_fold_reduction_warning_recorded(self):
        features = np.vstack([np.random.default_rng(0).normal(size=(20, 2)),
                              np.random.default_rng(1).normal(5.0, 1.0, (3, 2))])
        labels = np.array([0] * 20 + [1] * 3)
        ds = numeric_dataset(features, labels, 2)
        result = cross_validate(ds, SMALL_POOL, [FAST_BOOT],
                                CvConfig(folds=5, repeats=1), seed=8)
        assert result.folds_used == 3
        assert any("reduced folds" in w for w in result.warnings)


class TestFoldTasks:
    def test_reduce_is_order_insensitive(self):
        ds = make_blobs(n=48, seed=13)
        cv = CvConfig(folds=2, repeats=2)
        tasks = [(r, f) for r in range(2) for f in range(2)]
        results = [evaluate_fold(ds, SMALL_POOL, [FAST_BOOT], cv, 9, 2, r, f)
                   for r, f in tasks]
        forward = reduce_fold_results([FAST_BOOT], results, 2, 2)
        backward = reduce_fold_results([FAST_BOOT], list(reversed(results)), 2, 2)
        assert forward.losses == backward.losses

    def test_matches_cross_validate(self):
        ds = make_blobs(n=48, seed=13)
        cv = CvConfig(folds=2, repeats=2)
        direct = cross_validate(ds, SMALL_POOL, [FAST_BOOT], cv, seed=9)
        tasks = [evaluate_fold(ds, SMALL_POOL, [FAST_BOOT], cv, 9, 2, r, f)
                 for r in range(2) for f in range(2)]
        reduced = reduce_fold_results([FAST_BOOT], tasks, 2, 2)
        assert direct.losses == reduced.losses
