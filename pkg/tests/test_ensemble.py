import numpy as np
import pytest

from descomp import (ClassifierSpec, CompetenceField, CompetenceSet, MethodParams,
                     TrainedEnsemble, argmax_support, classify, classify_batch,
                     classify_explain, fuse_supports, numeric_dataset,
                     select_ensemble, train_des)
from descomp.classifiers import DEFAULT_POOL
from descomp.crossval import stratified_split
from descomp.model_io import serialize_model

from conftest import make_blobs


def synthetic_ensemble(competence_rows, alpha=0.5, train_seed=3):
    """Ensemble over hand-built constant competence fields.

    Each row of ``competence_rows`` is the single source value of one
    member's field, making competence_at constant over feature space.
    """
    ds = make_blobs(n=40, seed=7)
    tr, va = stratified_split(ds.labels, 2 / 3, seed=1)
    base = train_des([ClassifierSpec("lda"), ClassifierSpec("qda"),
                      ClassifierSpec("knn", k=3)][:len(competence_rows)],
                     ds.subset(tr), ds.subset(va),
                     method="bootstrap", params=MethodParams(k_bootstrap=2),
                     seed=train_seed, alpha=alpha)
    dim = base.pipeline.output_dim
    fields = tuple(
        CompetenceField(CompetenceSet(np.zeros((1, dim)), np.array([c]), f"m{i}"))
        for i, c in enumerate(competence_rows))
    return TrainedEnsemble(
        pool=base.pool, fields=fields, alpha=alpha, n_classes=base.n_classes,
        pipeline=base.pipeline, method=base.method, params=base.params,
        seed=base.seed, class_names=base.class_names,
        attribute_meta=base.attribute_meta)


class TestSelection:
    def test_threshold_membership(self):
        e = synthetic_ensemble([0.6, 0.4, 0.7], alpha=0.5)
        selected = select_ensemble(e, np.zeros(e.pipeline.output_dim))
        assert [i for i, _ in selected] == [0, 2]

    def test_fallback_to_best(self):
        e = synthetic_ensemble([0.2, 0.45, 0.3], alpha=0.5)
        selected = select_ensemble(e, np.zeros(e.pipeline.output_dim))
        assert [i for i, _ in selected] == [1]

    def test_exactly_alpha_excluded(self):
        e = synthetic_ensemble([0.5, 0.8], alpha=0.5)
        selected = select_ensemble(e, np.zeros(e.pipeline.output_dim))
        assert [i for i, _ in selected] == [1]

    def test_lower_alpha_never_removes_members(self):
        for rows in ([0.6, 0.4, 0.7], [0.2, 0.1, 0.05], [0.5, 0.5, 0.5]):
            chosen = {}
            for alpha in (0.8, 0.5, 0.3, 0.0):
                e = synthetic_ensemble(rows, alpha=alpha)
                z = np.zeros(e.pipeline.output_dim)
                chosen[alpha] = {i for i, _ in select_ensemble(e, z)}
            assert chosen[0.8] <= chosen[0.5] <= chosen[0.3] <= chosen[0.0]


class TestFusion:
    def test_weighted_average(self):
        e = synthetic_ensemble([1.0, 1.0])
        fused = np.array([1.0, 1.0]) @ np.array([[0.6, 0.4], [0.2, 0.8]])
        np.testing.assert_allclose(fused / fused.sum(), [0.4, 0.6])

    def test_single_member_passthrough(self):
        e = synthetic_ensemble([0.9], alpha=0.5)
        x = make_blobs(n=4, seed=31).features[0]
        z = e.pipeline.apply(x)
        fused = fuse_supports(e, z, [(0, 0.9)])
        member = e.pool[0].predict_supports(z)
        np.testing.assert_allclose(fused, member, atol=1e-12)

    def test_orthogonal_supports(self):
        # competences (0.75, 0.25) with supports (1,0) and (0,1)
        raw = 0.75 * np.array([1.0, 0.0]) + 0.25 * np.array([0.0, 1.0])
        np.testing.assert_allclose(raw / raw.sum(), [0.75, 0.25])

    def test_empty_selection_rejected(self):
        e = synthetic_ensemble([0.9])
        with pytest.raises(ValueError, match="empty"):
            fuse_supports(e, np.zeros(e.pipeline.output_dim), [])

    def test_zero_weights_flagged_uniform(self):
        e = synthetic_ensemble([0.0, 0.0], alpha=0.5)
        x = make_blobs(n=4, seed=31).features[0]
        trace = classify_explain(e, x)
        assert trace.fallback_used and trace.degenerate_weights
        np.testing.assert_allclose(trace.fused, [0.5, 0.5])


class TestClassify:
    def test_reduction_to_single_classifier(self):
        blobs = make_blobs(n=90, seed=5)
        tr_idx, va_idx = stratified_split(blobs.labels, 2 / 3, seed=2)
        e = train_des([ClassifierSpec("naive_bayes_gaussian")],
                      blobs.subset(tr_idx), blobs.subset(va_idx),
                      method="bootstrap", params=MethodParams(k_bootstrap=3), seed=4)
        lone = e.pool[0]
        queries = np.random.default_rng(0).normal(0.0, 3.0, size=(200, 2))
        for x in queries:
            expected = argmax_support(lone.predict_supports(e.pipeline.apply(x)))
            assert classify(e, x) == expected

    def test_higher_competence_member_wins(self):
        e = synthetic_ensemble([0.9, 0.2], alpha=0.5)
        x = make_blobs(n=4, seed=31).features[0]
        trace = classify_explain(e, x)
        assert trace.selected == (0,)
        z = e.pipeline.apply(x)
        assert trace.label == argmax_support(e.pool[0].predict_supports(z))

    def test_three_member_pipeline_oracle(self):
        # independent step-by-step recomputation: select -> weight -> argmax
        e = synthetic_ensemble([0.7, 0.6, 0.55], alpha=0.5)
        rng = np.random.default_rng(9)
        for x in rng.normal(0.0, 2.0, size=(25, 2)):
            z = e.pipeline.apply(x)
            comps = [0.7, 0.6, 0.55]
            members = [i for i, c in enumerate(comps) if c > 0.5]
            raw = np.zeros(2)
            for i in members:
                raw += comps[i] * e.pool[i].predict_supports(z)
            assert classify(e, x) == int(np.argmax(raw / raw.sum()))

    def test_batch_equals_single_calls(self):
        blobs = make_blobs(n=60, seed=12)
        tr_idx, va_idx = stratified_split(blobs.labels, 2 / 3, seed=3)
        e = train_des(DEFAULT_POOL, blobs.subset(tr_idx), blobs.subset(va_idx),
                      method="bootstrap", params=MethodParams(k_bootstrap=2), seed=5)
        X = np.random.default_rng(1).normal(size=(50, 2))
        batch = classify_batch(e, X)
        singles = np.array([classify(e, x) for x in X])
        np.testing.assert_array_equal(batch, singles)

    def test_scaling_competences_leaves_fused_argmax(self):
        e = synthetic_ensemble([0.7, 0.6], alpha=0.5)
        x = make_blobs(n=4, seed=31).features[0]
        z = e.pipeline.apply(x)
        base = fuse_supports(e, z, [(0, 0.7), (1, 0.6)])
        scaled = fuse_supports(e, z, [(0, 7.0), (1, 6.0)])
        assert int(np.argmax(base)) == int(np.argmax(scaled))


class TestTrainDes:
    def test_bootstrap_granularity(self):
        blobs = make_blobs(n=60, seed=6)
        tr_idx, va_idx = stratified_split(blobs.labels, 2 / 3, seed=4)
        e = train_des([ClassifierSpec("lda"), ClassifierSpec("qda")],
                      blobs.subset(tr_idx), blobs.subset(va_idx),
                      method="bootstrap", params=MethodParams(k_bootstrap=2), seed=8)
        for fld in e.fields:
            assert set(np.unique(fld.sources.values)) <= {0.0, 0.5, 1.0}

    def test_same_seed_bitwise_identical_serialization(self):
        blobs = make_blobs(n=60, seed=6)
        tr_idx, va_idx = stratified_split(blobs.labels, 2 / 3, seed=4)
        args = dict(method="bootstrap", params=MethodParams(k_bootstrap=3), seed=21)
        a = train_des(DEFAULT_POOL, blobs.subset(tr_idx), blobs.subset(va_idx), **args)
        b = train_des(DEFAULT_POOL, blobs.subset(tr_idx), blobs.subset(va_idx), **args)
        assert serialize_model(a) == serialize_model(b)

    def test_method_changes_fields_not_pool(self):
        blobs = make_blobs(n=60, seed=6)
        tr_idx, va_idx = stratified_split(blobs.labels, 2 / 3, seed=4)
        shared = dict(seed=9, params=MethodParams(k_bootstrap=2, mc_samples=500))
        boot = train_des(DEFAULT_POOL, blobs.subset(tr_idx), blobs.subset(va_idx),
                         method="bootstrap", **shared)
        beta = train_des(DEFAULT_POOL, blobs.subset(tr_idx), blobs.subset(va_idx),
                         method="rrc_beta", **shared)
        queries = np.random.default_rng(2).normal(size=(10, 2))
        for ca, cb in zip(boot.pool, beta.pool):
            np.testing.assert_array_equal(
                ca.predict_supports(beta.pipeline.apply(queries)),
                cb.predict_supports(beta.pipeline.apply(queries)))
        assert any(
            not np.array_equal(fa.sources.values, fb.sources.values)
            for fa, fb in zip(boot.fields, beta.fields))

    def test_default_alpha_is_one_over_m(self):
        blobs = make_blobs(n=90, seed=2, centers=((-3, 0), (0, 3), (3, 0)), scale=0.4)
        tr_idx, va_idx = stratified_split(blobs.labels, 2 / 3, seed=4)
        e = train_des([ClassifierSpec("lda")], blobs.subset(tr_idx),
                      blobs.subset(va_idx), method="bootstrap",
                      params=MethodParams(k_bootstrap=2), seed=1)
        assert e.alpha == pytest.approx(1.0 / 3.0)

    def test_empty_inputs_rejected(self):
        blobs = make_blobs(n=30, seed=2)
        empty = numeric_dataset(np.zeros((0, 2)), [], 2)
        with pytest.raises(ValueError, match="empty validation"):
            train_des(DEFAULT_POOL, blobs, empty, seed=0)
        with pytest.raises(ValueError, match="empty training"):
            train_des(DEFAULT_POOL, empty, blobs, seed=0)
        with pytest.raises(ValueError, match="empty pool"):
            train_des([], blobs, blobs, seed=0)

    def test_ensemble_immutable(self):
        e = synthetic_ensemble([0.5])
        with pytest.raises(AttributeError):
            e.alpha = 0.9
