"""Dynamic ensemble selection: per-query member selection by local
competence, competence-weighted support fusion, maximum-rule decision.

All expensive work (preprocessing fit, pool training, competence estimation,
field construction) happens in :func:`train_des`; classification only
evaluates fields and fuses supports, performing no training.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .classifiers import TrainedClassifier, train_pool
from .competence import MethodParams, build_competence_set
from .data import Dataset, numeric_dataset
from .field import CompetenceField, competence_many
from .preprocess import Pipeline, fit_pipeline
from .seeding import derive_seed


@dataclass(frozen=True)
class TrainedEnsemble:
    pool: tuple[TrainedClassifier, ...]
    fields: tuple[CompetenceField, ...]
    alpha: float
    n_classes: int
    pipeline: Pipeline
    method: str
    params: MethodParams
    seed: int
    class_names: tuple[str, ...] | None = None
    attribute_meta: tuple = ()

    def __post_init__(self):
        if len(self.pool) != len(self.fields) or len(self.pool) < 1:
            raise ValueError("pool and fields must align on L >= 1 members")
        if not 0.0 <= self.alpha < 1.0:
            raise ValueError("alpha must lie in [0, 1)")

    @property
    def pool_size(self) -> int:
        return len(self.pool)


@dataclass(frozen=True)
class ClassificationTrace:
    """Diagnostics for one classified query."""

    label: int
    selected: tuple[int, ...]
    competences: tuple[float, ...]  # of the selected members, in pool order
    fused_raw: tuple[float, ...]    # competence-weighted support sum
    fused: tuple[float, ...]        # renormalized supports
    fallback_used: bool
    degenerate_weights: bool


def _competence_profile_batch(e: TrainedEnsemble, Z: np.ndarray) -> np.ndarray:
    return np.column_stack([competence_many(f, Z) for f in e.fields])


def select_ensemble(e: TrainedEnsemble, z) -> list[tuple[int, float]]:
    """Members with field competence strictly above alpha, in pool order.

    When nobody clears the threshold, the single most competent member is
    used instead (ties to the lowest index) — abstention is not an option.
    """
    z = np.asarray(z, dtype=float)
    competences = _competence_profile_batch(e, z[None, :])[0]
    selected = [(i, float(c)) for i, c in enumerate(competences) if c > e.alpha]
    if not selected:
        best = int(np.argmax(competences))
        selected = [(best, float(competences[best]))]
    return selected


def fuse_supports(e: TrainedEnsemble, z, selected) -> np.ndarray:
    """Competence-weighted sum of member supports, renormalized to sum 1."""
    fused, _, _ = _fuse(e, np.asarray(z, dtype=float), selected)
    return fused


def _fuse(e: TrainedEnsemble, z: np.ndarray, selected):
    if not selected:
        raise ValueError("selected member list is empty")
    raw = np.zeros(e.n_classes)
    for index, weight in selected:
        raw += weight * e.pool[index].predict_supports(z)
    total = raw.sum()
    if total <= 0.0:
        # every selected member carried zero competence; nothing to weight by
        return np.full(e.n_classes, 1.0 / e.n_classes), raw, True
    return raw / total, raw, False


def _preprocess_rows(e: TrainedEnsemble, X: np.ndarray) -> np.ndarray:
    return np.atleast_2d(e.pipeline.apply(X))


def classify(e: TrainedEnsemble, x) -> int:
    """Label for one raw feature row (preprocessing applied internally)."""
    return classify_explain(e, x).label


def classify_explain(e: TrainedEnsemble, x) -> ClassificationTrace:
    z = _preprocess_rows(e, np.asarray(x, dtype=float))[0]
    all_competences = _competence_profile_batch(e, z[None, :])[0]
    selected = [(i, float(c)) for i, c in enumerate(all_competences) if c > e.alpha]
    fallback = not selected
    if fallback:
        best = int(np.argmax(all_competences))
        selected = [(best, float(all_competences[best]))]
    fused, raw, degenerate = _fuse(e, z, selected)
    return ClassificationTrace(
        label=int(np.argmax(fused)),
        selected=tuple(i for i, _ in selected),
        competences=tuple(c for _, c in selected),
        fused_raw=tuple(float(v) for v in raw),
        fused=tuple(float(v) for v in fused),
        fallback_used=fallback,
        degenerate_weights=degenerate,
    )


def classify_batch(e: TrainedEnsemble, X) -> np.ndarray:
    """Labels for a matrix of raw feature rows.

    Deliberately row-by-row: batches must agree with single-row calls
    bit-for-bit, which a separately vectorized path cannot guarantee.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        return np.array([classify(e, X)])
    return np.array([classify(e, row) for row in X], dtype=int)


def train_des(specs, train_data: Dataset, validation: Dataset, method: str = "bootstrap",
              params: MethodParams = MethodParams(), seed: int = 0,
              alpha: float | None = None, variance_threshold: float = 0.95,
              pipeline: Pipeline | None = None) -> TrainedEnsemble:
    """Fit a DES ensemble.

    The preprocessing pipeline is fit on the training set (unless one is
    supplied) and applied to both sets, so competence-validation points live
    in the same space the pool is trained in. Pool training and the bootstrap
    resamples derive their seeds independently of ``method``: switching the
    competence method changes the fields, never the pool.

    ``alpha`` defaults to 1/M (the competence of random guessing).
    """
    specs = list(specs)
    if not specs:
        raise ValueError("empty pool")
    if train_data.n_rows == 0:
        raise ValueError("empty training set")
    if validation.n_rows == 0:
        raise ValueError("empty validation set")
    if pipeline is None:
        pipeline = fit_pipeline(train_data, variance_threshold)
    n_classes = train_data.n_classes
    train_pp = numeric_dataset(pipeline.apply(train_data.features), train_data.labels,
                               n_classes)
    val_pp = numeric_dataset(pipeline.apply(validation.features), validation.labels,
                             n_classes)
    pool = train_pool(specs, train_pp, derive_seed(seed, "pool-train"))
    fields = []
    for spec, member in zip(specs, pool):
        # bootstrap retrains replicas from the spec; the RRC variants score
        # the pool member itself (already trained on the full training set)
        evaluated = spec if method == "bootstrap" else member
        competence_set = build_competence_set(
            method, evaluated, train_pp, val_pp, params,
            seed=derive_seed(seed, "competence"), classifier_id=spec.name)
        fields.append(CompetenceField(competence_set))
    return TrainedEnsemble(
        pool=tuple(pool),
        fields=tuple(fields),
        alpha=(1.0 / n_classes) if alpha is None else float(alpha),
        n_classes=n_classes,
        pipeline=pipeline,
        method=method,
        params=params,
        seed=seed,
        class_names=train_data.class_names,
        attribute_meta=train_data.attribute_meta,
    )
