"""Stratified, repeated cross-validation of competence methods.

Within each fold the non-test portion is split again (stratified, default
2:1) into a classifier-training part and a competence-validation part; the
preprocessing pipeline is fit on the classifier-training part unless the
global scope flag is set, in which case it is fit once on the whole dataset
(leaky on purpose, exposed for comparison only).

Fold evaluations are independent: :func:`evaluate_fold` is a pure function
of (dataset, specs, methods, cv, seed, repeat, fold), so callers may run
folds concurrently and reduce with :func:`reduce_fold_results`, which is
order-insensitive by sorting the results itself.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .competence import MethodParams
from .data import Dataset
from .ensemble import classify_batch, train_des
from .metrics import CRITERIA, confusion, macro_micro_criteria
from .preprocess import fit_pipeline
from .seeding import derive_seed


@dataclass(frozen=True)
class MethodSpec:
    """One competence method under comparison."""

    name: str  # bootstrap | rrc_beta | rrc_gaussian
    params: MethodParams = MethodParams()
    alpha: float | None = None  # None = 1/M

    @property
    def display_name(self) -> str:
        return self.name


@dataclass(frozen=True)
class CvConfig:
    folds: int = 2
    repeats: int = 5
    train_fraction: float = 2.0 / 3.0  # classifier-train share of the fold-train part
    variance_threshold: float = 0.95
    preprocess_scope: str = "fold"  # fold | global


@dataclass
class DatasetResult:
    methods: tuple[str, ...]
    losses: dict[str, dict[str, float]]  # method -> criterion -> mean loss
    raw: dict[str, dict[str, float]]
    folds_used: int
    repeats: int
    warnings: list[str] = field(default_factory=list)


@dataclass(frozen=True)
class FoldResult:
    repeat: int
    fold_index: int
    losses: dict  # method -> criterion -> loss
    raw: dict
    warnings: tuple[str, ...]


def stratified_folds(labels, folds: int, seed: int) -> list[np.ndarray]:
    """Disjoint test-index arrays covering all rows, class ratios within one
    object of the global ratio."""
    labels = np.asarray(labels, dtype=int)
    rng = np.random.default_rng(seed)
    assignments = [[] for _ in range(folds)]
    for c in np.unique(labels):
        idx = np.flatnonzero(labels == c)
        rng.shuffle(idx)
        for pos, row in enumerate(idx):
            assignments[pos % folds].append(row)
    return [np.sort(np.array(a, dtype=int)) for a in assignments]


def stratified_split(labels, train_fraction: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Two stratified index arrays; the second is guaranteed nonempty."""
    labels = np.asarray(labels, dtype=int)
    rng = np.random.default_rng(seed)
    first, second = [], []
    for c in np.unique(labels):
        idx = np.flatnonzero(labels == c)
        rng.shuffle(idx)
        n_first = min(max(int(round(train_fraction * idx.size)), 1), idx.size)
        first.extend(idx[:n_first])
        second.extend(idx[n_first:])
    if not second:  # tiny classes may all land in the first part
        first = sorted(first)
        second = [first.pop()]
    return np.sort(np.array(first, dtype=int)), np.sort(np.array(second, dtype=int))


def effective_folds(labels, folds: int) -> tuple[int, str | None]:
    """Largest feasible fold count (every class needs a member per fold)."""
    counts = np.bincount(np.asarray(labels, dtype=int))
    min_count = int(counts[counts > 0].min())
    if min_count < 2:
        raise ValueError("dataset too small for 2 folds")
    if min_count < folds:
        return min_count, (f"reduced folds from {folds} to {min_count}: "
                           f"smallest class has {min_count} members")
    return folds, None


def evaluate_fold(dataset: Dataset, pool_specs, methods, cv: CvConfig, seed: int,
                  folds_used: int, repeat: int, fold_index: int) -> FoldResult:
    """Criterion losses of every method on one (repeat, fold) test split.

    Fold membership, the train/validation split and all training seeds
    derive only from (seed, repeat, fold), so every method sees identical
    data and pools; only the competence model differs between columns.
    """
    methods = list(methods)
    test_folds = stratified_folds(dataset.labels, folds_used,
                                  derive_seed(seed, "folds", repeat))
    test_idx = test_folds[fold_index]
    mask = np.ones(dataset.n_rows, dtype=bool)
    mask[test_idx] = False
    pool_idx = np.flatnonzero(mask)
    rel_train, rel_val = stratified_split(
        dataset.labels[pool_idx], cv.train_fraction,
        derive_seed(seed, "split", repeat, fold_index))
    train_part = dataset.subset(pool_idx[rel_train])
    val_part = dataset.subset(pool_idx[rel_val])
    test_part = dataset.subset(test_idx)
    pipeline = None
    if cv.preprocess_scope == "global":
        pipeline = fit_pipeline(dataset, cv.variance_threshold)
    ens_seed = derive_seed(seed, "ensemble", repeat, fold_index)

    losses = {}
    raw = {}
    warnings: list[str] = []
    for method in methods:
        ensemble = train_des(
            pool_specs, train_part, val_part,
            method=method.name, params=method.params, seed=ens_seed,
            alpha=method.alpha, variance_threshold=cv.variance_threshold,
            pipeline=pipeline)
        predicted = classify_batch(ensemble, test_part.features)
        report = macro_micro_criteria(
            confusion(test_part.labels, predicted, dataset.n_classes))
        if report.excluded_classes:
            note = (f"repeat {repeat} fold {fold_index}: classes "
                    f"{list(report.excluded_classes)} absent from the test fold, "
                    f"excluded from macro averages")
            if note not in warnings:
                warnings.append(note)
        losses[method.display_name] = dict(report.losses)
        raw[method.display_name] = dict(report.raw)
    return FoldResult(repeat, fold_index, losses, raw, tuple(warnings))


def reduce_fold_results(methods, fold_results, folds_used: int,
                        repeats: int, warnings=()) -> DatasetResult:
    """Mean losses over folds; results are sorted, so the reduction does not
    depend on completion order."""
    methods = [m.display_name if isinstance(m, MethodSpec) else m for m in methods]
    ordered = sorted(fold_results, key=lambda r: (r.repeat, r.fold_index))
    if not ordered:
        raise ValueError("no fold results to reduce")
    all_warnings = list(warnings)
    sums = {m: {c: 0.0 for c in CRITERIA} for m in methods}
    raw_sums = {m: {c: 0.0 for c in CRITERIA} for m in methods}
    for result in ordered:
        for m in methods:
            for c in CRITERIA:
                sums[m][c] += result.losses[m][c]
                raw_sums[m][c] += result.raw[m][c]
        for note in result.warnings:
            if note not in all_warnings:
                all_warnings.append(note)
    n = len(ordered)
    return DatasetResult(
        methods=tuple(methods),
        losses={m: {c: sums[m][c] / n for c in CRITERIA} for m in methods},
        raw={m: {c: raw_sums[m][c] / n for c in CRITERIA} for m in methods},
        folds_used=folds_used,
        repeats=repeats,
        warnings=all_warnings)


def cross_validate(dataset: Dataset, pool_specs, methods, cv: CvConfig,
                   seed: int) -> DatasetResult:
    """Mean criterion losses per method over repeats x folds."""
    methods = list(methods)
    if not methods:
        raise ValueError("no methods to evaluate")
    if cv.folds < 2:
        raise ValueError("folds must be >= 2")
    folds_used, warning = effective_folds(dataset.labels, cv.folds)
    results = [
        evaluate_fold(dataset, pool_specs, methods, cv, seed, folds_used,
                      repeat, fold_index)
        for repeat in range(cv.repeats)
        for fold_index in range(folds_used)]
    return reduce_fold_results(methods, results, folds_used, cv.repeats,
                               warnings=[warning] if warning else [])
