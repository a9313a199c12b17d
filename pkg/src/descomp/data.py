"""Core dataset and support-vector types shared across the package.

Conventions: class labels are 0-based integers in ``[0, n_classes)``; a
support vector holds one normalized score per class (each in ``[0, 1]``,
summing to 1 within ``SUPPORT_SUM_TOL``). Nominal feature columns store
category indices as floats; the column's ``AttributeMeta`` records the
category names.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

SUPPORT_SUM_TOL = 1e-9

NUMERIC = "numeric"
NOMINAL = "nominal"


@dataclass(frozen=True)
class AttributeMeta:
    """Schema of one feature column: numeric, or nominal with its categories."""

    name: str
    kind: str
    categories: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "categories", tuple(self.categories))
        if self.kind not in (NUMERIC, NOMINAL):
            raise ValueError(f"unknown attribute kind {self.kind!r}")
        if self.kind == NOMINAL and not self.categories:
            raise ValueError(f"nominal attribute {self.name!r} needs categories")
        if self.kind == NUMERIC and self.categories:
            raise ValueError(f"numeric attribute {self.name!r} cannot carry categories")


def _frozen_array(values) -> np.ndarray:
    arr = np.array(values)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Dataset:
    """Feature matrix with 0-based integer labels and per-column metadata.

    Immutable after construction (arrays are copied and marked read-only),
    so instances are safe to share across concurrent readers.
    """

    features: np.ndarray
    labels: np.ndarray
    attribute_meta: tuple[AttributeMeta, ...]
    n_classes: int
    class_names: tuple[str, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "features", _frozen_array(self.features))
        object.__setattr__(self, "labels", _frozen_array(self.labels))
        object.__setattr__(self, "attribute_meta", tuple(self.attribute_meta))
        if self.class_names is not None:
            object.__setattr__(self, "class_names", tuple(self.class_names))

    @property
    def n_rows(self) -> int:
        return int(self.features.shape[0]) if self.features.ndim >= 1 else 0

    @property
    def n_features(self) -> int:
        return int(self.features.shape[1]) if self.features.ndim == 2 else 0

    def subset(self, indices) -> "Dataset":
        """Row subset (with repetition allowed); metadata is shared."""
        idx = np.asarray(indices, dtype=int)
        return Dataset(
            features=self.features[idx],
            labels=self.labels[idx],
            attribute_meta=self.attribute_meta,
            n_classes=self.n_classes,
            class_names=self.class_names,
        )


def numeric_dataset(features, labels, n_classes: int,
                    class_names: tuple[str, ...] | None = None) -> Dataset:
    """Wrap a plain numeric matrix as a Dataset with generated column names."""
    features = np.asarray(features, dtype=float)
    meta = tuple(AttributeMeta(f"f{j}", NUMERIC) for j in range(features.shape[1]))
    return Dataset(features, np.asarray(labels, dtype=int), meta, n_classes, class_names)


def validate_dataset(ds: Dataset) -> str | None:
    """Return a description of the first violated invariant, or None if valid."""
    feats = ds.features
    if feats.ndim >= 1 and feats.shape[0] == 0:
        return "empty dataset"
    if feats.ndim != 2 or feats.dtype == object:
        return "ragged rows"
    if not np.issubdtype(feats.dtype, np.number):
        return "non-numeric feature matrix"
    if feats.shape[1] < 1:
        return "dataset has no feature columns"
    if ds.labels.ndim != 1 or ds.labels.shape[0] != feats.shape[0]:
        return "labels do not match row count"
    if not np.issubdtype(ds.labels.dtype, np.integer):
        return "labels must be integers"
    if ds.n_classes < 2:
        return "n_classes must be at least 2"
    if ds.labels.min() < 0 or ds.labels.max() >= ds.n_classes:
        return "label out of range"
    if len(ds.attribute_meta) != feats.shape[1]:
        return "attribute metadata does not match column count"
    for j, meta in enumerate(ds.attribute_meta):
        if meta.kind == NOMINAL:
            col = feats[:, j]
            if not np.all(col == np.floor(col)):
                return f"nominal column {meta.name!r} holds non-integral values"
            if col.min() < 0 or col.max() >= len(meta.categories):
                return f"nominal column {meta.name!r} has values outside its categories"
    if ds.class_names is not None and len(ds.class_names) != ds.n_classes:
        return "class names do not match n_classes"
    return None


def is_valid_supports(supports, tol: float = SUPPORT_SUM_TOL) -> bool:
    s = np.asarray(supports, dtype=float)
    if s.ndim != 1 or s.size == 0:
        return False
    if np.any(s < 0.0) or np.any(s > 1.0):
        return False
    return abs(float(s.sum()) - 1.0) <= tol


def check_supports(supports, tol: float = SUPPORT_SUM_TOL) -> np.ndarray:
    """Validate a support vector, returning it as a float array."""
    s = np.asarray(supports, dtype=float)
    if not is_valid_supports(s, tol):
        raise ValueError(f"invalid support vector: {s!r}")
    return s


def argmax_support(supports) -> int:
    """Index of the maximal support; ties broken by the lowest class index."""
    s = np.asarray(supports, dtype=float)
    if s.ndim != 1 or s.size == 0:
        raise ValueError("supports must be a nonempty 1-D vector")
    return int(np.argmax(s))
