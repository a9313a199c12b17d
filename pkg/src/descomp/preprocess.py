"""Preprocessing pipeline: one-hot encoding, standardization, PCA projection.

Fit on training data only, then applied unchanged to validation/test data.
Stages run in a fixed order: nominal columns expand to one-of-c binary
columns, every resulting column is standardized to zero mean and unit
variance (population convention, constant columns dropped), and the result
is projected onto the leading principal components covering the configured
variance fraction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import NOMINAL, Dataset


@dataclass(frozen=True)
class OneHotMap:
    """Per-column expansion plan: numeric columns pass through, nominal
    columns with c categories become c indicator columns (in place)."""

    widths: tuple[int, ...]  # 0 = numeric pass-through, c = nominal indicator block
    output_dim: int

    def transform(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        single = X.ndim == 1
        A = np.atleast_2d(X)
        if A.shape[1] != len(self.widths):
            raise ValueError(
                f"dimensionality mismatch: expected {len(self.widths)} columns, "
                f"got {A.shape[1]}")
        out = np.zeros((A.shape[0], self.output_dim))
        offset = 0
        for j, width in enumerate(self.widths):
            if width == 0:
                out[:, offset] = A[:, j]
                offset += 1
            else:
                idx = A[:, j]
                if np.any(idx != np.floor(idx)) or idx.min() < 0 or idx.max() >= width:
                    raise ValueError(f"column {j} holds values outside its {width} categories")
                out[np.arange(A.shape[0]), offset + idx.astype(int)] = 1.0
                offset += width
        return out[0] if single else out


def fit_one_hot(ds: Dataset) -> OneHotMap:
    widths = tuple(
        len(meta.categories) if meta.kind == NOMINAL else 0
        for meta in ds.attribute_meta)
    output_dim = sum(w if w else 1 for w in widths)
    return OneHotMap(widths, output_dim)


@dataclass(frozen=True)
class Standardizer:
    """Per-column centering/scaling with population (1/n) standard deviation.

    Constant columns are dropped and recorded in ``dropped``.
    """

    means: np.ndarray
    stds: np.ndarray
    kept: np.ndarray
    dropped: tuple[int, ...]

    def transform(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        single = X.ndim == 1
        A = np.atleast_2d(X)
        expected = len(self.kept) + len(self.dropped)
        if A.shape[1] != expected:
            raise ValueError(
                f"dimensionality mismatch: expected {expected} columns, got {A.shape[1]}")
        out = (A[:, self.kept] - self.means) / self.stds
        return out[0] if single else out


def fit_standardizer(features) -> Standardizer:
    X = np.asarray(features, dtype=float)
    if X.ndim != 2:
        raise ValueError("features must be a 2-D matrix")
    if X.shape[0] < 2:
        raise ValueError("standardization needs at least 2 rows")
    constant = np.all(X == X[0, :], axis=0)
    stds = X.std(axis=0)  # population (1/n) convention
    keep = ~constant & (stds > 0.0)
    kept = np.flatnonzero(keep)
    dropped = tuple(int(j) for j in np.flatnonzero(~keep))
    return Standardizer(
        means=X[:, kept].mean(axis=0),
        stds=stds[kept],
        kept=kept,
        dropped=dropped,
    )


@dataclass(frozen=True)
class PcaProjection:
    """Projection onto the top-k principal components (rows orthonormal)."""

    components: np.ndarray  # (k, d)
    means: np.ndarray
    eigenvalues: np.ndarray  # descending, one per computed component
    total_variance: float
    retained_variance_fraction: float
    variance_threshold: float

    @property
    def n_components(self) -> int:
        return int(self.components.shape[0])

    def transform(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        single = X.ndim == 1
        A = np.atleast_2d(X)
        if A.shape[1] != self.components.shape[1]:
            raise ValueError(
                f"dimensionality mismatch: expected {self.components.shape[1]} columns, "
                f"got {A.shape[1]}")
        out = (A - self.means) @ self.components.T
        return out[0] if single else out


def _fix_signs(components: np.ndarray) -> np.ndarray:
    # deterministic orientation: the entry of largest magnitude is positive
    out = components.copy()
    for row in out:
        i = int(np.argmax(np.abs(row)))
        if row[i] < 0:
            row *= -1.0
    return out


def fit_pca(features, variance_threshold: float) -> PcaProjection:
    """Smallest-k projection whose cumulative explained variance reaches the
    threshold. Eigendecomposes the d×d covariance, or the n×n Gram matrix
    when d > n (same nonzero spectrum, cheaper)."""
    X = np.asarray(features, dtype=float)
    if X.ndim != 2 or X.shape[0] < 2:
        raise ValueError("PCA needs a 2-D matrix with at least 2 rows")
    if not 0.0 < variance_threshold <= 1.0:
        raise ValueError("variance_threshold must be in (0, 1]")
    n, d = X.shape
    means = X.mean(axis=0)
    Xc = X - means
    total = float((Xc ** 2).sum() / n)  # trace of the covariance matrix
    if total == 0.0:
        return PcaProjection(np.zeros((0, d)), means, np.zeros(0), 0.0, 1.0,
                             variance_threshold)
    if d <= n:
        cov = Xc.T @ Xc / n
        eigvals, eigvecs = np.linalg.eigh(cov)
        order = np.argsort(-eigvals, kind="stable")
        eigvals = np.clip(eigvals[order], 0.0, None)
        components = eigvecs[:, order].T
    else:
        gram = Xc @ Xc.T / n
        eigvals, eigvecs = np.linalg.eigh(gram)
        order = np.argsort(-eigvals, kind="stable")
        eigvals = np.clip(eigvals[order], 0.0, None)
        nonzero = eigvals > eigvals[0] * 1e-12
        eigvals = eigvals[nonzero]
        U = eigvecs[:, order][:, nonzero]
        components = (Xc.T @ U / np.sqrt(n * eigvals)).T
    components = _fix_signs(components)
    cumulative = np.cumsum(eigvals) / total
    reached = np.flatnonzero(cumulative >= variance_threshold - 1e-12)
    k = int(reached[0]) + 1 if reached.size else len(eigvals)
    retained = min(float(cumulative[k - 1]), 1.0)
    return PcaProjection(components[:k], means, eigvals, total, retained,
                         variance_threshold)


@dataclass(frozen=True)
class Pipeline:
    """Fitted one-hot → standardize → project chain."""

    one_hot: OneHotMap
    standardizer: Standardizer
    pca: PcaProjection

    @property
    def output_dim(self) -> int:
        return self.pca.n_components

    def apply(self, features: np.ndarray) -> np.ndarray:
        """Transform raw feature rows (matrix or single row)."""
        return self.pca.transform(
            self.standardizer.transform(self.one_hot.transform(features)))


def fit_pipeline(ds: Dataset, variance_threshold: float = 0.95) -> Pipeline:
    """Fit the full pipeline on a training dataset.

    Parameters depend only on ``ds``; applying the pipeline elsewhere leaks
    nothing from the other data.
    """
    one_hot = fit_one_hot(ds)
    expanded = one_hot.transform(ds.features)
    standardizer = fit_standardizer(expanded)
    pca = fit_pca(standardizer.transform(expanded), variance_threshold)
    return Pipeline(one_hot, standardizer, pca)
