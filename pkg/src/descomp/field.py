"""Competence fields: Gaussian-potential generalization over feature space.

Each validation point acts as a source whose influence decays as
exp(-distance^2); the field value at x is the influence-weighted mean of the
source competences, i.e. a convex combination that always stays inside the
source value range. There is no bandwidth knob: feature standardization
upstream sets the scale of the exponent.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .competence import CompetenceSet

# beyond this many sources, contributions with shifted exponents below
# -_EXP_CUTOFF (values under ~1e-304) are dropped before exponentiation
_MAX_EXACT_SOURCES = 100000
_EXP_CUTOFF = 700.0


@dataclass(frozen=True)
class CompetenceField:
    sources: CompetenceSet

    @property
    def dimension(self) -> int:
        return int(self.sources.points.shape[1])


def _weighted_means(field: CompetenceField, X: np.ndarray) -> np.ndarray:
    points = field.sources.points
    values = field.sources.values
    # shifted exponent (log-sum-exp trick): raw weights exp(-d^2) underflow
    # for distant queries, turning the ratio into 0/0; subtracting the
    # minimum distance leaves the ratio mathematically unchanged
    d2 = ((X[:, None, :] - points[None, :, :]) ** 2).sum(axis=2)
    shifted = d2 - d2.min(axis=1, keepdims=True)
    if points.shape[0] > _MAX_EXACT_SOURCES:
        weights = np.where(shifted < _EXP_CUTOFF, np.exp(-shifted), 0.0)
    else:
        weights = np.exp(-shifted)
    return (weights @ values) / weights.sum(axis=1)


def competence_at(field: CompetenceField, x) -> float:
    """Field value at a single query point."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.size != field.dimension:
        raise ValueError(
            f"dimensionality mismatch: field has {field.dimension}-D sources, "
            f"query has shape {x.shape}")
    return float(_weighted_means(field, x[None, :])[0])


def competence_many(field: CompetenceField, X) -> np.ndarray:
    """Field values for a batch of query rows; row r equals
    competence_at(field, X[r]) bit-for-bit (one code path, no separately
    vectorized reduction)."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != field.dimension:
        raise ValueError(
            f"dimensionality mismatch: field has {field.dimension}-D sources, "
            f"queries have shape {X.shape}")
    return np.array([_weighted_means(field, row[None, :])[0] for row in X])


def competence_profile(fields, x) -> np.ndarray:
    """competence_at for every field, in pool order."""
    return np.array([competence_at(field, x) for field in fields])
