"""Base classifiers producing normalized per-class support vectors.

Every classifier follows the same contract: train on a feature matrix with
0-based integer labels, then map feature vectors to support vectors (one
value per class, each in [0, 1], summing to 1). The predicted label is the
argmax of the supports, ties broken by the lowest class index.

Classes absent from the training data (bootstrap samples routinely miss
classes) get zero prior and therefore zero support in the posterior-based
kinds; the nearest-centroid kind gives them zero support directly. k-NN
applies its Laplace-smoothed vote fractions to all classes, so absent
classes keep the smoothing floor 1/(k+M) there.

Training is deterministic given (spec, data, seed); none of the built-in
kinds consume randomness, but the seed is part of the interface so
randomized kinds can be registered later via :func:`register_classifier_kind`.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular
from scipy.special import logsumexp

from .data import Dataset

_COV_REG_SCALE = 1e-6
_KDE_BANDWIDTH_FLOOR = 1e-9


@dataclass(frozen=True)
class ClassifierSpec:
    """Declarative description of one base classifier.

    kinds: naive_bayes_kde, naive_bayes_gaussian, nearest_centroid,
    knn (hyperparameter k), lda, qda.
    """

    kind: str
    k: int = 5
    bandwidth: float | None = None

    def __post_init__(self):
        if self.kind not in _REGISTRY:
            raise ValueError(f"unknown classifier kind {self.kind!r}")
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.bandwidth is not None and self.bandwidth <= 0:
            raise ValueError("kernel bandwidth must be > 0")

    @property
    def name(self) -> str:
        if self.kind == "knn":
            return f"knn(k={self.k})"
        if self.kind == "naive_bayes_kde" and self.bandwidth is not None:
            return f"naive_bayes_kde(bandwidth={self.bandwidth!r})"
        return self.kind

    @classmethod
    def parse(cls, text: str) -> "ClassifierSpec":
        """Parse spec strings like "lda", "knn(k=7)", "naive_bayes_kde(bandwidth=0.5)"."""
        m = re.fullmatch(r"\s*(\w+)\s*(?:\((.*)\))?\s*", text)
        if not m:
            raise ValueError(f"cannot parse classifier spec {text!r}")
        kind, args = m.group(1), m.group(2)
        kwargs = {}
        if args:
            for item in args.split(","):
                if "=" not in item:
                    raise ValueError(f"bad argument {item!r} in classifier spec {text!r}")
                key, value = (part.strip() for part in item.split("=", 1))
                if key == "k":
                    kwargs["k"] = int(value)
                elif key == "bandwidth":
                    kwargs["bandwidth"] = float(value)
                else:
                    raise ValueError(f"unknown hyperparameter {key!r} in {text!r}")
        return cls(kind=kind, **kwargs)


class TrainedClassifier:
    """Common prediction machinery; subclasses implement fitting/scoring."""

    kind = "abstract"

    def __init__(self, spec: ClassifierSpec, n_classes: int, n_features: int):
        self.spec = spec
        self.n_classes = n_classes
        self.n_features = n_features

    def _fit(self, X: np.ndarray, y: np.ndarray, seed: int) -> None:
        raise NotImplementedError

    def _raw_supports(self, X: np.ndarray) -> np.ndarray:
        """Nonnegative scores per class, any positive scale (rows (n, M))."""
        raise NotImplementedError

    def predict_supports(self, X) -> np.ndarray:
        """Normalized support vector(s) for a single row or a matrix."""
        X = np.asarray(X, dtype=float)
        single = X.ndim == 1
        A = np.atleast_2d(X)
        if A.shape[1] != self.n_features:
            raise ValueError(
                f"dimensionality mismatch: classifier expects {self.n_features} "
                f"features, got {A.shape[1]}")
        raw = self._raw_supports(A)
        sums = raw.sum(axis=1, keepdims=True)
        supports = raw / sums
        return supports[0] if single else supports

    def predict(self, X) -> np.ndarray | int:
        supports = self.predict_supports(X)
        if supports.ndim == 1:
            return int(np.argmax(supports))
        return np.argmax(supports, axis=1)

    # serialization of learned state (plain dict of arrays/scalars)

    def to_state(self) -> dict:
        raise NotImplementedError

    @classmethod
    def from_state(cls, spec: ClassifierSpec, state: dict) -> "TrainedClassifier":
        raise NotImplementedError


def _class_masks(y: np.ndarray, n_classes: int):
    counts = np.bincount(y, minlength=n_classes)
    present = np.flatnonzero(counts > 0)
    return counts, present


def _log_posterior_supports(log_joint: np.ndarray, present: np.ndarray,
                            n_classes: int, fallback: np.ndarray) -> np.ndarray:
    """Softmax of per-class log scores over present classes only.

    ``log_joint`` is (n, len(present)). Rows where every score underflowed to
    -inf fall back to the prior vector.
    """
    n = log_joint.shape[0]
    out = np.zeros((n, n_classes))
    finite_max = np.max(log_joint, axis=1)
    dead = ~np.isfinite(finite_max)
    live = ~dead
    if np.any(live):
        shifted = log_joint[live] - finite_max[live, None]
        e = np.exp(shifted)
        out[np.ix_(np.flatnonzero(live), present)] = e / e.sum(axis=1, keepdims=True)
    if np.any(dead):
        out[dead] = fallback
    return out


class NearestCentroidClassifier(TrainedClassifier):
    """Per-class centroids; support_i proportional to 1/(1 + distance)."""

    kind = "nearest_centroid"

    def _fit(self, X, y, seed):
        counts, present = _class_masks(y, self.n_classes)
        centroids = np.zeros((self.n_classes, X.shape[1]))
        for c in present:
            centroids[c] = X[y == c].mean(axis=0)
        self.centroids = centroids
        self.present = counts > 0

    def _raw_supports(self, X):
        diffs = X[:, None, :] - self.centroids[None, :, :]
        dist = np.sqrt((diffs ** 2).sum(axis=2))
        raw = 1.0 / (1.0 + dist)
        raw[:, ~self.present] = 0.0
        return raw

    def to_state(self):
        return {"centroids": self.centroids, "present": self.present,
                "n_classes": self.n_classes, "n_features": self.n_features}

    @classmethod
    def from_state(cls, spec, state):
        obj = cls(spec, int(state["n_classes"]), int(state["n_features"]))
        obj.centroids = np.asarray(state["centroids"], dtype=float)
        obj.present = np.asarray(state["present"], dtype=bool)
        return obj


class KnnClassifier(TrainedClassifier):
    """k nearest neighbours with Laplace-smoothed vote fractions
    (count_i + 1) / (k + M). Distance ties resolve to the lowest training
    index, keeping predictions platform-independent."""

    kind = "knn"

    def _fit(self, X, y, seed):
        self.train_X = X.copy()
        self.train_y = y.copy()
        self.k_eff = min(self.spec.k, X.shape[0])

    def _raw_supports(self, X):
        d2 = ((X[:, None, :] - self.train_X[None, :, :]) ** 2).sum(axis=2)
        order = np.argsort(d2, axis=1, kind="stable")[:, :self.k_eff]
        neighbor_labels = self.train_y[order]
        counts = np.zeros((X.shape[0], self.n_classes))
        for c in range(self.n_classes):
            counts[:, c] = (neighbor_labels == c).sum(axis=1)
        return (counts + 1.0) / (self.k_eff + self.n_classes)

    def to_state(self):
        return {"train_X": self.train_X, "train_y": self.train_y,
                "k_eff": self.k_eff, "n_classes": self.n_classes,
                "n_features": self.n_features}

    @classmethod
    def from_state(cls, spec, state):
        obj = cls(spec, int(state["n_classes"]), int(state["n_features"]))
        obj.train_X = np.asarray(state["train_X"], dtype=float)
        obj.train_y = np.asarray(state["train_y"], dtype=int)
        obj.k_eff = int(state["k_eff"])
        return obj


class GaussianNBClassifier(TrainedClassifier):
    """Naive Bayes with per-feature Gaussian likelihoods."""

    kind = "naive_bayes_gaussian"

    def _fit(self, X, y, seed):
        counts, present = _class_masks(y, self.n_classes)
        n, d = X.shape
        self.present = present
        self.priors = counts / n
        means = np.zeros((len(present), d))
        variances = np.zeros((len(present), d))
        for i, c in enumerate(present):
            rows = X[y == c]
            means[i] = rows.mean(axis=0)
            variances[i] = rows.var(axis=0)
        max_var = variances.max() if variances.size else 0.0
        eps = 1e-9 * max_var if max_var > 0 else 1e-12
        self.means = means
        self.variances = variances + eps

    def _log_joint(self, X):
        lj = np.empty((X.shape[0], len(self.present)))
        for i, c in enumerate(self.present):
            z2 = (X - self.means[i]) ** 2 / self.variances[i]
            lj[:, i] = (np.log(self.priors[c])
                        - 0.5 * (np.log(2 * np.pi * self.variances[i]).sum() + z2.sum(axis=1)))
        return lj

    def _raw_supports(self, X):
        fallback = self.priors / self.priors.sum()
        return _log_posterior_supports(self._log_joint(X), self.present,
                                       self.n_classes, fallback)

    def to_state(self):
        return {"present": self.present, "priors": self.priors,
                "means": self.means, "variances": self.variances,
                "n_classes": self.n_classes, "n_features": self.n_features}

    @classmethod
    def from_state(cls, spec, state):
        obj = cls(spec, int(state["n_classes"]), int(state["n_features"]))
        obj.present = np.asarray(state["present"], dtype=int)
        obj.priors = np.asarray(state["priors"], dtype=float)
        obj.means = np.asarray(state["means"], dtype=float)
        obj.variances = np.asarray(state["variances"], dtype=float)
        return obj


def _silverman_bandwidths(values: np.ndarray) -> np.ndarray:
    """Per-feature Silverman bandwidths sigma * (3n/4)^(-1/5), floored so a
    constant feature never yields a zero-width kernel."""
    n = values.shape[0]
    sigma = values.std(axis=0)
    h = sigma * (3.0 * n / 4.0) ** (-0.2)
    return np.maximum(h, _KDE_BANDWIDTH_FLOOR)


class KdeNBClassifier(TrainedClassifier):
    """Naive Bayes with per-feature Gaussian kernel density estimates.

    Bandwidths follow Silverman's rule per class and feature unless the spec
    pins an explicit value. Queries far from all training data can underflow
    every class to zero density; such rows fall back to the class priors.
    """

    kind = "naive_bayes_kde"

    def _fit(self, X, y, seed):
        counts, present = _class_masks(y, self.n_classes)
        self.present = present
        self.priors = counts / X.shape[0]
        self.class_values = []
        self.bandwidths = []
        for c in present:
            rows = X[y == c]
            self.class_values.append(rows)
            if self.spec.bandwidth is not None:
                h = np.full(X.shape[1], float(self.spec.bandwidth))
            else:
                h = _silverman_bandwidths(rows)
            self.bandwidths.append(h)

    def _log_joint(self, X):
        lj = np.empty((X.shape[0], len(self.present)))
        for i, c in enumerate(self.present):
            values = self.class_values[i]
            h = self.bandwidths[i]
            n_c = values.shape[0]
            total = np.full(X.shape[0], np.log(self.priors[c]))
            for f in range(self.n_features):
                z = (X[:, f, None] - values[None, :, f]) / h[f]
                with np.errstate(over="ignore"):  # huge z**2 -> -inf density
                    log_dens = logsumexp(-0.5 * z ** 2, axis=1)
                total += log_dens - np.log(n_c * h[f] * np.sqrt(2 * np.pi))
            lj[:, i] = total
        return lj

    def _raw_supports(self, X):
        fallback = self.priors / self.priors.sum()
        return _log_posterior_supports(self._log_joint(X), self.present,
                                       self.n_classes, fallback)

    def to_state(self):
        state = {"present": self.present, "priors": self.priors,
                 "n_classes": self.n_classes, "n_features": self.n_features,
                 "n_groups": len(self.class_values)}
        for i, (values, h) in enumerate(zip(self.class_values, self.bandwidths)):
            state[f"values_{i}"] = values
            state[f"bandwidths_{i}"] = h
        return state

    @classmethod
    def from_state(cls, spec, state):
        obj = cls(spec, int(state["n_classes"]), int(state["n_features"]))
        obj.present = np.asarray(state["present"], dtype=int)
        obj.priors = np.asarray(state["priors"], dtype=float)
        obj.class_values = []
        obj.bandwidths = []
        for i in range(int(state["n_groups"])):
            obj.class_values.append(np.asarray(state[f"values_{i}"], dtype=float))
            obj.bandwidths.append(np.asarray(state[f"bandwidths_{i}"], dtype=float))
        return obj


def _regularize_covariance(cov: np.ndarray) -> np.ndarray:
    """Sigma + eps*I with eps = 1e-6 * trace/d; identity when the trace is 0.

    Bootstrap samples routinely produce singular covariances, so this must
    never fail.
    """
    d = cov.shape[0]
    trace = float(np.trace(cov))
    if trace <= 0.0:
        return cov + np.eye(d)
    return cov + (_COV_REG_SCALE * trace / d) * np.eye(d)


def _safe_cholesky(cov: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        return np.linalg.cholesky(cov + np.eye(cov.shape[0]))


def _gaussian_log_density(X, mean, chol, log_det):
    sol = solve_triangular(chol, (X - mean).T, lower=True)
    maha = (sol ** 2).sum(axis=0)
    d = X.shape[1]
    return -0.5 * (d * np.log(2 * np.pi) + log_det + maha)


class LdaClassifier(TrainedClassifier):
    """Gaussian discriminant with a pooled, regularized covariance."""

    kind = "lda"

    def _fit(self, X, y, seed):
        counts, present = _class_masks(y, self.n_classes)
        n, d = X.shape
        self.present = present
        self.priors = counts / n
        means = np.zeros((len(present), d))
        pooled = np.zeros((d, d))
        for i, c in enumerate(present):
            rows = X[y == c]
            means[i] = rows.mean(axis=0)
            centered = rows - means[i]
            pooled += centered.T @ centered
        pooled /= n
        cov = _regularize_covariance(pooled)
        self.means = means
        self.chol = _safe_cholesky(cov)
        self.log_det = 2.0 * np.log(np.diag(self.chol)).sum()

    def _log_joint(self, X):
        lj = np.empty((X.shape[0], len(self.present)))
        for i, c in enumerate(self.present):
            lj[:, i] = (np.log(self.priors[c])
                        + _gaussian_log_density(X, self.means[i], self.chol, self.log_det))
        return lj

    def _raw_supports(self, X):
        fallback = self.priors / self.priors.sum()
        return _log_posterior_supports(self._log_joint(X), self.present,
                                       self.n_classes, fallback)

    def to_state(self):
        return {"present": self.present, "priors": self.priors, "means": self.means,
                "chol": self.chol, "log_det": self.log_det,
                "n_classes": self.n_classes, "n_features": self.n_features}

    @classmethod
    def from_state(cls, spec, state):
        obj = cls(spec, int(state["n_classes"]), int(state["n_features"]))
        obj.present = np.asarray(state["present"], dtype=int)
        obj.priors = np.asarray(state["priors"], dtype=float)
        obj.means = np.asarray(state["means"], dtype=float)
        obj.chol = np.asarray(state["chol"], dtype=float)
        obj.log_det = float(state["log_det"])
        return obj


class QdaClassifier(TrainedClassifier):
    """Gaussian discriminant with per-class regularized covariances.

    A class with a single sample gets the identity covariance (its scatter
    matrix is zero), so training never fails on degenerate bootstrap draws.
    """

    kind = "qda"

    def _fit(self, X, y, seed):
        counts, present = _class_masks(y, self.n_classes)
        n, d = X.shape
        self.present = present
        self.priors = counts / n
        self.means = np.zeros((len(present), d))
        self.chols = np.zeros((len(present), d, d))
        self.log_dets = np.zeros(len(present))
        for i, c in enumerate(present):
            rows = X[y == c]
            self.means[i] = rows.mean(axis=0)
            centered = rows - self.means[i]
            cov = _regularize_covariance(centered.T @ centered / rows.shape[0])
            chol = _safe_cholesky(cov)
            self.chols[i] = chol
            self.log_dets[i] = 2.0 * np.log(np.diag(chol)).sum()

    def _log_joint(self, X):
        lj = np.empty((X.shape[0], len(self.present)))
        for i, c in enumerate(self.present):
            lj[:, i] = (np.log(self.priors[c])
                        + _gaussian_log_density(X, self.means[i], self.chols[i],
                                                self.log_dets[i]))
        return lj

    def _raw_supports(self, X):
        fallback = self.priors / self.priors.sum()
        return _log_posterior_supports(self._log_joint(X), self.present,
                                       self.n_classes, fallback)

    def to_state(self):
        return {"present": self.present, "priors": self.priors, "means": self.means,
                "chols": self.chols, "log_dets": self.log_dets,
                "n_classes": self.n_classes, "n_features": self.n_features}

    @classmethod
    def from_state(cls, spec, state):
        obj = cls(spec, int(state["n_classes"]), int(state["n_features"]))
        obj.present = np.asarray(state["present"], dtype=int)
        obj.priors = np.asarray(state["priors"], dtype=float)
        obj.means = np.asarray(state["means"], dtype=float)
        obj.chols = np.asarray(state["chols"], dtype=float)
        obj.log_dets = np.asarray(state["log_dets"], dtype=float)
        return obj


_REGISTRY: dict[str, type[TrainedClassifier]] = {}


def register_classifier_kind(kind: str, cls: type[TrainedClassifier]) -> None:
    """Hook for adding classifier kinds; built-ins register themselves."""
    _REGISTRY[kind] = cls


for _cls in (NearestCentroidClassifier, KnnClassifier, GaussianNBClassifier,
             KdeNBClassifier, LdaClassifier, QdaClassifier):
    register_classifier_kind(_cls.kind, _cls)


DEFAULT_POOL = (
    ClassifierSpec("naive_bayes_kde"),
    ClassifierSpec("nearest_centroid"),
    ClassifierSpec("knn", k=5),
    ClassifierSpec("lda"),
    ClassifierSpec("qda"),
)


def train(spec: ClassifierSpec, data: Dataset, seed: int) -> TrainedClassifier:
    """Train one classifier; deterministic given (spec, data, seed)."""
    if data.n_rows == 0:
        raise ValueError("empty dataset")
    X = np.asarray(data.features, dtype=float)
    y = np.asarray(data.labels, dtype=int)
    cls = _REGISTRY[spec.kind]
    trained = cls(spec, data.n_classes, X.shape[1])
    trained._fit(X, y, seed)
    return trained


def train_pool(specs, data: Dataset, seed: int) -> list[TrainedClassifier]:
    """Train every spec on the same data, preserving order."""
    specs = list(specs)
    if not specs:
        raise ValueError("empty pool")
    from .seeding import derive_seed
    return [train(spec, data, derive_seed(seed, "pool", i, spec.name))
            for i, spec in enumerate(specs)]


def classifier_from_state(spec: ClassifierSpec, state: dict) -> TrainedClassifier:
    return _REGISTRY[spec.kind].from_state(spec, state)
