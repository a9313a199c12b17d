"""Per-point classifier competence under three randomized models.

Competence of a classifier at a feature vector is the estimated probability
that it classifies the point correctly:

* ``bootstrap`` — retrain the classifier on K bootstrap resamples of the
  training set and count the fraction of replicas that get the point right.
  Values are exact multiples of 1/K.
* ``rrc_beta`` — replace the classifier's supports with independent Beta
  draws whose means equal the supports (Beta(M*g_i, M*(1-g_i))), and
  Monte-Carlo estimate the probability that the true class outdraws every
  rival. Strict ties count as failure.
* ``rrc_gaussian`` — same event, with truncated-to-[0,1] Gaussian draws of
  mean g_i and scale sigma_scale^2 * g_i(1-g_i)/(M+1) (the matching Beta
  variance, rescaled). The pre-truncation location is solved so the
  truncated mean equals g_i exactly; centering naively at g_i would bias
  the mean toward 1/2 near the boundaries.

Seed handling is fully deterministic: bootstrap sample r draws its indices
from derive_seed(seed, "bootstrap-sample", r) — shared by every classifier
so cross-classifier comparisons see the same resamples — while replica
training uses derive_seed(seed, classifier_id, r). RRC values for validation
point k use derive_seed(seed, "point", k).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq
from scipy.special import erfcx, ndtr, ndtri

from .classifiers import ClassifierSpec, TrainedClassifier, train
from .data import Dataset, check_supports
from .seeding import derive_seed

METHODS = ("bootstrap", "rrc_beta", "rrc_gaussian")


@dataclass(frozen=True)
class MethodParams:
    """Hyperparameters of the competence methods (unused ones are ignored)."""

    k_bootstrap: int = 31
    mc_samples: int = 100000
    sigma_scale: float = 1.0


@dataclass(frozen=True)
class CompetenceSet:
    """Validation points paired with one classifier's competence values."""

    points: np.ndarray  # (N, d), post-preprocessing feature space
    values: np.ndarray  # (N,), each in [0, 1]
    classifier_id: str

    def __post_init__(self):
        points = np.asarray(self.points, dtype=float)
        values = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "values", values)
        if points.ndim != 2 or values.ndim != 1 or points.shape[0] != values.shape[0]:
            raise ValueError("points and values must align on N >= 1 rows")
        if points.shape[0] < 1:
            raise ValueError("competence set needs at least one point")
        if values.min() < 0.0 or values.max() > 1.0:
            raise ValueError("competence values must lie in [0, 1]")


@dataclass(frozen=True)
class BootstrapReplicas:
    """K classifiers trained on bootstrap resamples, with their seeds recorded
    so any replica can be rebuilt exactly."""

    classifiers: tuple[TrainedClassifier, ...]
    sample_seeds: tuple[int, ...]
    train_seeds: tuple[int, ...]


def bootstrap_sample(data: Dataset, seed: int) -> Dataset:
    """n rows drawn uniformly with replacement; deterministic per seed."""
    n = data.n_rows
    if n == 0:
        raise ValueError("empty dataset")
    idx = np.random.default_rng(seed).integers(0, n, size=n)
    return data.subset(idx)


def train_bootstrap_replicas(spec: ClassifierSpec, train_data: Dataset, K: int,
                             seed: int, classifier_id: str | None = None) -> BootstrapReplicas:
    if K < 1:
        raise ValueError("K must be >= 1")
    cid = classifier_id if classifier_id is not None else spec.name
    sample_seeds = tuple(derive_seed(seed, "bootstrap-sample", r) for r in range(K))
    train_seeds = tuple(derive_seed(seed, cid, r) for r in range(K))
    classifiers = tuple(
        train(spec, bootstrap_sample(train_data, sample_seeds[r]), train_seeds[r])
        for r in range(K))
    return BootstrapReplicas(classifiers, sample_seeds, train_seeds)


def bootstrap_competence(spec: ClassifierSpec, train_data: Dataset,
                         validation: Dataset, K: int, seed: int,
                         classifier_id: str | None = None) -> CompetenceSet:
    """Fraction of K bootstrap-retrained replicas that classify each
    validation point correctly. Replicas are trained once and reused across
    all points."""
    if validation.n_rows == 0:
        raise ValueError("empty validation set")
    replicas = train_bootstrap_replicas(spec, train_data, K, seed, classifier_id)
    X = np.asarray(validation.features, dtype=float)
    y = np.asarray(validation.labels, dtype=int)
    correct = np.zeros(X.shape[0])
    for clf in replicas.classifiers:
        correct += clf.predict(X) == y
    cid = classifier_id if classifier_id is not None else spec.name
    return CompetenceSet(points=X, values=correct / K, classifier_id=cid)


def _beta_draws(rng: np.random.Generator, g: float, n_classes: int, size: int) -> np.ndarray:
    # degenerate parameters collapse to the point mass at g
    if g <= 0.0:
        return np.zeros(size)
    if g >= 1.0:
        return np.ones(size)
    return rng.beta(n_classes * g, n_classes * (1.0 - g), size)


_TAIL_LIMIT = 37.0
_SQRT_HALF = np.sqrt(0.5)
_SQRT_HALF_PI = np.sqrt(np.pi / 2.0)


def _phi_ratio(a: float, b: float) -> float:
    """(phi(a) - phi(b)) / (Phi(b) - Phi(a)) for a < b, stable in the tails.

    In the upper tail the naive form is 0/0; rescaling by exp(a^2/2) turns
    it into an erfcx expression with no underflow.
    """
    if b <= 0.0:
        return -_phi_ratio(-b, -a)
    if a < 0.0:
        phi_a = np.exp(-0.5 * a * a)
        phi_b = np.exp(-0.5 * b * b)
        z = ndtr(b) - ndtr(a)
        return (phi_a - phi_b) / (np.sqrt(2.0 * np.pi) * z)
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        delta = np.exp((a - b) * (a + b) / 2.0)  # <= 1, may underflow to 0
        denom = erfcx(a * _SQRT_HALF) - delta * erfcx(b * _SQRT_HALF)
        ratio = (1.0 - delta) / (_SQRT_HALF_PI * denom)
    if not np.isfinite(ratio):
        # interval narrower than fp resolution this far out: fall back to
        # the one-sided tail asymptotics
        return a + 1.0 / a if a > 0 else np.inf
    return float(ratio)


def _truncated_mean(mu: float, sigma: float) -> float:
    a = (0.0 - mu) / sigma
    b = (1.0 - mu) / sigma
    return mu + sigma * _phi_ratio(a, b)


def matched_location(g: float, sigma: float) -> float:
    """Location whose [0,1]-truncated normal has mean exactly g.

    Truncating a normal centered at g shifts its mean toward 1/2, which
    would break the mean-equals-support condition for supports near the
    boundaries; the truncated mean is continuous and strictly increasing in
    the location, so the matching location exists and is unique.
    """
    if not 0.0 < g < 1.0:
        raise ValueError("g must lie strictly inside (0, 1)")
    step = max(sigma, 0.5)
    lo = hi = g
    f_lo = f_hi = _truncated_mean(g, sigma) - g
    for _ in range(200):
        if f_lo <= 0.0:
            break
        lo -= step
        f_lo = _truncated_mean(lo, sigma) - g
        step *= 2.0
    step = max(sigma, 0.5)
    for _ in range(200):
        if f_hi >= 0.0:
            break
        hi += step
        f_hi = _truncated_mean(hi, sigma) - g
        step *= 2.0
    if f_lo > 0.0 or f_hi < 0.0:
        raise ArithmeticError(f"no matched location for g={g}, sigma={sigma}")
    return float(brentq(lambda mu: _truncated_mean(mu, sigma) - g,
                        lo, hi, xtol=1e-14, rtol=8.9e-16))


def _truncated_gaussian_draws(rng: np.random.Generator, g: float, n_classes: int,
                              sigma_scale: float, size: int) -> np.ndarray:
    variance = g * (1.0 - g) / (n_classes + 1)  # Beta(M*g, M*(1-g)) variance
    sigma = sigma_scale * np.sqrt(variance)
    if sigma == 0.0:
        return np.full(size, np.clip(g, 0.0, 1.0))
    mu = matched_location(g, sigma)
    if 0.0 <= mu <= 1.0 and min(mu, 1.0 - mu) >= 2.0 * sigma:
        # rejection from the untruncated normal; acceptance >= ~95% here
        draws = rng.normal(mu, sigma, size)
        out = (draws < 0.0) | (draws > 1.0)
        while np.any(out):
            draws[out] = rng.normal(mu, sigma, int(out.sum()))
            out = (draws < 0.0) | (draws > 1.0)
        return draws
    # inverse-CDF sampling near a boundary
    a = (0.0 - mu) / sigma
    b = (1.0 - mu) / sigma
    u = rng.random(size)
    if a > _TAIL_LIMIT:
        # normal sf underflows: the density on [0, 1] is an exponential
        # decay from 0 with rate a/sigma, exact to double precision here
        rate = a / sigma
        return -np.log1p(u * np.expm1(-rate)) / rate
    if b < -_TAIL_LIMIT:
        rate = -b / sigma
        return 1.0 + np.log1p(u * np.expm1(-rate)) / rate
    if a > 0.0:
        # interval in the upper tail: the cdf saturates at 1 but the
        # survival function keeps full precision
        sf_a = ndtr(-a)
        sf_b = ndtr(-b)
        draws = mu - sigma * ndtri(sf_a + u * (sf_b - sf_a))
    else:
        lo = ndtr(a)
        hi = ndtr(b)
        draws = mu + sigma * ndtri(lo + u * (hi - lo))
    return np.clip(draws, 0.0, 1.0)  # guard fp tails of the inverse CDF


def beta_support_draws(g: float, n_classes: int, mc_samples: int, seed: int) -> np.ndarray:
    """Raw Beta support draws for one class (mean g); used to check the
    mean-matching property of the randomization."""
    return _beta_draws(np.random.default_rng(seed), g, n_classes, mc_samples)


def gaussian_support_draws(g: float, n_classes: int, sigma_scale: float,
                           mc_samples: int, seed: int) -> np.ndarray:
    return _truncated_gaussian_draws(np.random.default_rng(seed), g, n_classes,
                                     sigma_scale, mc_samples)


def _randomized_win_probability(supports, true_label: int, mc_samples: int,
                                seed: int, draw) -> float:
    """P[true-class draw strictly exceeds every rival draw].

    The true class samples from its own stream; rivals are sampled in
    descending-support order from a second stream. Permuting class labels
    (and supports accordingly) therefore reproduces the exact same draws,
    making the estimate permutation-equivariant, not just in distribution.
    """
    g = check_supports(supports)
    n_classes = g.size
    if not 0 <= true_label < n_classes:
        raise ValueError("true_label out of range")
    if mc_samples < 1:
        raise ValueError("mc_samples must be >= 1")
    rng_true = np.random.default_rng(derive_seed(seed, "true"))
    rng_rivals = np.random.default_rng(derive_seed(seed, "rivals"))
    true_draws = draw(rng_true, float(g[true_label]), n_classes, mc_samples)
    rivals = sorted((k for k in range(n_classes) if k != true_label),
                    key=lambda k: (-g[k], k))
    rival_max = np.full(mc_samples, -np.inf)
    for k in rivals:
        np.maximum(rival_max, draw(rng_rivals, float(g[k]), n_classes, mc_samples),
                   out=rival_max)
    return float(np.mean(true_draws > rival_max))


def rrc_beta_competence(supports, true_label: int, mc_samples: int = 100000,
                        seed: int = 0) -> float:
    """Competence as the win probability of Beta-randomized supports."""
    return _randomized_win_probability(supports, true_label, mc_samples, seed,
                                       _beta_draws)


def rrc_gaussian_competence(supports, true_label: int, sigma_scale: float = 1.0,
                            mc_samples: int = 100000, seed: int = 0) -> float:
    """Competence as the win probability of truncated-Gaussian-randomized
    supports."""
    if sigma_scale <= 0.0:
        raise ValueError("sigma_scale must be > 0")

    def draw(rng, g, n_classes, size):
        return _truncated_gaussian_draws(rng, g, n_classes, sigma_scale, size)

    return _randomized_win_probability(supports, true_label, mc_samples, seed, draw)


def build_competence_set(method: str, classifier_or_spec, train_data: Dataset,
                         validation: Dataset, params: MethodParams, seed: int,
                         classifier_id: str | None = None) -> CompetenceSet:
    """One competence value per validation point, by the chosen method.

    For the RRC variants the evaluated classifier is trained once on the full
    training set (or used as given, when already trained); point k draws its
    Monte-Carlo stream from derive_seed(seed, "point", k), so a direct call
    of the underlying per-point operation with that seed reproduces the value
    exactly.
    """
    if method not in METHODS:
        raise ValueError(f"unknown competence method {method!r}")
    if validation.n_rows == 0:
        raise ValueError("empty validation set")
    if method == "bootstrap":
        if not isinstance(classifier_or_spec, ClassifierSpec):
            raise ValueError("bootstrap competence retrains replicas and needs a spec")
        return bootstrap_competence(classifier_or_spec, train_data, validation,
                                    params.k_bootstrap, seed, classifier_id)

    if isinstance(classifier_or_spec, ClassifierSpec):
        clf = train(classifier_or_spec, train_data, derive_seed(seed, "full-train"))
        cid = classifier_id if classifier_id is not None else classifier_or_spec.name
    else:
        clf = classifier_or_spec
        cid = classifier_id if classifier_id is not None else clf.spec.name
    X = np.asarray(validation.features, dtype=float)
    y = np.asarray(validation.labels, dtype=int)
    supports = np.atleast_2d(clf.predict_supports(X))
    values = np.empty(X.shape[0])
    for k in range(X.shape[0]):
        point_seed = derive_seed(seed, "point", k)
        if method == "rrc_beta":
            values[k] = rrc_beta_competence(supports[k], int(y[k]),
                                            params.mc_samples, point_seed)
        else:
            values[k] = rrc_gaussian_competence(supports[k], int(y[k]),
                                                params.sigma_scale,
                                                params.mc_samples, point_seed)
    return CompetenceSet(points=X, values=values, classifier_id=cid)
