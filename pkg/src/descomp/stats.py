"""Nonparametric comparison machinery: average ranks, the Friedman test,
exact Wilcoxon signed-rank tests and familywise error control.

All tests operate on loss tables with one row per dataset and one column per
method (lower is better).
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np
from scipy.stats import chi2, norm, rankdata


def rank_rows(losses: np.ndarray) -> np.ndarray:
    """Per-row ranks, ascending by loss, ties sharing the mean rank."""
    losses = np.asarray(losses, dtype=float)
    return np.vstack([rankdata(row, method="average") for row in losses])


def average_ranks(losses: np.ndarray) -> np.ndarray:
    """Mean rank per method over the datasets."""
    losses = np.atleast_2d(np.asarray(losses, dtype=float))
    if losses.shape[0] < 1:
        raise ValueError("need at least one dataset row")
    return rank_rows(losses).mean(axis=0)


def friedman_test(losses: np.ndarray) -> tuple[float, float]:
    """Tie-corrected Friedman chi-square test over a loss table.

    Uses the sums-of-squares form (k-1) * sum_j (R_j - N(k+1)/2)^2 /
    (A - N k (k+1)^2 / 4) with A the sum of squared individual ranks, which
    reduces to the classic 12N/(k(k+1)) [sum R_bar_j^2 - k(k+1)^2/4] formula
    when there are no ties. Complete ties give (0, 1).
    """
    losses = np.asarray(losses, dtype=float)
    if losses.ndim != 2:
        raise ValueError("loss table must be 2-D (datasets x methods)")
    n, k = losses.shape
    if n < 2 or k < 2:
        raise ValueError("Friedman test needs >= 2 datasets and >= 2 methods")
    ranks = rank_rows(losses)
    rank_sums = ranks.sum(axis=0)
    a = float((ranks ** 2).sum())
    c = n * k * (k + 1) ** 2 / 4.0
    denom = a - c
    if denom <= 1e-12:
        return 0.0, 1.0
    statistic = (k - 1) * float(((rank_sums - n * (k + 1) / 2.0) ** 2).sum()) / denom
    return statistic, float(chi2.sf(statistic, k - 1))


@dataclass(frozen=True)
class WilcoxonResult:
    statistic: float  # W+ = rank sum of positive differences a - b
    p_value: float
    n_used: int       # pairs left after dropping zero differences
    exact: bool
    degenerate: bool


_EXACT_LIMIT = 25


def _exact_signed_rank_p(scaled_ranks: np.ndarray, w2: int) -> float:
    """Two-sided exact p over the 2^n equiprobable sign assignments.

    ``scaled_ranks`` are midranks doubled to integers; distribution counts
    stay below 2^25 so int64 arithmetic is exact.
    """
    total = int(scaled_ranks.sum())
    dist = np.zeros(total + 1, dtype=np.int64)
    dist[0] = 1
    for r in scaled_ranks:
        shifted = np.zeros_like(dist)
        shifted[r:] = dist[:total + 1 - r]
        dist = dist + shifted
    count_le = int(dist[:w2 + 1].sum())
    count_ge = int(dist[w2:].sum())
    n = len(scaled_ranks)
    return min(1.0, 2 * min(count_le, count_ge) / 2 ** n)


def wilcoxon_signed_rank(a, b) -> WilcoxonResult:
    """Two-sided paired signed-rank test.

    Zero differences are dropped. Up to 25 remaining pairs the p-value comes
    from the exact sign-assignment distribution (ties handled through
    midranks); beyond that a normal approximation with tie and continuity
    corrections is used.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1 or a.size == 0:
        raise ValueError("paired samples must be 1-D and of equal length")
    d = a - b
    d = d[d != 0.0]
    n = d.size
    if n == 0:
        return WilcoxonResult(statistic=0.0, p_value=1.0, n_used=0,
                              exact=True, degenerate=True)
    ranks = rankdata(np.abs(d), method="average")
    w_plus = float(ranks[d > 0].sum())
    if n <= _EXACT_LIMIT:
        scaled = np.round(2 * ranks).astype(np.int64)  # midranks are exact halves
        w2 = int(round(2 * w_plus))
        p = _exact_signed_rank_p(scaled, w2)
        return WilcoxonResult(w_plus, p, n, exact=True, degenerate=False)
    mean = n * (n + 1) / 4.0
    tie_sizes = np.unique(np.abs(d), return_counts=True)[1]
    variance = (n * (n + 1) * (2 * n + 1) / 24.0
                - float(((tie_sizes ** 3) - tie_sizes).sum()) / 48.0)
    if variance <= 0.0:
        return WilcoxonResult(w_plus, 1.0, n, exact=False, degenerate=True)
    numer = w_plus - mean
    correction = 0.5 * np.sign(numer)
    z = (numer - correction) / np.sqrt(variance)
    p = min(1.0, 2.0 * float(norm.sf(abs(z))))
    return WilcoxonResult(w_plus, p, n, exact=False, degenerate=False)


@dataclass(frozen=True)
class MultiplicityResult:
    labels: tuple
    p_values: tuple[float, ...]
    adjusted: tuple[float, ...]
    rejected: tuple[bool, ...]
    procedure: str
    alpha: float


def holm_adjust(p_values) -> np.ndarray:
    """Holm step-down adjusted p-values."""
    p = np.asarray(p_values, dtype=float)
    m = p.size
    order = np.argsort(p, kind="stable")
    adjusted = np.empty(m)
    running = 0.0
    for rank, idx in enumerate(order):
        running = max(running, (m - rank) * p[idx])
        adjusted[idx] = min(1.0, running)
    return adjusted


def _set_partitions(items: list[int]):
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for partition in _set_partitions(rest):
        for i in range(len(partition)):
            yield partition[:i] + [partition[i] + [first]] + partition[i + 1:]
        yield partition + [[first]]


def exhaustive_pair_sets(n_methods: int) -> list[frozenset]:
    """All logically possible sets of simultaneously-true pairwise-equality
    hypotheses: one per partition of the methods into equal groups."""
    seen = set()
    for partition in _set_partitions(list(range(n_methods))):
        pairs = frozenset(
            pair for block in partition for pair in combinations(sorted(block), 2))
        if pairs:
            seen.add(pairs)
    return sorted(seen, key=lambda s: (len(s), sorted(s)))


_BH_MAX_METHODS = 8


def bergmann_hommel(pairs, p_values, n_methods: int, alpha: float = 0.05) -> MultiplicityResult:
    """Exhaustive closure over partition-consistent hypothesis sets.

    Rejects every pairwise hypothesis outside the union of exhaustive sets I
    with min_{i in I} p_i > alpha/|I|; adjusted p-values are the matching
    max |I| * min p over the exhaustive sets containing the hypothesis.
    """
    if n_methods > _BH_MAX_METHODS:
        raise ValueError(
            f"bergman-hommel enumerates partitions of at most {_BH_MAX_METHODS} "
            f"methods; use holm for larger families")
    pairs = [tuple(sorted(p)) for p in pairs]
    p_values = [float(v) for v in p_values]
    expected = {tuple(sorted(p)) for p in combinations(range(n_methods), 2)}
    if set(pairs) != expected or len(pairs) != len(expected):
        raise ValueError("need exactly one p-value per method pair")
    pmap = dict(zip(pairs, p_values))
    adjusted = {pair: 0.0 for pair in pairs}
    accepted: set = set()
    for subset in exhaustive_pair_sets(n_methods):
        p_min = min(pmap[pair] for pair in subset)
        bound = len(subset) * p_min
        if p_min > alpha / len(subset):
            accepted |= subset
        for pair in subset:
            adjusted[pair] = max(adjusted[pair], bound)
    adjusted_list = tuple(min(1.0, adjusted[pair]) for pair in pairs)
    rejected = tuple(pair not in accepted for pair in pairs)
    return MultiplicityResult(tuple(pairs), tuple(p_values), adjusted_list,
                              rejected, "bergman-hommel", alpha)


def multiplicity_control(p_values, pairs=None, n_methods: int | None = None,
                         procedure: str = "bergman-hommel",
                         alpha: float = 0.05) -> MultiplicityResult:
    """FWER control over a hypothesis family.

    With ``pairs``/``n_methods`` given, the family is the full set of
    pairwise method comparisons and the exhaustive procedure can exploit
    their logical structure. Without pairs the family is unconstrained, for
    which the exhaustive closure reduces exactly to Holm — so Holm is used.
    """
    if procedure not in ("bergman-hommel", "holm"):
        raise ValueError(f"unknown procedure {procedure!r}")
    if procedure == "bergman-hommel" and pairs is not None:
        if n_methods is None:
            raise ValueError("pairwise control needs n_methods")
        return bergmann_hommel(pairs, p_values, n_methods, alpha)
    p = [float(v) for v in p_values]
    labels = tuple(pairs) if pairs is not None else tuple(range(len(p)))
    adjusted = holm_adjust(p)
    rejected = tuple(bool(v <= alpha) for v in adjusted)
    return MultiplicityResult(labels, tuple(p), tuple(float(v) for v in adjusted),
                              rejected, "holm", alpha)
