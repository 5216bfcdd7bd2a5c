"""Benchmark anomaly detectors on 1-D daily counts.

Box-Plot, LOF and K-means are fitted on the whole series and read on the
test days; Isolation Forest is trained on the training days only.
"""

from __future__ import annotations

import logging
import warnings
from bisect import bisect_left
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError, DegenerateSeriesError

log = logging.getLogger(__name__)

METHODS = ("boxplot", "lof", "iforest", "kmeans")
EULER_GAMMA = 0.5772156649015329


@dataclass(frozen=True)
class BaselineFlagSet:
    method: str
    flags: np.ndarray
    scores: np.ndarray

    def __post_init__(self):
        if len(self.flags) != len(self.scores):
            raise DataError("flags and scores differ in length")


def _values(series) -> np.ndarray:
    x = np.asarray(series, dtype=float)
    if x.ndim != 1 or not np.isfinite(x).all():
        raise DataError("expected a finite 1-D series")
    return x


def _test_slice(n: int, test_range) -> slice:
    if test_range is None:
        return slice(0, n)
    if isinstance(test_range, range):
        return slice(test_range.start, test_range.stop)
    if isinstance(test_range, slice):
        return test_range
    start, stop = test_range
    return slice(start, stop)


# -- Box-Plot ----------------------------------------------------------------

def tukey_fences(values, whisker: float = 1.5) -> tuple[float, float]:
    """(lower, upper) fences from linearly interpolated quartiles."""
    q1, q3 = np.percentile(values, [25, 75])
    iqr = q3 - q1
    return q1 - whisker * iqr, q3 + whisker * iqr


def boxplot_detect(series, test_range=None, whisker: float = 1.5) -> BaselineFlagSet:
    x = _values(series)
    if len(x) < 4:
        raise DataError("box-plot needs at least 4 observations")
    lower, upper = tukey_fences(x, whisker)
    excess = np.maximum(x - upper, lower - x)
    sl = _test_slice(len(x), test_range)
    return BaselineFlagSet("boxplot", excess[sl] > 0, excess[sl])


# -- Local Outlier Factor ----------------------------------------------------

def lof_scores(values, k: int) -> np.ndarray:
    """Local outlier factors of 1-D points with ``k`` neighbours.

    Neighbourhoods include every point within the k-distance, so ties can
    make them larger than ``k``. A point whose neighbours all coincide
    with it has infinite density; such points score 1, and a point of
    finite density next to one scores infinity.
    """
    x = _values(values)
    n = len(x)
    if not 1 <= k < n:
        raise ConfigError(f"k must lie in [1, {n - 1}], got {k}")
    dist = np.abs(x[:, None] - x[None, :])
    np.fill_diagonal(dist, np.inf)
    kdist = np.sort(dist, axis=1)[:, k - 1]
    neigh = dist <= kdist[:, None]
    reach = np.maximum(dist, kdist[None, :])
    mean_reach = np.where(neigh, reach, 0.0).sum(axis=1) / neigh.sum(axis=1)

    scores = np.empty(n)
    for i in range(n):
        if mean_reach[i] == 0.0:
            scores[i] = 1.0
            continue
        nb = mean_reach[neigh[i]]
        if (nb == 0.0).any():
            scores[i] = np.inf
        else:
            scores[i] = mean_reach[i] * np.mean(1.0 / nb)
    return scores


def lof_detect(series, test_range=None, k: int | None = None, lof_threshold: float = 1.5) -> BaselineFlagSet:
    x = _values(series)
    n = len(x)
    if k is None:
        k = min(20, n - 1)
    if k >= n:
        raise ConfigError(f"k={k} must be smaller than the series length {n}")
    scores = lof_scores(x, k)
    sl = _test_slice(n, test_range)
    return BaselineFlagSet("lof", scores[sl] > lof_threshold, scores[sl])


# -- Isolation Forest --------------------------------------------------------

def average_path_length(m) -> np.ndarray:
    """Average unsuccessful-search path length c(m) of a BST with m nodes."""
    m = np.asarray(m, dtype=float)
    out = np.zeros_like(m)
    out[m == 2] = 1.0
    big = m > 2
    out[big] = 2.0 * (np.log(m[big] - 1.0) + EULER_GAMMA) - 2.0 * (m[big] - 1.0) / m[big]
    return out


def _grow(values, lo: int, hi: int, depth: int, limit: int, rng):
    """Isolation tree over the sorted slice ``values[lo:hi]``; a node is
    either a leaf size or ``(split, left, right)``."""
    size = hi - lo
    if depth >= limit or size <= 1:
        return size
    vmin, vmax = values[lo], values[hi - 1]
    if vmin == vmax:
        return size
    split = rng.uniform(vmin, vmax)
    mid = bisect_left(values, split, lo, hi)
    return (split, _grow(values, lo, mid, depth + 1, limit, rng), _grow(values, mid, hi, depth + 1, limit, rng))


def _flatten(node, depth: int = 0, thresholds=None, leaves=None):
    """In-order walk: in one dimension the leaves are consecutive intervals
    separated by the split values, so a tree reduces to sorted thresholds
    plus a (depth, size) pair per interval."""
    if thresholds is None:
        thresholds, leaves = [], []
    if isinstance(node, tuple):
        split, left, right = node
        _flatten(left, depth + 1, thresholds, leaves)
        thresholds.append(split)
        _flatten(right, depth + 1, thresholds, leaves)
    else:
        leaves.append((depth, node))
    return thresholds, leaves


class IsolationForest1D:
    """Isolation Forest on scalar observations."""

    def __init__(self, trees: int = 100, subsample: int | None = None, seed=None):
        if trees < 1:
            raise ConfigError("trees must be at least 1")
        if subsample is not None and subsample < 1:
            raise ConfigError("subsample must be at least 1")
        self.trees = trees
        self.subsample = subsample
        self.seed = seed

    def fit(self, train):
        x = _values(train)
        if len(x) == 0:
            raise DataError("isolation forest needs training data")
        psi = self.subsample if self.subsample is not None else min(256, len(x))
        if psi > len(x):
            warnings.warn(f"subsample {psi} exceeds training size {len(x)}; clamped", stacklevel=2)
            psi = len(x)
        self.psi_ = psi
        limit = int(np.ceil(np.log2(psi))) if psi > 1 else 0
        rng = np.random.default_rng(self.seed)
        self.trees_ = []
        for _ in range(self.trees):
            sample = sorted(rng.choice(x, size=psi, replace=False).tolist())
            th, leaves = _flatten(_grow(sample, 0, psi, 0, limit, rng))
            depth, size = np.array(leaves, dtype=float).T
            self.trees_.append((np.array(th), depth + average_path_length(size)))
        return self

    def mean_path_length(self, values) -> np.ndarray:
        x = _values(values)
        total = np.zeros(len(x))
        for thresholds, leaves in self.trees_:
            # x == split goes right, hence side="right"
            total += leaves[np.searchsorted(thresholds, x, side="right")]
        return total / len(self.trees_)

    def score(self, values) -> np.ndarray:
        """Anomaly scores 2^(-E[h(x)] / c(psi)); 0.5 everywhere when psi = 1."""
        cn = average_path_length(np.array([self.psi_]))[0]
        h = self.mean_path_length(values)
        if cn == 0.0:
            return np.full(len(h), 0.5)
        return 2.0 ** (-h / cn)


def iforest_detect(train, test, trees: int = 100, subsample: int | None = None, seed=None,
                   threshold: float = 0.5) -> BaselineFlagSet:
    forest = IsolationForest1D(trees, subsample, seed).fit(train)
    s = forest.score(test)
    return BaselineFlagSet("iforest", s > threshold, s)


# -- K-means -----------------------------------------------------------------

@dataclass(frozen=True)
class KMeansResult:
    labels: np.ndarray
    centers: np.ndarray
    inertia: float
    iterations: int


def _lloyd(x: np.ndarray, centers: np.ndarray, max_iter: int = 1000) -> KMeansResult:
    labels = None
    for it in range(1, max_iter + 1):
        d = (x[:, None] - centers[None, :]) ** 2
        new = np.argmin(d, axis=1)
        if labels is not None and np.array_equal(new, labels):
            break
        labels = new
        for j in range(len(centers)):
            members = x[labels == j]
            if len(members):
                centers[j] = members.mean()
    inertia = float(((x - centers[labels]) ** 2).sum())
    return KMeansResult(labels, centers, inertia, it)


def _kmeanspp(x: np.ndarray, k: int, rng) -> np.ndarray:
    centers = [x[rng.integers(len(x))]]
    for _ in range(1, k):
        d2 = np.min((x[:, None] - np.array(centers)[None, :]) ** 2, axis=1)
        if d2.sum() == 0:
            centers.append(x[rng.integers(len(x))])
        else:
            centers.append(x[rng.choice(len(x), p=d2 / d2.sum())])
    return np.array(centers, dtype=float)


def kmeans_1d(values, k: int = 2, restarts: int = 10, seed=None) -> KMeansResult:
    """Lloyd's algorithm from k-means++ seeds; best of ``restarts`` runs."""
    x = _values(values)
    rng = np.random.default_rng(seed)
    best = None
    for _ in range(restarts):
        res = _lloyd(x, _kmeanspp(x, k, rng))
        if best is None or res.inertia < best.inertia:
            best = res
    return best


def kmeans_detect(series, test_range=None, seed=None, restarts: int = 10) -> BaselineFlagSet:
    """Two-cluster K-means; the smaller cluster (ties: larger centroid)
    is the anomalous class."""
    x = _values(series)
    if len(np.unique(x)) < 2:
        raise DegenerateSeriesError("k-means needs at least two distinct values")
    res = kmeans_1d(x, 2, restarts, seed)
    sizes = np.bincount(res.labels, minlength=2)
    if sizes[0] != sizes[1]:
        minority = int(np.argmin(sizes))
    else:
        minority = int(np.argmax(res.centers))
    majority = 1 - minority
    score = np.abs(x - res.centers[majority]) - np.abs(x - res.centers[minority])
    sl = _test_slice(len(x), test_range)
    return BaselineFlagSet("kmeans", res.labels[sl] == minority, score[sl])


def run_baseline(method: str, series, train_len: int, seed=None, *, k=None, lof_threshold=1.5,
                 trees=100, subsample=None, restarts=10, whisker=1.5) -> BaselineFlagSet:
    """Apply one benchmark to a series whose first ``train_len`` days are
    training data; flags cover the remaining days."""
    x = _values(series)
    test_range = range(train_len, len(x))
    if method == "boxplot":
        return boxplot_detect(x, test_range, whisker)
    if method == "lof":
        return lof_detect(x, test_range, k, lof_threshold)
    if method == "iforest":
        return iforest_detect(x[:train_len], x[train_len:], trees, subsample, seed)
    if method == "kmeans":
        return kmeans_detect(x, test_range, seed, restarts)
    raise ConfigError(f"unknown baseline {method!r}; choose from {', '.join(METHODS)}")
