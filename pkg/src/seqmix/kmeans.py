"""Lloyd's K-means with restarts, WCSS curves and index-voting K suggestion.

Kept deterministic on purpose: restart r always draws its centroids from
a generator seeded with seed + r, so restarts can run in any order (or
concurrently) without changing the result.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError

DEFAULT_RESTARTS = 25
DEFAULT_MAX_ITERS = 15


@dataclass(frozen=True)
class KMeansResult:
    k: int
    centroids: np.ndarray
    assignment: np.ndarray
    wcss: float
    iterations_used: int


def _assign(features: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    d2 = ((features[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
    return d2.argmin(axis=1)


def _wcss(features: np.ndarray, centroids: np.ndarray, assignment: np.ndarray) -> float:
    return float(((features - centroids[assignment]) ** 2).sum())


def _lloyd(features: np.ndarray, k: int, max_iters: int, rng: np.random.Generator):
    unique = np.unique(features, axis=0)
    start = rng.choice(len(unique), size=k, replace=False)
    centroids = unique[start].copy()
    assignment = _assign(features, centroids)
    prev_wcss = np.inf
    iterations = 0
    for _ in range(max_iters):
        iterations += 1
        for j in range(k):
            members = assignment == j
            if members.any():
                centroids[j] = features[members].mean(axis=0)
            else:
                # empty-cluster repair: reseed with the point farthest
                # from its currently assigned centroid
                dist = ((features - centroids[assignment]) ** 2).sum(axis=1)
                worst = int(dist.argmax())
                centroids[j] = features[worst]
                assignment[worst] = j
        new_assignment = _assign(features, centroids)
        wcss = _wcss(features, centroids, new_assignment)
        if wcss > prev_wcss + 1e-9:
            raise AssertionError("Lloyd iteration increased WCSS")
        prev_wcss = wcss
        if (new_assignment == assignment).all():
            assignment = new_assignment
            break
        assignment = new_assignment
    return centroids, assignment, prev_wcss, iterations


def kmeans(
    features: np.ndarray,
    k: int,
    restarts: int = DEFAULT_RESTARTS,
    max_iters: int = DEFAULT_MAX_ITERS,
    seed: int = 0,
) -> KMeansResult:
    """Best-of-restarts Lloyd clustering with Euclidean distance."""
    features = np.asarray(features, dtype=float)
    if features.ndim != 2:
        raise ParameterError("features must be a 2-D array")
    if restarts < 1:
        raise ParameterError("restarts must be >= 1")
    n_distinct = len(np.unique(features, axis=0))
    if k < 1 or k > n_distinct:
        raise ParameterError(f"k={k} must be between 1 and the number of distinct points ({n_distinct})")

    best = None
    for r in range(restarts):
        rng = np.random.default_rng(seed + r)
        centroids, assignment, wcss, iters = _lloyd(features, k, max_iters, rng)
        if best is None or wcss < best.wcss - 1e-15:
            best = KMeansResult(k, centroids, assignment, wcss, iters)
    return best


def wcss_curve(
    features: np.ndarray,
    k_range,
    restarts: int = DEFAULT_RESTARTS,
    max_iters: int = DEFAULT_MAX_ITERS,
    seed: int = 0,
) -> list[tuple[int, float]]:
    """(k, wcss) pairs of best-of-restarts runs; warns if the curve ever increases."""
    k_range = list(k_range)
    if not k_range:
        raise ParameterError("k_range must be nonempty")
    curve = [(k, kmeans(features, k, restarts, max_iters, seed).wcss) for k in k_range]
    ordered = sorted(curve)
    for (k0, w0), (k1, w1) in zip(ordered, ordered[1:]):
        if w1 > w0 + 1e-9:
            warnings.warn(
                f"WCSS increased from k={k0} to k={k1}; consider more restarts",
                stacklevel=2,
            )
    return curve


# --- cluster validity indices ----------------------------------------------


def _pairwise_sq(features: np.ndarray) -> np.ndarray:
    return ((features[:, None, :] - features[None, :, :]) ** 2).sum(axis=2)


def silhouette_index(features: np.ndarray, labels: np.ndarray) -> float:
    """Mean silhouette coefficient (singleton clusters score 0)."""
    n = len(features)
    d = np.sqrt(_pairwise_sq(features))
    ks = np.unique(labels)
    scores = np.zeros(n)
    for i in range(n):
        own = labels == labels[i]
        n_own = own.sum()
        if n_own <= 1:
            scores[i] = 0.0
            continue
        a = d[i, own].sum() / (n_own - 1)
        b = min(d[i, labels == c].mean() for c in ks if c != labels[i])
        scores[i] = (b - a) / max(a, b) if max(a, b) > 0 else 0.0
    return float(scores.mean())


def calinski_harabasz_index(features: np.ndarray, labels: np.ndarray) -> float:
    n, _ = features.shape
    ks = np.unique(labels)
    k = len(ks)
    overall = features.mean(axis=0)
    between = 0.0
    within = 0.0
    for c in ks:
        pts = features[labels == c]
        centroid = pts.mean(axis=0)
        between += len(pts) * ((centroid - overall) ** 2).sum()
        within += ((pts - centroid) ** 2).sum()
    if within == 0:
        return np.inf
    return float((between / (k - 1)) / (within / (n - k)))


def davies_bouldin_index(features: np.ndarray, labels: np.ndarray) -> float:
    ks = np.unique(labels)
    centroids = np.array([features[labels == c].mean(axis=0) for c in ks])
    scatter = np.array(
        [np.sqrt(((features[labels == c] - centroids[i]) ** 2).sum(axis=1)).mean() for i, c in enumerate(ks)]
    )
    k = len(ks)
    worst = np.zeros(k)
    for i in range(k):
        ratios = [
            (scatter[i] + scatter[j]) / np.sqrt(((centroids[i] - centroids[j]) ** 2).sum())
            for j in range(k)
            if j != i
        ]
        worst[i] = max(ratios)
    return float(worst.mean())


def dunn_index(features: np.ndarray, labels: np.ndarray) -> float:
    """Min inter-cluster point distance over max intra-cluster diameter."""
    d = np.sqrt(_pairwise_sq(features))
    ks = np.unique(labels)
    diameters = [d[np.ix_(labels == c, labels == c)].max() for c in ks]
    max_diam = max(diameters)
    min_sep = np.inf
    for i, ci in enumerate(ks):
        for cj in ks[i + 1 :]:
            min_sep = min(min_sep, d[np.ix_(labels == ci, labels == cj)].min())
    if max_diam == 0:
        return np.inf
    return float(min_sep / max_diam)


# index name -> (function, True if higher is better)
VALIDITY_INDICES = {
    "silhouette": (silhouette_index, True),
    "calinski_harabasz": (calinski_harabasz_index, True),
    "davies_bouldin": (davies_bouldin_index, False),
    "dunn": (dunn_index, True),
}


def suggest_k(
    features: np.ndarray,
    k_range,
    seed: int = 0,
    restarts: int = DEFAULT_RESTARTS,
    max_iters: int = DEFAULT_MAX_ITERS,
) -> tuple[int, dict[str, int | None]]:
    """Maximal voting across a small set of validity indices.

    Each index votes for its optimal k over K-means results; the modal k
    wins, ties going to the smaller k.  Degenerate clusterings (all
    clusters singletons) make an index abstain (vote None).
    """
    features = np.asarray(features, dtype=float)
    n = len(features)
    k_range = sorted(set(int(k) for k in k_range))
    if not k_range:
        raise ParameterError("k_range must be nonempty")
    if k_range[0] < 2 or k_range[-1] > n - 1:
        raise ParameterError("k_range must lie within {2, ..., n-1}")

    results = {k: kmeans(features, k, restarts, max_iters, seed) for k in k_range}
    scores: dict[str, dict[int, float]] = {name: {} for name in VALIDITY_INDICES}
    for k, res in results.items():
        counts = np.bincount(res.assignment, minlength=k)
        degenerate = (counts <= 1).all()
        for name, (fn, _) in VALIDITY_INDICES.items():
            if degenerate:
                continue
            scores[name][k] = fn(features, res.assignment)

    votes: dict[str, int | None] = {}
    for name, (_, higher_better) in VALIDITY_INDICES.items():
        per_k = scores[name]
        if not per_k:
            votes[name] = None
            continue
        items = sorted(per_k.items())  # ties -> smaller k
        if higher_better:
            votes[name] = max(items, key=lambda kv: kv[1])[0]
        else:
            votes[name] = min(items, key=lambda kv: kv[1])[0]

    tally: dict[int, int] = {}
    for v in votes.values():
        if v is not None:
            tally[v] = tally.get(v, 0) + 1
    if not tally:
        raise ParameterError("every index abstained; k_range too degenerate")
    best_count = max(tally.values())
    k_best = min(k for k, c in tally.items() if c == best_count)
    return k_best, votes
