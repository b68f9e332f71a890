"""Lloyd's k-means and exact two-way spectral clustering."""

from dataclasses import dataclass, field

import numpy as np

from .linalg import canonical_sign, sym_eig
from .similarity import KernelSpec, build_similarity, degrees, normalized_laplacian, sq_dists

__all__ = [
    "KMeansResult",
    "SpectralResult",
    "kmeans",
    "kmeans_objective",
    "split_eigenvector",
    "fiedler_from_pairs",
    "cluster_similarity",
    "spectral_cluster",
]

DEFAULT_ITERATIONS = 100


@dataclass
class KMeansResult:
    labels: np.ndarray
    centroids: np.ndarray
    objective: float
    iterations: int
    history: list = field(default_factory=list)

    @property
    def k(self):
        return self.centroids.shape[0]


def kmeans_objective(X, labels, centroids):
    """Sum of squared distances from each point to its assigned centroid."""
    X = np.asarray(X, dtype=float)
    diff = X - centroids[labels]
    return float(np.sum(diff * diff))


def _means(X, labels, k):
    counts = np.bincount(labels, minlength=k).astype(float)
    sums = np.zeros((k, X.shape[1]))
    np.add.at(sums, labels, X)
    return sums / counts[:, None]


def kmeans(X, k, T=DEFAULT_ITERATIONS, seed=0, init=None):
    """Lloyd iterations for k clusters.

    Initial means are k distinct data rows drawn without replacement (or
    ``init``). Each round assigns every point to its nearest mean (lowest
    index wins ties) and recomputes the means; iteration stops after ``T``
    rounds or when an assignment repeats. A cluster left empty is reseeded
    at the point farthest from its current centroid.
    """
    X = np.asarray(X, dtype=float)
    n = X.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= n, got k={k}, n={n}")
    if T < 1:
        raise ValueError("T must be >= 1")
    if init is None:
        rng = np.random.default_rng(seed)
        centroids = X[rng.choice(n, size=k, replace=False)].copy()
    else:
        centroids = np.array(init, dtype=float)
        if centroids.shape != (k, X.shape[1]):
            raise ValueError(f"init must have shape {(k, X.shape[1])}")

    labels = None
    history = []
    iterations = 0
    for _ in range(T):
        d2 = sq_dists(X, centroids)
        new = np.argmin(d2, axis=1)
        if labels is not None and np.array_equal(new, labels):
            break
        _reseed_empty(new, d2, k)
        labels = new
        centroids = _means(X, labels, k)
        iterations += 1
        history.append(kmeans_objective(X, labels, centroids))
    return KMeansResult(labels, centroids, history[-1], iterations, history)


def _reseed_empty(labels, d2, k):
    counts = np.bincount(labels, minlength=k)
    cost = d2[np.arange(len(labels)), labels].copy()
    for j in np.flatnonzero(counts == 0):
        # only take points from clusters that stay nonempty
        donor_ok = counts[labels] >= 2
        cand = np.where(donor_ok, cost, -np.inf)
        p = int(np.argmax(cand))
        counts[labels[p]] -= 1
        labels[p] = j
        counts[j] += 1
        cost[p] = -np.inf


def split_eigenvector(v, max_iter=1000):
    """Two-way split of a vector's entries by 1-D 2-means.

    Centers start at min(v) and max(v); entries nearer the larger center get
    label 1 (ties go to the smaller center). Lloyd iterations can stop at a
    local optimum, so the result is compared against every threshold of the
    sorted entries (the optimal 1-D split is always a threshold) and replaced
    when a threshold gives a strictly smaller within-cluster sum of squares.
    """
    v = np.asarray(v, dtype=float).ravel()
    if v.size < 2:
        raise ValueError("need at least two entries")
    lo, hi = float(v.min()), float(v.max())
    if hi - lo <= 1e-12:
        raise ValueError("eigenvector is constant; the Laplacian is degenerate")
    labels = None
    for _ in range(max_iter):
        new = (np.abs(v - hi) < np.abs(v - lo)).astype(int)
        if labels is not None and np.array_equal(new, labels):
            break
        labels = new
        lo = float(v[labels == 0].mean())
        hi = float(v[labels == 1].mean())
    cut, best = _best_threshold(v)
    if best < _split_cost(v, labels) - 1e-12 * max(float(np.sum((v - v.mean()) ** 2)), 1e-300):
        labels = (v >= cut).astype(int)
    return labels


def _split_cost(v, labels):
    cost = 0.0
    for k in (0, 1):
        part = v[labels == k]
        if part.size:
            cost += float(np.sum((part - part.mean()) ** 2))
    return cost


def _best_threshold(v):
    """Smallest within-cluster sum of squares over splits {v < t}, {v >= t}."""
    s = np.sort(v - v.mean())
    n = s.size
    head = np.cumsum(s)[:-1]
    c = np.arange(1, n)
    # only cut between distinct values so the threshold is well defined
    valid = s[1:] > s[:-1]
    total_sq = float(np.sum(s * s))
    cost = total_sq - head**2 / c - head**2 / (n - c)  # the tail sum is -head since s is centered
    cost = np.where(valid, cost, np.inf)
    i = int(np.argmin(cost))
    return float(np.sort(v)[i + 1]), float(cost[i])


def fiedler_from_pairs(values, vectors, sqrt_degrees):
    """Second vector of an eigenbasis whose exact first vector is known.

    For a normalized Laplacian the bottom eigenvector is D^1/2 1. When the
    two lowest eigenvalues are (numerically) tied the solver may return any
    rotation of that pair; taking the combination orthogonal to D^1/2 1
    recovers the limit of the second eigenvector as the cut weight goes to 0.
    """
    v1, v2 = vectors[:, 0], vectors[:, 1]
    q = sqrt_degrees / np.linalg.norm(sqrt_degrees)
    a, b = float(v2 @ q), -float(v1 @ q)
    if np.hypot(a, b) < 0.5:
        w = v2.copy()
    else:
        w = a * v1 + b * v2
        w /= np.linalg.norm(w)
    return canonical_sign(w[:, None])[:, 0]


@dataclass
class SpectralResult:
    labels: np.ndarray
    fiedler: np.ndarray
    eigenvalues: np.ndarray


def cluster_similarity(W, seed=0):
    """Spectral clustering of a given similarity matrix (dense or sparse)."""
    n = W.shape[0]
    if n < 2:
        raise ValueError("need at least two points")
    d = degrees(W)
    L = normalized_laplacian(W)
    res = sym_eig(L, k=min(3, n), which="smallest", seed=seed)
    v = fiedler_from_pairs(res.values, res.vectors, np.sqrt(d))
    return SpectralResult(split_eigenvector(v), v, res.values)


def spectral_cluster(X, kernel=None):
    """Exact two-cluster spectral clustering of the rows of X; returns 0/1 labels."""
    if kernel is None:
        kernel = KernelSpec.self_tuned()
    X = np.asarray(X, dtype=float)
    if kernel.K is not None and kernel.K > X.shape[0] - 1:
        raise ValueError(f"K={kernel.K} needs more than {X.shape[0]} points")
    return cluster_similarity(build_similarity(X, kernel)).labels
