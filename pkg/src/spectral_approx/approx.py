"""Approximate two-cluster spectral clustering.

Four ways of avoiding the full n x n eigenproblem:

* :func:`fast_sc` -- cluster k-means representatives, then map points to them;
* :func:`espec` -- cluster a uniform sample, extend by nearest-neighbor vote;
* :func:`nystrom_sc` -- low-rank Nystrom extension from landmark columns;
* :func:`budget_sc` -- spectral clustering of a randomly sparsified W.
"""

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse
from scipy.spatial import cKDTree

from .exact import cluster_similarity, fiedler_from_pairs, kmeans, spectral_cluster, split_eigenvector
from .linalg import DENSE_FILL_THRESHOLD, psd_inv_sqrt, sym_eig
from .similarity import KernelSpec, ZeroDegreeError, prepare_kernel

__all__ = [
    "SampleSpec",
    "NystromFactors",
    "fast_sc",
    "espec",
    "nystrom_decompose",
    "nystrom_factors",
    "nystrom_sc",
    "pair_count",
    "budget_from_fraction",
    "sample_pairs",
    "budget_matrix",
    "budget_sc",
]


@dataclass(frozen=True)
class SampleSpec:
    """Uniform sampling without replacement of ``ceil(fraction * n)`` points."""

    fraction: float
    seed: int = 0
    mode: str = "uniform"

    def __post_init__(self):
        if not 0 < self.fraction <= 1:
            raise ValueError(f"sample fraction must be in (0, 1], got {self.fraction}")
        if self.mode != "uniform":
            raise ValueError("only uniform sampling without replacement is supported")

    def size(self, n):
        # the small slack keeps e.g. 0.15 * 200 from rounding up to 31
        m = min(n, math.ceil(self.fraction * n - 1e-9))
        if m < 2:
            raise ValueError(f"sample of {self.fraction:g} x {n} points has fewer than 2 points")
        return m

    def draw(self, n):
        """Sorted sample indices."""
        rng = np.random.default_rng(self.seed)
        return np.sort(rng.choice(n, size=self.size(n), replace=False))


def _kernel_for_subset(kernel, m):
    # neighbor-based kernels cannot look past the subset
    if kernel.K is not None and kernel.K > m - 1:
        return kernel.with_neighbors(m - 1)
    return kernel


def fast_sc(X, k, T=100, kernel=None, seed=0):
    """Spectral clustering of k-means representatives.

    Each point takes the label of its nearest centroid; centroids are
    ordered by the first point that maps to them, so with k = n distinct
    points the representatives are exactly the data in their original order.
    """
    X = np.asarray(X, dtype=float)
    kernel = kernel or KernelSpec.self_tuned()
    n = X.shape[0]
    if not 2 <= k <= n:
        raise ValueError(f"need 2 <= k <= n, got k={k}, n={n}")
    km = kmeans(X, k, T=T, seed=seed)
    # correspondence table: nearest centroid of every point
    tree = cKDTree(km.centroids)
    _, nearest = tree.query(X)
    # collapse coincident centroids and drop ones no point maps to
    _, first, inverse = np.unique(km.centroids[nearest], axis=0, return_index=True, return_inverse=True)
    inverse = inverse.ravel()
    order = np.argsort(first, kind="stable")
    rank = np.empty_like(order)
    rank[order] = np.arange(order.size)
    owner = rank[inverse]
    reps = km.centroids[nearest[first[order]]]
    if reps.shape[0] < 2:
        raise ValueError("k-means produced fewer than 2 distinct representatives")
    rep_labels = spectral_cluster(reps, _kernel_for_subset(kernel, reps.shape[0]))
    return rep_labels[owner]


def espec(X, sample, m=1, kernel=None):
    """Cluster a uniform sample exactly, then label every other point by a vote of its m nearest sample points."""
    X = np.asarray(X, dtype=float)
    kernel = kernel or KernelSpec.self_tuned()
    n = X.shape[0]
    S = sample.draw(n)
    if not 1 <= m <= S.size:
        raise ValueError(f"need 1 <= m <= sample size ({S.size}), got m={m}")
    labels = np.empty(n, dtype=int)
    labels[S] = spectral_cluster(X[S], _kernel_for_subset(kernel, S.size))
    rest = np.setdiff1d(np.arange(n), S, assume_unique=True)
    if rest.size:
        _, nb = cKDTree(X[S]).query(X[rest], k=m)
        nb = np.asarray(nb).reshape(rest.size, m)
        votes = labels[S][nb]
        ones = votes.sum(axis=1)
        out = (2 * ones > m).astype(int)
        tie = 2 * ones == m
        out[tie] = votes[tie, 0]
        labels[rest] = out
    return labels


@dataclass
class NystromFactors:
    """Landmark-first Nystrom factors.

    Rows of ``Wm`` are ordered with the m landmarks first, so ``W11`` is its
    leading m x m block. ``U``/``Lam`` diagonalize Q and ``V`` holds the
    orthogonalized approximate eigenvectors (columns ordered by descending
    ``Lam``). When degree normalization was applied, ``degrees`` holds the
    row sums of the implicit reconstruction.
    """

    W11: np.ndarray
    Wm: np.ndarray
    U: np.ndarray
    Lam: np.ndarray
    V: np.ndarray
    S: np.ndarray
    degrees: np.ndarray | None = None

    def reconstruct(self):
        """Wm W11^+ Wm^T (dense n x n; for checking small cases)."""
        A = self.Wm @ self.S
        return A @ A.T


def nystrom_decompose(Wm, m, normalize=False, tol=1e-12):
    """Nystrom factors from the n x m landmark block (landmarks as the first m rows).

    With ``normalize`` the block is first scaled to D^-1/2 W D^-1/2, using the
    degrees of the reconstruction, computed without forming it.
    """
    Wm = np.asarray(Wm, dtype=float)
    n = Wm.shape[0]
    if Wm.shape[1] != m or not 1 <= m <= n:
        raise ValueError("Wm must be n x m with 1 <= m <= n")
    d = None
    if normalize:
        S = psd_inv_sqrt(Wm[:m], tol)
        d = Wm @ (S @ (S @ Wm.sum(axis=0)))
        if np.any(d <= 0):
            raise ZeroDegreeError(f"{int(np.sum(d <= 0))} nonpositive approximate degree(s)")
        r = 1.0 / np.sqrt(d)
        Wm = Wm * r[:, None] * r[None, :m]
    W11 = 0.5 * (Wm[:m] + Wm[:m].T)
    W21 = Wm[m:]
    S = psd_inv_sqrt(W11, tol)
    Q = W11 + S @ (W21.T @ W21) @ S
    eig = sym_eig(0.5 * (Q + Q.T), which="full")
    lam, U = eig.values[::-1], eig.vectors[:, ::-1]
    inv = np.zeros_like(lam)
    pos = lam > tol * max(lam[0], 0.0)
    inv[pos] = lam[pos] ** -0.5
    V = Wm @ S @ U * inv
    return NystromFactors(W11=W11, Wm=Wm, U=U, Lam=lam, V=V, S=S, degrees=d)


def _check_psd_kernel(kernel):
    if not kernel.is_psd:
        raise ValueError(
            f"Nystrom needs a PSD kernel, got {kernel.describe()}; use fixed-sigma or psd-self-tuned"
        )


def nystrom_factors(X, landmarks, kernel, normalize=True):
    """Factors for data X with the given landmark indices (moved to the front)."""
    _check_psd_kernel(kernel)
    X = np.asarray(X, dtype=float)
    n = X.shape[0]
    landmarks = np.asarray(landmarks)
    perm = np.concatenate([landmarks, np.setdiff1d(np.arange(n), landmarks)])
    Wm = prepare_kernel(X, kernel).block(perm, landmarks)
    Wm[np.arange(landmarks.size), np.arange(landmarks.size)] = 1.0
    return nystrom_decompose(Wm, landmarks.size, normalize=normalize), perm


def nystrom_sc(X, sample, kernel=None):
    """Two-way clustering from the Nystrom approximation of the normalized similarity."""
    kernel = kernel or KernelSpec.fixed(1.0)
    _check_psd_kernel(kernel)
    X = np.asarray(X, dtype=float)
    n = X.shape[0]
    landmarks = sample.draw(n)
    f, perm = nystrom_factors(X, landmarks, kernel, normalize=True)
    # top eigenvectors of the normalized similarity = bottom of the Laplacian
    V = f.V[:, :2]
    norms = np.linalg.norm(V, axis=0)
    if np.any(norms == 0):
        raise ValueError("Nystrom approximation has rank < 2")
    v = fiedler_from_pairs(f.Lam[:2], V / norms, np.sqrt(f.degrees))
    out = np.empty(n, dtype=int)
    out[perm] = split_eigenvector(v)
    return out


def pair_count(n):
    return n * (n - 1) // 2


def budget_from_fraction(n, fraction):
    """Number of off-diagonal pairs making up ``fraction`` of all n(n-1)/2."""
    if not 0 < fraction <= 1:
        raise ValueError(f"budget fraction must be in (0, 1], got {fraction}")
    return max(1, min(pair_count(n), math.ceil(fraction * pair_count(n) - 1e-9)))


def sample_pairs(n, b, seed=0):
    """b distinct pairs (i < j), uniform without replacement, sorted row-major.

    Floyd's algorithm over the linear index of the strict upper triangle.
    """
    N = pair_count(n)
    if not 1 <= b <= N:
        raise ValueError(f"budget must be in [1, {N}], got {b}")
    rng = np.random.default_rng(seed)
    if b == N:
        t = np.arange(N)
    else:
        chosen = set()
        draws = rng.integers(0, np.arange(N - b, N) + 1)
        for j, r in zip(range(N - b, N), draws.tolist()):
            chosen.add(j if r in chosen else r)
        t = np.fromiter(chosen, dtype=np.int64, count=b)
        t.sort()
    # row i starts at offset i*n - i*(i+1)/2
    rows_all = np.arange(n - 1)
    start = rows_all * n - rows_all * (rows_all + 1) // 2
    i = np.searchsorted(start, t, side="right") - 1
    j = t - start[i] + i + 1
    return i, j


def budget_matrix(X, b, kernel, seed=0):
    """Sparsified similarity: b random off-diagonal entries (mirrored) and constant diagonal 2b/(n(n-1)).

    Stored dense when more than a quarter of the entries are structurally
    nonzero, else CSR (explicit zeros from underflow are kept).
    """
    X = np.asarray(X, dtype=float)
    n = X.shape[0]
    i, j = sample_pairs(n, b, seed)
    w = prepare_kernel(X, kernel).pairs(i, j)
    diag = 2.0 * b / (n * (n - 1))
    nnz = 2 * b + n
    if nnz > DENSE_FILL_THRESHOLD * n * n:
        W = np.zeros((n, n))
        W[i, j] = w
        W[j, i] = w
        W[np.diag_indices(n)] = diag
        return W
    rows = np.concatenate([i, j, np.arange(n)])
    cols = np.concatenate([j, i, np.arange(n)])
    data = np.concatenate([w, w, np.full(n, diag)])
    order = np.lexsort((cols, rows))
    indptr = np.concatenate([[0], np.cumsum(np.bincount(rows, minlength=n))])
    return scipy.sparse.csr_matrix((data[order], cols[order], indptr), shape=(n, n))


def budget_sc(X, b, kernel=None, seed=0):
    """Spectral clustering of the budget-sparsified similarity matrix."""
    kernel = kernel or KernelSpec.fixed(1.0)
    W = budget_matrix(X, b, kernel, seed)
    return cluster_similarity(W, seed=seed).labels
