"""Gaussian similarity matrices, degrees, normalized Laplacians and the Ncut objective."""

from dataclasses import dataclass

import numpy as np
import scipy.sparse
from scipy.spatial import cKDTree

__all__ = [
    "KernelSpec",
    "ZeroDegreeError",
    "sq_dists",
    "local_scales",
    "scale_floor",
    "prepare_kernel",
    "kernel_block",
    "kernel_pairs",
    "build_similarity",
    "degrees",
    "degree_matrix",
    "normalized_laplacian",
    "ncut",
]

KERNEL_KINDS = ("fixed-sigma", "self-tuned", "psd-self-tuned")
SCALING_CONVENTIONS = ("product", "product_squared")
DEFAULT_K = 7


class ZeroDegreeError(ValueError):
    """A vertex has zero total similarity."""


@dataclass(frozen=True)
class KernelSpec:
    """How pairwise similarities are computed.

    Use the constructors :meth:`fixed`, :meth:`self_tuned` and
    :meth:`psd_self_tuned`; each kind carries only its own parameters.
    """

    kind: str
    sigma: float | None = None
    K: int | None = None
    c: float | None = None
    scaling_convention: str | None = None

    def __post_init__(self):
        if self.kind not in KERNEL_KINDS:
            raise ValueError(f"unknown kernel kind {self.kind!r}")
        wanted = {
            "fixed-sigma": {"sigma"},
            "self-tuned": {"K", "scaling_convention"},
            "psd-self-tuned": {"K", "c"},
        }[self.kind]
        given = {name for name in ("sigma", "K", "c", "scaling_convention") if getattr(self, name) is not None}
        if given != wanted:
            raise ValueError(f"{self.kind} kernel takes exactly {sorted(wanted)}, got {sorted(given)}")
        if self.sigma is not None and not self.sigma > 0:
            raise ValueError("sigma must be positive")
        if self.c is not None and not self.c > 0:
            raise ValueError("c must be positive")
        if self.K is not None and self.K < 1:
            raise ValueError("K must be >= 1")
        if self.scaling_convention is not None and self.scaling_convention not in SCALING_CONVENTIONS:
            raise ValueError(f"scaling_convention must be one of {SCALING_CONVENTIONS}")

    @classmethod
    def fixed(cls, sigma=1.0):
        return cls("fixed-sigma", sigma=float(sigma))

    @classmethod
    def self_tuned(cls, K=DEFAULT_K, scaling_convention="product"):
        return cls("self-tuned", K=int(K), scaling_convention=scaling_convention)

    @classmethod
    def psd_self_tuned(cls, K=DEFAULT_K, c=1.0):
        return cls("psd-self-tuned", K=int(K), c=float(c))

    @property
    def is_psd(self):
        """Whether the kernel is guaranteed to give a PSD similarity matrix."""
        return self.kind != "self-tuned"

    def with_neighbors(self, K):
        """Same kernel with the neighbor index replaced (no-op for fixed sigma)."""
        if self.K is None:
            return self
        if self.kind == "self-tuned":
            return KernelSpec.self_tuned(K, self.scaling_convention)
        return KernelSpec.psd_self_tuned(K, self.c)

    def describe(self):
        if self.kind == "fixed-sigma":
            return f"fixed-sigma(sigma={self.sigma:g})"
        if self.kind == "self-tuned":
            return f"self-tuned(K={self.K},{self.scaling_convention})"
        return f"psd-self-tuned(K={self.K},c={self.c:g})"


def sq_dists(A, B=None):
    """Squared Euclidean distances accumulated coordinate by coordinate.

    Uses explicit differences (no ``|a|^2 + |b|^2 - 2ab`` expansion), so
    identical points give exactly 0 and the result is bitwise symmetric.
    """
    A = np.asarray(A, dtype=float)
    B = A if B is None else np.asarray(B, dtype=float)
    out = np.zeros((A.shape[0], B.shape[0]))
    for j in range(A.shape[1]):
        diff = A[:, j, None] - B[None, :, j]
        out += diff * diff
    return out


def _pair_sq_dists(X, rows, cols):
    out = np.zeros(len(rows))
    for j in range(X.shape[1]):
        diff = X[rows, j] - X[cols, j]
        out += diff * diff
    return out


def scale_floor(X):
    """Lower bound for local scales: 1e-8 times the bounding-box diagonal."""
    X = np.asarray(X, dtype=float)
    diam = float(np.linalg.norm(X.max(axis=0) - X.min(axis=0))) if len(X) else 0.0
    return 1e-8 * (diam if diam > 0 else 1.0)


def local_scales(X, K=DEFAULT_K):
    """Distance from each point to its K-th nearest neighbor (self excluded), floored."""
    X = np.asarray(X, dtype=float)
    n = X.shape[0]
    if not 1 <= K <= n - 1:
        raise ValueError(f"need 1 <= K <= n-1, got K={K}, n={n}")
    dist, _ = cKDTree(X).query(X, k=K + 1)
    nu = np.asarray(dist)[:, K].astype(float)
    return np.maximum(nu, scale_floor(X))


def _check_finite(X):
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ValueError("data must be an n x d array")
    if not np.all(np.isfinite(X)):
        raise ValueError("data contains non-finite values")
    return X


@dataclass(frozen=True)
class PreparedKernel:
    """Kernel bound to a dataset: the coordinates distances are taken in, plus per-point scales."""

    kernel: KernelSpec
    points: np.ndarray
    scales: np.ndarray | None

    def _apply(self, d2, si, sj):
        k = self.kernel
        if k.kind == "fixed-sigma":
            return np.exp(-d2 / (k.sigma * k.sigma))
        if k.kind == "psd-self-tuned":
            return np.exp(-d2 / k.c)
        denom = si * sj
        if k.scaling_convention == "product_squared":
            denom = denom * denom
        return np.exp(-d2 / denom)

    def block(self, rows, cols):
        rows = np.asarray(rows)
        cols = np.asarray(cols)
        d2 = sq_dists(self.points[rows], self.points[cols])
        if self.scales is None:
            return self._apply(d2, None, None)
        return self._apply(d2, self.scales[rows, None], self.scales[None, cols])

    def pairs(self, rows, cols):
        d2 = _pair_sq_dists(self.points, rows, cols)
        if self.scales is None:
            return self._apply(d2, None, None)
        return self._apply(d2, self.scales[rows], self.scales[cols])


def prepare_kernel(X, kernel):
    """Bind ``kernel`` to data ``X`` (computes local scales when the kernel needs them)."""
    X = _check_finite(X)
    if kernel.kind == "fixed-sigma":
        return PreparedKernel(kernel, X, None)
    nu = local_scales(X, kernel.K)
    if kernel.kind == "psd-self-tuned":
        return PreparedKernel(kernel, X / nu[:, None], None)
    return PreparedKernel(kernel, X, nu)


def kernel_block(X, rows, cols, kernel):
    """Similarity sub-block W[rows][:, cols] without forming the full matrix."""
    return prepare_kernel(X, kernel).block(rows, cols)


def kernel_pairs(X, rows, cols, kernel):
    """Similarities W[rows[t], cols[t]] for paired index arrays."""
    return prepare_kernel(X, kernel).pairs(np.asarray(rows), np.asarray(cols))


def build_similarity(X, kernel):
    """Dense n x n similarity matrix with unit diagonal, bitwise symmetric."""
    X = _check_finite(X)
    if X.shape[0] < 2:
        raise ValueError("need at least two points")
    idx = np.arange(X.shape[0])
    W = prepare_kernel(X, kernel).block(idx, idx)
    np.fill_diagonal(W, 1.0)
    return W


def degrees(W):
    """Row sums of W as a vector; raises ZeroDegreeError on an isolated vertex."""
    if scipy.sparse.issparse(W):
        d = np.asarray(W.sum(axis=1)).ravel()
        negative = W.nnz and W.data.min() < 0
    else:
        W = np.asarray(W, dtype=float)
        d = W.sum(axis=1)
        negative = W.min() < 0
    if negative:
        raise ValueError("similarity matrix has negative entries")
    if np.any(d <= 0):
        raise ZeroDegreeError(f"{int(np.sum(d <= 0))} vertex/vertices with zero degree")
    return d


def degree_matrix(W):
    """Diagonal degree matrix D_ii = sum_j W_ij (sparse diagonal for sparse W)."""
    d = degrees(W)
    if scipy.sparse.issparse(W):
        return scipy.sparse.diags(d, format="csr")
    return np.diag(d)


def normalized_laplacian(W):
    """L = D^-1/2 (D - W) D^-1/2, keeping the storage format of W."""
    d = degrees(W)
    if scipy.sparse.issparse(W):
        W = scipy.sparse.coo_matrix(W)
        r, c = W.row, W.col
        data = -W.data / np.sqrt(d[r] * d[c])
        on_diag = r == c
        data[on_diag] += 1.0
        n = W.shape[0]
        missing = np.setdiff1d(np.arange(n), r[on_diag])
        r = np.concatenate([r, missing])
        c = np.concatenate([c, missing])
        data = np.concatenate([data, np.ones(len(missing))])
        return scipy.sparse.csr_matrix((data, (r, c)), shape=W.shape)
    W = np.asarray(W, dtype=float)
    L = -W / np.sqrt(np.outer(d, d))
    L[np.diag_indices_from(L)] += 1.0
    return L


def ncut(W, labels):
    """Normalized cut of the two-way partition ``labels`` (0/1) of graph W."""
    labels = np.asarray(labels)
    uniq = np.unique(labels)
    if uniq.size != 2:
        raise ValueError("ncut needs exactly two nonempty clusters")
    A = labels == uniq[0]
    B = ~A
    if scipy.sparse.issparse(W):
        W = scipy.sparse.csr_matrix(W)
        rowsum = np.asarray(W.sum(axis=1)).ravel()
        cut = float(W[A][:, B].sum())
    else:
        W = np.asarray(W, dtype=float)
        rowsum = W.sum(axis=1)
        cut = float(W[np.ix_(A, B)].sum())
    assoc_a = float(rowsum[A].sum())
    assoc_b = float(rowsum[B].sum())
    if assoc_a <= 0 or assoc_b <= 0:
        raise ValueError("ncut undefined: a cluster has zero association")
    return cut / assoc_a + cut / assoc_b
