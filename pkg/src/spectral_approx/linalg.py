"""Symmetric eigensolvers and the small matrix helpers shared by the clustering code.

Dense matrices are plain ``numpy.ndarray``; sparse matrices are any
``scipy.sparse`` matrix holding the full (both triangles) symmetric pattern.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse
from scipy.linalg import lapack

__all__ = [
    "ConvergenceError",
    "NotPSDError",
    "EigenResult",
    "sym_eig",
    "psd_inv_sqrt",
    "canonical_sign",
    "gershgorin_upper",
    "frobenius_norm",
    "DENSE_FILL_THRESHOLD",
]

# fill ratio above which a symmetric matrix is kept dense
DENSE_FILL_THRESHOLD = 0.25

_SIGN_EPS = 1e-12
_SYM_RTOL = 1e-12


class ConvergenceError(RuntimeError):
    """An iterative eigensolver hit its iteration cap.

    ``iterations`` is the number of sweeps/restarts performed and
    ``residual`` the best residual norm seen (``nan`` when unknown).
    """

    def __init__(self, msg, iterations, residual=float("nan")):
        super().__init__(f"{msg} (iterations={iterations}, best residual={residual:.3e})")
        self.iterations = iterations
        self.residual = residual


class NotPSDError(ValueError):
    """A matrix expected to be positive semidefinite has a clearly negative eigenvalue."""


@dataclass(frozen=True)
class EigenResult:
    """Eigenpairs in ascending eigenvalue order.

    ``vectors[:, i]`` pairs with ``values[i]``; ``residuals[i]`` is
    ``||M v_i - values[i] v_i||_2`` measured against the input matrix.
    """

    values: np.ndarray
    vectors: np.ndarray
    residuals: np.ndarray

    def __len__(self):
        return len(self.values)


def frobenius_norm(M):
    if scipy.sparse.issparse(M):
        return float(scipy.sparse.linalg.norm(M, "fro"))
    return float(np.linalg.norm(M, "fro"))


def gershgorin_upper(M):
    """Upper bound on the spectrum of symmetric ``M``: max_i (M_ii + sum_{j!=i} |M_ij|)."""
    if scipy.sparse.issparse(M):
        M = scipy.sparse.csr_matrix(M)
        diag = M.diagonal()
        absrow = np.asarray(abs(M).sum(axis=1)).ravel()
    else:
        diag = np.diag(M)
        absrow = np.abs(M).sum(axis=1)
    return float(np.max(diag + absrow - np.abs(diag)))


def canonical_sign(V):
    """Flip columns so the first entry with magnitude > 1e-12 is positive (in place)."""
    V = np.atleast_2d(V)
    for j in range(V.shape[1]):
        nz = np.flatnonzero(np.abs(V[:, j]) > _SIGN_EPS)
        if nz.size and V[nz[0], j] < 0:
            V[:, j] *= -1.0
    return V


def _check_symmetric(M):
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {M.shape}")
    if M.shape[0] < 1:
        raise ValueError("matrix order must be at least 1")
    if scipy.sparse.issparse(M):
        asym = abs(M - M.T).max() if M.nnz else 0.0
    else:
        if not np.all(np.isfinite(M)):
            raise ValueError("matrix has non-finite entries")
        asym = np.max(np.abs(M - M.T))
    scale = max(frobenius_norm(M), 1.0)
    if asym > _SYM_RTOL * scale:
        raise ValueError(f"matrix is not symmetric (max asymmetry {asym:.3e})")


def _residuals(M, values, vectors):
    MV = M @ vectors
    return np.linalg.norm(np.asarray(MV) - vectors * values, axis=0)


def _finish(M, values, vectors):
    vectors = canonical_sign(np.ascontiguousarray(vectors, dtype=float))
    return EigenResult(
        values=np.asarray(values, dtype=float),
        vectors=vectors,
        residuals=_residuals(M, values, vectors),
    )


def sym_eig(M, k=None, which="smallest", *, seed=0, tol=1e-10, max_restarts=300, basis_size=None):
    """Eigenpairs of a real symmetric matrix.

    Parameters
    ----------
    M : ndarray or scipy.sparse matrix
        Symmetric input. Dense input goes through Householder
        tridiagonalization and implicit-shift QL; sparse input through a
        restarted block Lanczos iteration with full reorthogonalization.
    k : int
        Number of eigenpairs (ignored for ``which="full"``).
    which : {"smallest", "largest", "full"}
    seed : int
        Seeds the Lanczos starting block; the dense path is deterministic.
    tol : float
        Lanczos stopping rule: residual <= tol * (1 + |lambda|) * ||M||_F.
    max_restarts : int
        Lanczos restart cap.

    Returns
    -------
    EigenResult with eigenvalues ascending, canonical signs applied.
    """
    if which not in ("smallest", "largest", "full"):
        raise ValueError(f"unknown which={which!r}")
    sparse = scipy.sparse.issparse(M)
    if not sparse:
        M = np.asarray(M, dtype=float)
    _check_symmetric(M)
    n = M.shape[0]
    if which == "full":
        if sparse:
            raise ValueError("which='full' is only supported for dense matrices")
        k = n
    if k is None:
        raise ValueError("k is required unless which='full'")
    k = int(k)
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= n, got k={k}, n={n}")

    if sparse:
        return _lanczos_eig(scipy.sparse.csr_matrix(M, dtype=float), k, which, seed, tol, max_restarts, basis_size)
    return _dense_eig(M, k, which)


def _dense_eig(M, k, which):
    n = M.shape[0]
    if k == n or 3 * k >= n or n <= 64:
        values, vectors = _dense_full(M)
        if which == "largest":
            values, vectors = values[n - k:], vectors[:, n - k:]
        else:
            values, vectors = values[:k], vectors[:, :k]
        return _finish(M, values, vectors)
    return _finish(M, *_dense_subset(M, k, which))


def _dense_full(M):
    # dsyev: Householder tridiagonalization + implicit QL/QR, 30n sweep cap
    try:
        return scipy.linalg.eigh(M, driver="ev", check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceError(f"QL iteration failed: {exc}", iterations=30 * M.shape[0]) from exc


def _dense_subset(M, k, which):
    """A few extreme eigenpairs: tridiagonalize, QL for all values, inverse iteration for k vectors."""
    n = M.shape[0]
    c, d, e, tau, info = lapack.dsytrd(M, lower=1)
    if info != 0:
        raise ValueError(f"dsytrd failed with info={info}")
    values, info = lapack.dsterf(d.copy(), e.copy())
    if info > 0:
        raise ConvergenceError("QL iteration failed to converge", iterations=30 * n)
    sel = values[:k] if which == "smallest" else values[n - k:]
    iblock = np.ones(n, dtype=np.int32)
    isplit = np.zeros(n, dtype=np.int32)
    isplit[0] = n
    z, info = lapack.dstein(d, e, sel, iblock, isplit)
    if info != 0:
        # inverse iteration trouble (tight clusters): fall back to the full decomposition
        values, vectors = _dense_full(M)
        return (values[:k], vectors[:, :k]) if which == "smallest" else (values[n - k:], vectors[:, n - k:])
    z = np.array(z[:, :k], dtype=float)
    # back-transform with the stored reflectors H(i) = I - tau v v^T
    for i in range(n - 2, -1, -1):
        if tau[i] == 0.0:
            continue
        v = np.empty(n - i - 1)
        v[0] = 1.0
        v[1:] = c[i + 2:, i]
        z[i + 1:] -= tau[i] * np.outer(v, v @ z[i + 1:])
    return sel, z


def _orthonormalize_block(W, V, rng, drop_tol=1e-10):
    """Orthonormalize columns of W against V and each other (two passes of classical Gram-Schmidt)."""
    n, b = W.shape
    out = np.empty_like(W)
    for j in range(b):
        w = W[:, j].copy()
        ref = np.linalg.norm(w)
        for attempt in range(3):
            for _ in range(2):
                if V.shape[1]:
                    w -= V @ (V.T @ w)
                if j:
                    w -= out[:, :j] @ (out[:, :j].T @ w)
            nrm = np.linalg.norm(w)
            if ref > 0 and nrm > drop_tol * ref:
                break
            # breakdown: the Krylov space is (numerically) invariant, continue with a fresh direction
            w = rng.standard_normal(n)
            ref = np.linalg.norm(w)
        out[:, j] = w / nrm
    return out


def _lanczos_eig(M, k, which, seed, tol, max_restarts, basis_size):
    n = M.shape[0]
    block = k
    if basis_size is None:
        basis_size = max(80, 10 * k)
    p = min(basis_size, n - block)
    p -= p % block
    if p < 2 * block + k:
        # space too small for a meaningful Krylov iteration; solve directly
        return _dense_eig(M.toarray(), k, which)

    normF = frobenius_norm(M)
    if which == "smallest":
        shift = gershgorin_upper(M)

        def apply(X):
            return shift * X - M @ X

        def to_lambda(theta):
            return shift - theta
    else:
        def apply(X):
            return M @ X

        def to_lambda(theta):
            return theta

    rng = np.random.default_rng(seed)
    V = np.empty((n, p + block))
    AV = np.empty((n, p))
    V[:, :block] = _orthonormalize_block(rng.standard_normal((n, block)), V[:, :0], rng)
    j = 0  # columns of V with A V computed
    keep = min(p - block, max(k + block, p // 2))
    keep = p - block * -(-(p - keep) // block)  # expansion must land exactly on p
    best = np.inf
    for restart in range(1, max_restarts + 1):
        while j < p:
            AV[:, j:j + block] = apply(V[:, j:j + block])
            m = j + block
            V[:, m:m + block] = _orthonormalize_block(AV[:, j:j + block], V[:, :m], rng)
            j = m
        H = V[:, :p].T @ AV
        H = 0.5 * (H + H.T)
        theta, S = np.linalg.eigh(H)
        order = np.argsort(theta)[::-1]
        theta, S = theta[order], S[:, order]
        Y = V[:, :p] @ S[:, :k]
        R = AV @ S[:, :k] - Y * theta[:k]
        res = np.linalg.norm(R, axis=0)
        lam = to_lambda(theta[:k])
        limit = tol * (1.0 + np.abs(lam)) * max(normF, 1e-300)
        best = min(best, float(res.max()))
        if np.all(res <= limit):
            values, vectors = lam, Y
            order = np.argsort(values)
            return _finish(M, values[order], vectors[:, order])
        # thick restart: keep the leading Ritz vectors plus the newest block
        newest = V[:, p:p + block].copy()
        V[:, :keep] = V[:, :p] @ S[:, :keep]
        AV[:, :keep] = AV @ S[:, :keep]
        V[:, keep:keep + block] = _orthonormalize_block(newest, V[:, :keep], rng)
        j = keep
    raise ConvergenceError("Lanczos iteration did not converge", iterations=max_restarts, residual=best)


def psd_inv_sqrt(M, tol=1e-12):
    """Pseudo-inverse square root of a numerically PSD symmetric matrix.

    Eigenvalues above ``tol * lambda_max`` map to ``lambda**-0.5``, the rest to 0,
    so ``S @ M @ S`` is the orthogonal projector onto the retained range.
    Raises NotPSDError when some eigenvalue is below ``-tol * ||M||_F``.
    """
    M = np.asarray(M, dtype=float)
    res = sym_eig(M, which="full")
    lam, U = res.values, res.vectors
    normF = frobenius_norm(M)
    if lam[0] < -tol * normF:
        raise NotPSDError(
            f"matrix is not positive semidefinite (min eigenvalue {lam[0]:.3e}, "
            f"threshold {-tol * normF:.3e}); use a PSD kernel"
        )
    cutoff = tol * max(lam[-1], 0.0)
    f = np.zeros_like(lam)
    keep = lam > cutoff
    f[keep] = lam[keep] ** -0.5
    S = (U * f) @ U.T
    return 0.5 * (S + S.T)
