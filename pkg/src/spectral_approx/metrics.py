"""Misclustering rate, eigenvector perturbation diagnostics and the two-proportion Z-test."""

import math
from dataclasses import astuple, dataclass, fields

import numpy as np
import scipy.sparse

from .exact import fiedler_from_pairs
from .linalg import sym_eig

__all__ = [
    "misclustering_rate",
    "PerturbationReport",
    "perturbation_report",
    "second_eigenvector",
    "normal_cdf",
    "ZTestResult",
    "two_prop_ztest",
]


def _binary(labels, name):
    a = np.asarray(labels)
    if a.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional")
    if a.size and not np.all((a == 0) | (a == 1)):
        raise ValueError(f"{name} must be a two-cluster labeling with values 0/1")
    return a.astype(bool)


def misclustering_rate(ref, test):
    """Fraction of points labeled differently, minimized over the two label permutations."""
    a = _binary(ref, "ref")
    b = _binary(test, "test")
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.size} vs {b.size}")
    if a.size == 0:
        raise ValueError("empty labelings")
    wrong = int(np.count_nonzero(a != b))
    return min(wrong, a.size - wrong) / a.size


@dataclass(frozen=True)
class PerturbationReport:
    """How far a perturbed Laplacian moves the clustering vector.

    ``eigengap`` is the distance between the second and third smallest
    eigenvalues of the unperturbed matrix (reported as a nonnegative number).
    """

    eigengap: float
    vec_dist: float
    frob_err: float
    spec_err: float
    rho: float

    @staticmethod
    def header():
        return [f.name for f in fields(PerturbationReport)]

    def row(self):
        return list(astuple(self))


def _dense(M):
    return M.toarray() if scipy.sparse.issparse(M) else np.asarray(M, dtype=float)


def second_eigenvector(L, sqrt_degrees=None, seed=0):
    """Eigenvalues (3 smallest) and the second eigenvector of a symmetric matrix.

    With ``sqrt_degrees`` the vector is taken orthogonal to the known
    bottom eigenvector, as in the clustering code.
    """
    n = L.shape[0]
    res = sym_eig(L, k=min(3, n), which="smallest", seed=seed)
    if sqrt_degrees is not None:
        return res.values, fiedler_from_pairs(res.values, res.vectors, np.asarray(sqrt_degrees, dtype=float))
    return res.values, res.vectors[:, 1].copy()


def perturbation_report(L, Ltilde, ref, test, degrees=None, degrees_tilde=None, seed=0):
    """Compare the second eigenvectors of L and its perturbation Ltilde.

    ``ref``/``test`` are the labelings obtained from each; ``degrees``
    (and ``degrees_tilde``) optionally pin the bottom eigenvector of a
    normalized Laplacian, which matters when its two smallest eigenvalues
    are nearly tied.
    """
    if L.shape != Ltilde.shape or L.shape[0] != L.shape[1]:
        raise ValueError("L and Ltilde must be square and of the same order")
    if L.shape[0] < 3:
        raise ValueError("need at least three vertices for an eigengap")
    sq = None if degrees is None else np.sqrt(degrees)
    sqt = None if degrees_tilde is None else np.sqrt(degrees_tilde)
    lam, v = second_eigenvector(L, sq, seed)
    _, vt = second_eigenvector(Ltilde, sqt, seed)
    vec_dist = min(float(np.linalg.norm(vt - v)), float(np.linalg.norm(vt + v)))
    E = _dense(Ltilde) - _dense(L)
    E = 0.5 * (E + E.T)
    frob = float(np.linalg.norm(E, "fro"))
    spec = float(np.max(np.abs(sym_eig(E, which="full").values))) if frob > 0 else 0.0
    return PerturbationReport(
        eigengap=float(lam[2] - lam[1]),
        vec_dist=vec_dist,
        frob_err=frob,
        spec_err=spec,
        rho=misclustering_rate(ref, test),
    )


def normal_cdf(z):
    """Standard normal CDF via the complementary error function (accurate in both tails)."""
    return 0.5 * math.erfc(-z / math.sqrt(2.0))


@dataclass(frozen=True)
class ZTestResult:
    z: float
    p_one_tailed: float
    direction: str
    degenerate: bool = False


def two_prop_ztest(successes1, total1, successes2, total2, direction="greater"):
    """Pooled two-proportion Z-test, one-tailed.

    ``direction="greater"`` tests whether group 1's proportion is larger than
    group 2's, ``"less"`` whether it is smaller. A pooled proportion of 0 or 1
    has no variance; the result is then p = 0.5 with ``degenerate`` set.
    """
    if direction not in ("greater", "less"):
        raise ValueError("direction must be 'greater' or 'less'")
    for s, t in ((successes1, total1), (successes2, total2)):
        if t < 1 or not 0 <= s <= t:
            raise ValueError(f"invalid counts {s}/{t}")
    p1 = successes1 / total1
    p2 = successes2 / total2
    pooled = (successes1 + successes2) / (total1 + total2)
    var = pooled * (1.0 - pooled) * (1.0 / total1 + 1.0 / total2)
    if var <= 0.0:
        return ZTestResult(z=0.0, p_one_tailed=0.5, direction=direction, degenerate=True)
    z = (p1 - p2) / math.sqrt(var)
    p = normal_cdf(-z) if direction == "greater" else normal_cdf(z)
    return ZTestResult(z=z, p_one_tailed=p, direction=direction)
