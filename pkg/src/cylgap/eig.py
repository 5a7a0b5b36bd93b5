"""Generalized symmetric eigensolver for the assembled pencils K u = lambda M u.

Shift-invert at sigma = 0 (K is positive definite on the constrained
space): small pencils go through a dense solve, larger ones through
ARPACK on the factored operator with a deterministic start vector.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg
from scipy import sparse
from scipy.sparse.linalg import ArpackError, ArpackNoConvergence, eigsh, splu

from .errors import FactorizationFailed, NoConvergence

DENSE_CUTOFF = 400
DEGENERACY_RTOL = 1e-8
DEFAULT_TOL = 1e-9
MAX_RESTARTS = 500


@dataclass
class EigenPair:
    """Eigenvalue with its M-normalized, sign-fixed coefficient vector."""

    value: float
    vector: np.ndarray
    residual: float
    next_gap: float = math.nan
    degenerate: bool = False


def _full(form):
    if hasattr(form, "full"):
        return form.full()
    return sparse.csr_matrix(form)


def rayleigh_quotient(K, M, u):
    Kf, Mf = _full(K), _full(M)
    u = np.asarray(u, dtype=float)
    return float((u @ (Kf @ u)) / (u @ (Mf @ u)))


def _residuals(Kf, Mf, vals, vecs):
    KV = Kf @ vecs
    MV = Mf @ vecs
    res = np.linalg.norm(KV - MV * vals[None, :], axis=0)
    den = np.linalg.norm(MV, axis=0)
    return res / np.where(den > 0, den, 1.0)


def _sign_fix(vec):
    i = int(np.argmax(np.abs(vec)))
    return vec if vec[i] >= 0 else -vec


def _normalize_columns(Mf, vecs):
    MV = Mf @ vecs
    norms = np.sqrt(np.einsum("ij,ij->j", vecs, MV))
    return vecs / norms[None, :]


def smallest_eigenpairs(K, M, count=1, tol=DEFAULT_TOL, seed=0,
                        maxiter=MAX_RESTARTS):
    """The ``count`` smallest eigenpairs of K u = lambda M u, ascending.

    Vectors are M-normalized, pairwise M-orthogonal, and the first vector
    is sign-fixed positive.  Residual ||Ku - lambda Mu|| / ||Mu|| is
    checked against ``tol``.
    """
    if count < 1 or count > 6:
        raise ValueError("count must be between 1 and 6")
    if tol < 1e-12:
        raise ValueError("tol must be at least 1e-12")
    Kf, Mf = _full(K), _full(M)
    n = Kf.shape[0]
    if Kf.shape != Mf.shape:
        raise ValueError("K and M dimensions differ")
    if count > n:
        raise ValueError(f"requested {count} pairs from a dimension-{n} pencil")
    want = min(count + 1, n)

    if n <= DENSE_CUTOFF or want >= n - 1:
        try:
            vals, vecs = scipy.linalg.eigh(
                Kf.toarray(), Mf.toarray(), subset_by_index=[0, want - 1])
        except (scipy.linalg.LinAlgError, np.linalg.LinAlgError) as exc:
            raise FactorizationFailed(f"dense factorization failed: {exc}")
    else:
        rng = np.random.default_rng(seed)
        v0 = rng.standard_normal(n)
        try:
            vals, vecs = eigsh(Kf, k=want, M=Mf, sigma=0.0, which="LM",
                               v0=v0, tol=0.0, maxiter=maxiter)
        except ArpackNoConvergence as exc:
            got = len(exc.eigenvalues)
            best = math.nan
            if got:
                best = float(
                    _residuals(Kf, Mf, exc.eigenvalues, exc.eigenvectors).min())
            raise NoConvergence(
                f"ARPACK converged {got}/{want} pairs", best_residual=best)
        except (ArpackError, RuntimeError) as exc:
            raise FactorizationFailed(f"shift-invert factorization failed: {exc}")

    order = np.argsort(vals)
    vals = np.asarray(vals, dtype=float)[order]
    vecs = np.asarray(vecs, dtype=float)[:, order]
    if vals[0] <= 0.0:
        raise FactorizationFailed(
            f"pencil is not positive definite (lambda_1 = {vals[0]:.3e}); "
            "assembly or boundary tagging bug")
    vecs = _normalize_columns(Mf, vecs)
    gram = vecs.T @ (Mf @ vecs)
    if np.abs(gram - np.eye(gram.shape[0])).max() > 10 * tol:
        # re-orthonormalize in the M inner product (gram is near identity)
        vecs = vecs @ np.linalg.inv(np.linalg.cholesky(gram).T)
        vals = np.einsum("ij,ij->j", vecs, Kf @ vecs)
    res = _residuals(Kf, Mf, vals, vecs)
    if np.any(res[:count] > tol):
        raise NoConvergence(
            f"residuals {res[:count]} exceed tol {tol}",
            best_residual=float(res[:count].max()))

    thresh = DEGENERACY_RTOL * max(abs(vals[0]), 1e-300)
    pairs = []
    for i in range(count):
        gap = float(vals[i + 1] - vals[i]) if i + 1 < len(vals) else math.nan
        vec = _sign_fix(vecs[:, i]) if i == 0 else vecs[:, i]
        pairs.append(EigenPair(float(vals[i]), vec, float(res[i]), gap))
    for i in range(len(pairs) - 1):
        if pairs[i].next_gap < thresh:
            pairs[i].degenerate = True
            pairs[i + 1].degenerate = True
    return pairs


def second_eigenpair_constrained(K, M, u1, tol=DEFAULT_TOL, seed=0,
                                 maxiter=MAX_RESTARTS):
    """Minimizer of the Rayleigh quotient M-orthogonal to ``u1``.

    Deflated subspace iteration on the shift-inverted operator: the
    factored K applies K^-1 M, and the iterate block is projected off
    u1 in the M inner product every step.
    """
    if u1.residual > tol:
        raise ValueError("u1 must be converged to the requested tolerance")
    Kf, Mf = _full(K), _full(M)
    n = Kf.shape[0]
    if n < 2:
        raise ValueError("pencil too small for a second pair")
    try:
        lu = splu(Kf.tocsc())
    except RuntimeError as exc:
        raise FactorizationFailed(f"sparse factorization failed: {exc}")

    u = u1.vector / math.sqrt(float(u1.vector @ (Mf @ u1.vector)))
    Mu = Mf @ u
    rng = np.random.default_rng(seed)
    block = min(3, n - 1)
    V = rng.standard_normal((n, block))

    def project(W):
        return W - np.outer(u, Mu @ W)

    best_res = math.inf
    best = None
    V = project(V)
    for _ in range(maxiter):
        V = lu.solve(Mf @ V)
        V = project(V)
        # Rayleigh-Ritz on the block
        Km = V.T @ (Kf @ V)
        Mm = V.T @ (Mf @ V)
        try:
            theta, S = scipy.linalg.eigh(Km, Mm)
        except (scipy.linalg.LinAlgError, np.linalg.LinAlgError):
            V = project(rng.standard_normal((n, block)))
            continue
        V = V @ S
        V = _normalize_columns(Mf, V)
        val = float(theta[0])
        vec = V[:, 0]
        r = float(np.linalg.norm(Kf @ vec - val * (Mf @ vec))
                  / np.linalg.norm(Mf @ vec))
        if r < best_res:
            best_res = r
            best = (val, vec.copy(), r,
                    float(theta[1] - theta[0]) if block > 1 else math.nan)
        if r <= tol:
            val, vec, r, gap = best
            return EigenPair(val, _sign_fix(vec), r, gap)
    raise NoConvergence(
        f"deflated iteration stalled at residual {best_res:.3e}",
        best_residual=best_res)
