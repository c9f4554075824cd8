"""Flat embedding from the generalized eigenproblem ``L y = lambda D y``."""

from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import ConfigError, GraphError, NumericError
from .graph import laplacian

SMALLEST = "smallest"
LARGEST = "largest"
DENSE_LIMIT = 5000
RESIDUAL_TOL = 1e-8


@dataclass(frozen=True)
class Embedding:
    y: np.ndarray
    eigenvalues: np.ndarray
    mode: str
    residuals: np.ndarray

    @property
    def k(self):
        return self.y.shape[1]


def _check_mode(mode):
    mode = str(mode).lower()
    if mode not in (SMALLEST, LARGEST):
        raise ConfigError(f"eigen mode must be 'smallest' or 'largest', got {mode!r}")
    return mode


def _fix_signs(vecs):
    # first component that is clearly nonzero is made positive
    scale = np.abs(vecs).max(axis=0)
    for c in range(vecs.shape[1]):
        nz = np.flatnonzero(np.abs(vecs[:, c]) > 1e-10 * scale[c])
        if nz.size and vecs[nz[0], c] < 0:
            vecs[:, c] = -vecs[:, c]
    return vecs


def generalized_residuals(lp, y, eigenvalues):
    """``max |L y_c - lambda_c D y_c| / max |y_c|`` for every column."""
    res = lp.l @ y - (lp.degrees[:, None] * y) * eigenvalues[None, :]
    return np.abs(res).max(axis=0) / np.abs(y).max(axis=0)


def _normalized_operator(lp):
    inv_sqrt = 1.0 / np.sqrt(lp.degrees)
    scale = sp.diags(inv_sqrt)
    return (scale @ lp.l @ scale).tocsr(), inv_sqrt


def _dense_spectrum(lp):
    a, inv_sqrt = _normalized_operator(lp)
    a = a.toarray()
    a = 0.5 * (a + a.T)
    vals, vecs = scipy.linalg.eigh(a)
    return vals, vecs * inv_sqrt[:, None]


def _sparse_spectrum(lp, count, mode):
    a, inv_sqrt = _normalized_operator(lp)
    n = a.shape[0]
    # eigenvalues of the normalized Laplacian lie in [0, 2]; the smallest
    # ones become the largest of 2I - A, which Lanczos finds without shifts
    op = a if mode == LARGEST else (2.0 * sp.identity(n) - a).tocsr()
    v0 = np.full(n, 1.0 / np.sqrt(n))
    try:
        vals, vecs = spla.eigsh(op, k=count, which="LA", tol=1e-13,
                                v0=v0, maxiter=100 * n)
    except spla.ArpackNoConvergence as exc:
        raise NumericError(f"sparse eigensolver did not converge: {exc}") from exc
    if mode == SMALLEST:
        vals = 2.0 - vals
    order = np.argsort(vals)
    return vals[order], vecs[:, order] * inv_sqrt[:, None]


def solve_generalized_eigen(lp, k, mode=SMALLEST, method="auto", skip=0):
    """Return ``k`` eigenpairs of ``L y = lambda D y`` picked by ``mode``.

    ``SMALLEST`` lists eigenvalues in ascending order, ``LARGEST`` in
    descending order.  ``skip`` drops that many pairs from the low end of the
    spectrum before selecting (used to discard the constant eigenvector).
    Eigenvectors are D-normalised (``y^T D y = 1``) and signed so that their
    first nonzero entry is positive.
    """
    mode = _check_mode(mode)
    n = lp.l.shape[0]
    degrees = lp.degrees
    if np.any(degrees <= 0):
        bad = np.flatnonzero(degrees <= 0)
        raise GraphError(f"{bad.size} isolated node(s) (first: {bad[0]}) have "
                         "zero degree; rebuild the graph with a larger p")
    if not 1 <= k <= n - skip:
        raise ConfigError(f"need 1 <= k <= n - {skip}, got k={k}, n={n}")
    if method == "auto":
        method = "dense" if n <= DENSE_LIMIT else "sparse"

    if method == "dense":
        vals, vecs = _dense_spectrum(lp)
        vals, vecs = vals[skip:], vecs[:, skip:]
        pick = np.arange(k) if mode == SMALLEST else np.arange(len(vals) - 1, len(vals) - 1 - k, -1)
    elif method == "sparse":
        count = k + skip if mode == SMALLEST else k
        if count >= n:
            raise ConfigError("sparse solver needs k + skip < n; use method='dense'")
        vals, vecs = _sparse_spectrum(lp, count, mode)
        if mode == SMALLEST:
            vals, vecs = vals[skip:], vecs[:, skip:]
            pick = np.arange(k)
        else:
            pick = np.arange(k - 1, -1, -1)
    else:
        raise ConfigError(f"unknown eigen method {method!r}")

    vals = vals[pick].copy()
    vecs = np.array(vecs[:, pick])
    # renormalise in the D inner product to absorb rounding from the scaling
    vecs /= np.sqrt(np.einsum("ic,i,ic->c", vecs, degrees, vecs))[None, :]
    vecs = _fix_signs(vecs)
    residuals = generalized_residuals(lp, vecs, vals)
    worst = residuals.max()
    if not worst <= RESIDUAL_TOL:
        raise NumericError(f"generalized eigen solve missed tolerance: max "
                           f"relative residual {worst:.3e} > {RESIDUAL_TOL:g}")
    return Embedding(vecs, vals, mode, residuals)


def embed(g, k, mode=SMALLEST, drop_trivial=True, method="auto"):
    """Flat embedding ``Y`` (n x k) of the graph's nodes.

    With ``drop_trivial`` the lowest eigenpair (the constant vector on a
    connected graph, eigenvalue 0) is discarded before selection.
    """
    n = g.n
    if k + int(bool(drop_trivial)) > n:
        raise ConfigError(f"embedding size k={k} too large for n={n} points"
                          + (" after dropping the trivial eigenvector"
                             if drop_trivial else ""))
    return solve_generalized_eigen(laplacian(g), k, mode, method=method,
                                   skip=int(bool(drop_trivial)))
