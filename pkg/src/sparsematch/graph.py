"""p-nearest-neighbour affinity graph with heat-kernel weights and its Laplacian."""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.spatial.distance import cdist

from .errors import ConfigError

AUTO = "auto"


@dataclass(frozen=True)
class AffinityGraph:
    w: sp.csr_matrix
    degrees: np.ndarray
    p: int
    t: float
    squared_distance: bool = False

    @property
    def n(self):
        return self.w.shape[0]


@dataclass(frozen=True)
class LaplacianPair:
    l: sp.csr_matrix
    d: sp.dia_matrix

    @property
    def degrees(self):
        return self.d.diagonal()


def nearest_neighbors(points, p, chunk=512):
    """Exact p nearest neighbours of every row of ``points``.

    Returns ``(index, dist)`` arrays of shape ``(n, p)``.  A point is never its
    own neighbour; equal distances are ordered by the lower index.
    """
    n = len(points)
    index = np.empty((n, p), dtype=np.int64)
    dist = np.empty((n, p))
    for start in range(0, n, chunk):
        stop = min(start + chunk, n)
        d2 = cdist(points[start:stop], points, "sqeuclidean")
        d2[np.arange(stop - start), np.arange(start, stop)] = np.inf
        # stable sort keeps the lower column index first among equal distances
        nn = np.argsort(d2, axis=1, kind="stable")[:, :p]
        index[start:stop] = nn
        dist[start:stop] = np.sqrt(np.take_along_axis(d2, nn, axis=1))
    return index, dist


def knn_graph(x, p=5, t=AUTO, squared_distance=False):
    """Heat-kernel weighted p-NN graph over the columns of ``x`` (m x n).

    ``W_ij = exp(-||x_i - x_j|| / t)`` whenever either point is among the
    other's p nearest neighbours, 0 otherwise.  With ``squared_distance`` the
    exponent uses the squared norm instead.  ``t="auto"`` sets the bandwidth to
    the mean over retained edges of the same distance used in the exponent.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise ConfigError("x must be an m x n matrix")
    n = x.shape[1]
    if p < 1:
        raise ConfigError(f"p must be >= 1, got {p}")
    if n <= p:
        raise ConfigError(f"knn_graph needs n > p points, got n={n}, p={p}")
    points = x.T
    index, dist = nearest_neighbors(points, p)

    rows = np.repeat(np.arange(n), p)
    cols = index.ravel()
    vals = dist.ravel() ** 2 if squared_distance else dist.ravel()
    # OR-symmetrisation: keep an edge if it appears in either direction
    lo, hi = np.minimum(rows, cols), np.maximum(rows, cols)
    keys, first = np.unique(lo * n + hi, return_index=True)
    ei, ej, ed = keys // n, keys % n, vals[first]

    if isinstance(t, str):
        if t != AUTO:
            raise ConfigError(f"t must be a positive number or 'auto', got {t!r}")
        t = float(ed.mean()) if ed.size and ed.mean() > 0 else 1.0
    elif not t > 0:
        raise ConfigError(f"t must be positive, got {t}")
    weights = np.exp(-ed / t)

    w = sp.coo_matrix((np.concatenate([weights, weights]),
                       (np.concatenate([ei, ej]), np.concatenate([ej, ei]))),
                      shape=(n, n)).tocsr()
    w.sort_indices()
    degrees = np.asarray(w.sum(axis=1)).ravel()
    return AffinityGraph(w, degrees, int(p), float(t), bool(squared_distance))


def laplacian(g):
    """Return ``L = D - W`` together with the degree matrix ``D``."""
    d = sp.diags(g.degrees, format="dia")
    lap = (d - g.w).tocsr()
    lap.sort_indices()
    return LaplacianPair(lap, d)


def graph_to_csv(g, path):
    """Debug dump of the upper-triangular edges as ``i,j,w`` rows."""
    upper = sp.triu(g.w, k=1).tocoo()
    with open(path, "w") as fh:
        fh.write("i,j,w\n")
        for i, j, v in zip(upper.row, upper.col, upper.data):
            fh.write(f"{i},{j},{v!r}\n")
