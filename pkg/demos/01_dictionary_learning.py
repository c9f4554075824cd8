"""Learn an over-complete basis from synthetic 8x8 patches.

Walks through the four steps by hand: sample patches, connect them in a
heat-kernel nearest-neighbour graph, embed the graph with Laplacian
eigenmaps, then ridge-regress the embedding onto the pixels.

    python demos/01_dictionary_learning.py
"""

import numpy as np
from scipy.sparse.csgraph import connected_components

from sparsematch.graph import knn_graph, laplacian
from sparsematch.dictionary import fit_dictionary
from sparsematch.patchdata import synth_dataset
from sparsematch.spectral import embed

ds = synth_dataset(seed=0, n_prototypes=20, pairs_per_class=24, side=8)
x = ds.patches[:480].T  # one patch per column, m = 64
print(f"{x.shape[1]} patches of dimension m={x.shape[0]}")

g = knn_graph(x, p=5)
degrees = g.degrees
print(f"graph: {g.w.nnz // 2} edges, auto bandwidth t={g.t:.3f}, "
      f"degree range [{degrees.min():.2f}, {degrees.max():.2f}]")
lap = laplacian(g).l
print(f"Laplacian rows sum to zero: max |row sum| = {abs(lap.sum(axis=1)).max():.1e}")

# every connected component contributes one zero eigenvalue; only the
# lowest is dropped, so the others appear as cluster indicator columns
n_comp, _ = connected_components(g.w, directed=False)
emb = embed(g, k=96)
zeros = int(np.sum(np.abs(emb.eigenvalues) < 1e-10))
print(f"{n_comp} connected components -> {zeros} zero eigenvalues kept; "
      f"largest kept eigenvalue {emb.eigenvalues[-1]:.4f}, "
      f"worst residual {emb.residuals.max():.1e}")

d = fit_dictionary(x, emb, alpha=0.1, unit_norm=True)
print(f"dictionary {d.m}x{d.k} is {d.completeness}")
