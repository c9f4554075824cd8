"""Encode patches with the LARS-lasso solver and inspect the codes.

Shows how the penalty trades reconstruction error for sparsity, and checks
the optimality conditions of each code.

    python demos/02_sparse_coding.py
"""

import numpy as np

from sparsematch.coding import encode_batch, kkt_violation
from sparsematch.dictionary import fit_dictionary
from sparsematch.graph import knn_graph
from sparsematch.patchdata import synth_dataset
from sparsematch.spectral import embed

ds = synth_dataset(seed=1, n_prototypes=20, pairs_per_class=24, side=8)
x = ds.patches[:480].T
d = fit_dictionary(x, embed(knn_graph(x), 96), unit_norm=True)
probe = ds.patches[480:520].T

print(" beta   support  residual  worst KKT")
for beta in (0.01, 0.1, 0.5, 2.0):
    codes, report = encode_batch(d, probe, beta)
    worst = max(kkt_violation(d.b, probe[:, i], c.values, beta)
                for i, c in enumerate(codes))
    print(f"{beta:5.2f}  {report.mean_support_size:8.1f}  "
          f"{report.mean_reconstruction_error:8.4f}  {worst:9.1e}")

codes, _ = encode_batch(d, probe[:, :1], 0.1)
top = np.argsort(-np.abs(codes[0].values))[:5]
print("largest coefficients of the first patch:",
      ", ".join(f"atom {j}: {codes[0].values[j]:+.3f}" for j in top))
