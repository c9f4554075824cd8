"""Run the full matching pipeline twice: complete and over-complete basis.

Each run writes its artifacts (dictionary, codes, model, metrics, ROC) to
its own directory under demo_out/.  Takes about a minute.

    python demos/03_pair_matching.py
"""

from sparsematch.config import load_config
from sparsematch.pipeline import cmd_pipeline

for k in (64, 96):
    cfg = load_config(None, dict(k=k, hidden="200", unit_norm_atoms=True,
                                 out=f"demo_out/k{k}"))
    result = cmd_pipeline(cfg)
    best = max(result["history"].val_acc)
    print(f"k={k:3d} ({result['completeness']}): error@95 {result['error95']:.3f}, "
          f"accuracy {result['accuracy']:.3f}, best validation accuracy {best:.3f}")
print("ROC data for plotting: demo_out/k*/roc.dat (columns fpr tpr)")
