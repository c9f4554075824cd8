"""Patch matching with sparse over-complete codes and a fully connected matcher.

Pipeline: heat-kernel p-NN graph -> Laplacian eigenmap -> ridge-fit dictionary
-> LARS-lasso codes -> pair classifier trained on binary cross-entropy ->
ROC and error@95%.
"""

from .coding import SparseCode, encode_batch, lars_lasso
from .dictionary import Dictionary, fit_dictionary, load_dictionary, save_dictionary
from .evaluation import error_at_95, evaluate_model, roc_curve
from .graph import knn_graph, laplacian
from .network import (ARCH1, ARCH2, Architecture, TrainConfig, backward,
                      bce_loss, forward, init_network, predict_pair, train)
from .patchdata import (load_match_file, load_patch_sheet, synth_dataset)
from .spectral import LARGEST, SMALLEST, embed, solve_generalized_eigen

__version__ = "0.1.0"

__all__ = [
    "ARCH1", "ARCH2", "Architecture", "Dictionary", "LARGEST", "SMALLEST",
    "SparseCode", "TrainConfig", "backward", "bce_loss", "embed", "encode_batch",
    "error_at_95", "evaluate_model", "fit_dictionary", "forward", "init_network",
    "knn_graph", "lars_lasso", "laplacian", "load_dictionary", "load_match_file",
    "load_patch_sheet", "predict_pair", "roc_curve", "save_dictionary",
    "solve_generalized_eigen", "synth_dataset", "train",
]
