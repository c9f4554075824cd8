"""ROC curves and the false-positive rate at 95% recall."""

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import EvaluationError, ShapeError
from .network import forward


@dataclass(frozen=True)
class RocCurve:
    """Operating points for ``score >= threshold`` in decreasing threshold order.

    The first point uses threshold ``+inf`` (nothing accepted, (0, 0)); the
    last uses the minimum score (everything accepted, (1, 1)).
    """

    thresholds: np.ndarray
    tpr: np.ndarray
    fpr: np.ndarray
    tp: np.ndarray
    fp: np.ndarray
    n_pos: int
    n_neg: int

    def points(self):
        return list(zip(self.thresholds.tolist(), self.tpr.tolist(),
                        self.fpr.tolist()))


def roc_curve(scores, labels):
    scores = np.asarray(scores, dtype=np.float64).ravel()
    labels = np.asarray(labels).ravel()
    if scores.shape != labels.shape:
        raise ShapeError(f"{scores.size} scores for {labels.size} labels")
    if not np.all(np.isin(labels, (0, 1))):
        raise EvaluationError("labels must be 0 or 1")
    n_pos = int(np.count_nonzero(labels == 1))
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise EvaluationError("ROC needs both positive and negative labels")
    order = np.argsort(-scores, kind="stable")
    s, y = scores[order], labels[order]
    # one operating point per distinct score: the end of each tie block
    ends = np.flatnonzero(np.diff(s) != 0)
    ends = np.append(ends, s.size - 1)
    tp = np.concatenate([[0], np.cumsum(y == 1)[ends]])
    fp = np.concatenate([[0], np.cumsum(y == 0)[ends]])
    thresholds = np.concatenate([[np.inf], s[ends]])
    return RocCurve(thresholds, tp / n_pos, fp / n_neg, tp, fp, n_pos, n_neg)


def error_at_95(curve, recall=0.95):
    """FPR at the given TPR, linearly interpolated between curve points.

    When one or more points hit the TPR exactly, the smallest of their FPRs
    is returned.
    """
    frac = Fraction(str(recall))
    # integer comparison of tp / n_pos against the recall level
    scaled = curve.tp.astype(object) * frac.denominator
    need = frac.numerator * curve.n_pos
    i = int(np.argmax(scaled >= need))
    if scaled[i] == need or i == 0:
        return float(curve.fpr[i])
    t0, t1 = curve.tpr[i - 1], curve.tpr[i]
    f0, f1 = curve.fpr[i - 1], curve.fpr[i]
    return float(f0 + (recall - t0) * (f1 - f0) / (t1 - t0))


def accuracy_at(scores, labels, threshold=0.5):
    return float(np.mean((np.asarray(scores) > threshold)
                         == (np.asarray(labels) == 1)))


def score_pairs(params, samples, batch_size=4096):
    """Model scores for every pair in a ``PairSamples`` collection."""
    if params.input_dim != 2 * samples.k:
        raise ShapeError(f"model input_dim {params.input_dim} does not match "
                         f"2k = {2 * samples.k}")
    out = np.empty(len(samples))
    for start in range(0, len(samples), batch_size):
        idx = slice(start, start + batch_size)
        out[idx] = forward(params, samples.inputs(idx))
    return out


def evaluate_model(params, samples):
    """Return ``(roc, error95, accuracy)`` of a model on labelled pairs."""
    scores = score_pairs(params, samples)
    curve = roc_curve(scores, samples.labels)
    return curve, error_at_95(curve), accuracy_at(scores, samples.labels)


def write_roc_csv(curve, path):
    with open(path, "w") as fh:
        fh.write("threshold,tpr,fpr\n")
        for thr, tpr, fpr in curve.points():
            fh.write(f"{thr!r},{tpr!r},{fpr!r}\n")


def write_roc_dat(curve, path):
    """Whitespace-separated ``fpr tpr`` columns for gnuplot."""
    with open(path, "w") as fh:
        fh.write("# fpr tpr\n")
        for fpr, tpr in zip(curve.fpr, curve.tpr):
            fh.write(f"{fpr:.12g} {tpr:.12g}\n")


def write_metrics(path, error95, accuracy, n_pos, n_neg, extra=None):
    """Flat ``key=value`` metrics file, keys in a fixed order."""
    rows = {"error95": repr(float(error95)), "accuracy": repr(float(accuracy)),
            "n_pos": str(int(n_pos)), "n_neg": str(int(n_neg))}
    rows.update({k: str(v) for k, v in (extra or {}).items()})
    with open(path, "w") as fh:
        for key, value in rows.items():
            fh.write(f"{key}={value}\n")


def read_metrics(path):
    with open(path) as fh:
        return dict(line.rstrip("\n").split("=", 1) for line in fh if "=" in line)
