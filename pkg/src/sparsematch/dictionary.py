"""Ridge fit of the basis against the flat embedding, plus the SPMD artifact."""

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from ._binio import Reader, Writer
from .errors import ConfigError, NumericError

MAGIC = b"SPMD"
VERSION = 1


@dataclass(frozen=True)
class Dictionary:
    """Basis matrix ``b`` of shape (m, k) with the ridge penalty it was fit with."""

    b: np.ndarray
    alpha: float = 0.0
    meta: dict = field(default_factory=dict)

    @property
    def m(self):
        return self.b.shape[0]

    @property
    def k(self):
        return self.b.shape[1]

    @property
    def overcomplete(self):
        return self.k > self.m

    @property
    def completeness(self):
        if self.k > self.m:
            return "overcomplete"
        return "complete" if self.k == self.m else "undercomplete"

    def __eq__(self, other):
        if not isinstance(other, Dictionary):
            return NotImplemented
        return (self.b.shape == other.b.shape
                and np.array_equal(self.b, other.b)
                and self.alpha == other.alpha and self.meta == other.meta)


def ridge_objective(x, y, b, alpha):
    r = y - x.T @ b
    return float(np.sum(r * r) + alpha * np.sum(b * b))


def fit_dictionary(x, y, alpha=0.1, unit_norm=False, meta=None):
    """Closed-form minimiser of ``||Y - X^T B||^2 + alpha ||B||^2``.

    Parameters
    ----------
    x : ndarray, shape (m, n)
        Data matrix, one patch per column.
    y : ndarray, shape (n, k)
        Embedding, rows aligned with the columns of ``x``.
    alpha : float
        Ridge penalty; must be positive when ``x x^T`` is singular.
    unit_norm : bool
        Rescale atoms to unit length afterwards.  This changes the coding
        model (coefficients are no longer those of the ridge basis).

    Returns
    -------
    Dictionary
    """
    x = np.asarray(x, dtype=np.float64)
    if hasattr(y, "y"):
        y = y.y
    y = np.asarray(y, dtype=np.float64)
    if alpha < 0:
        raise ConfigError(f"alpha must be >= 0, got {alpha}")
    if x.ndim != 2 or y.ndim != 2 or x.shape[1] != y.shape[0]:
        raise ConfigError(f"shape mismatch: x {x.shape} and y {y.shape}; "
                          "y rows must align with x columns")
    m = x.shape[0]
    gram = x @ x.T
    gram[np.diag_indices(m)] += alpha
    rhs = x @ y
    try:
        factor = scipy.linalg.cho_factor(gram, lower=True, check_finite=True)
    except np.linalg.LinAlgError as exc:
        raise NumericError("X X^T + alpha I is not positive definite; use "
                           "alpha > 0") from exc
    diag = np.abs(np.diag(factor[0]))
    if diag.min() <= np.sqrt(np.finfo(float).eps) * diag.max():
        raise NumericError("X X^T + alpha I is numerically singular; use "
                           "alpha > 0")
    b = scipy.linalg.cho_solve(factor, rhs)
    if unit_norm:
        norms = np.linalg.norm(b, axis=0)
        zero = norms == 0
        if zero.any():
            warnings.warn(f"{zero.sum()} all-zero atoms left unnormalised")
        norms[zero] = 1.0
        b = b / norms
    if not np.all(np.isfinite(b)):
        raise NumericError("ridge fit produced non-finite entries")
    meta = dict(meta or {})
    meta.setdefault("unit_norm", str(bool(unit_norm)).lower())
    return Dictionary(b, float(alpha), meta)


def normal_equation_residual(x, y, b, alpha):
    gram = x @ x.T + alpha * np.eye(x.shape[0])
    return float(np.abs(gram @ b - x @ y).max())


def save_dictionary(d, path):
    """SPMD file: magic, version, m, k, alpha, meta, B row-major, CRC32."""
    w = Writer(MAGIC, VERSION)
    w.u32(d.m)
    w.u32(d.k)
    w.f64(d.alpha)
    w.meta(d.meta)
    w.array(d.b)
    w.save(path)


def load_dictionary(path):
    r = Reader.open(path, MAGIC, {VERSION})
    m, k = r.u32(), r.u32()
    alpha = r.f64()
    meta = r.meta()
    b = r.array((m, k))
    r.finish()
    return Dictionary(b, alpha, meta)
