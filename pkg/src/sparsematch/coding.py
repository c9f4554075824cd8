"""Sparse codes against a fixed dictionary via LARS with the lasso modification.

Each patch ``x`` is encoded by solving

    min_c ||x - B c||^2 + beta * ||c||_1

exactly, by following the piecewise-linear lasso path from ``c = 0`` down to
the point where the largest absolute correlation ``|B^T (x - B c)|`` equals
``beta / 2``.
"""

import time
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg.lapack import dpotrf as _potrf, dpotrs as _potrs
from scipy.linalg.lapack import dtrtrs as _trtrs

from ._binio import Reader, Writer
from .errors import ConfigError, CorruptionError, NumericError

MAGIC = b"SPMC"
VERSION = 1
GRAM_LIMIT = 2048

_ENTRY = np.dtype([("index", "<u4"), ("value", "<f8")])


@dataclass(frozen=True)
class SparseCode:
    values: np.ndarray
    support: np.ndarray
    beta: float

    @classmethod
    def from_dense(cls, values, beta):
        values = np.asarray(values, dtype=np.float64)
        return cls(values, np.flatnonzero(values), float(beta))

    @property
    def k(self):
        return len(self.values)

    def __eq__(self, other):
        if not isinstance(other, SparseCode):
            return NotImplemented
        return (self.beta == other.beta
                and np.array_equal(self.values, other.values))


@dataclass(frozen=True)
class EncodeReport:
    n: int
    mean_reconstruction_error: float
    mean_support_size: float
    wall_time: float


def lasso_objective(b, x, c, beta):
    r = x - b @ c
    return float(r @ r + beta * np.abs(c).sum())


def kkt_violation(b, x, c, beta):
    """Largest breach of the lasso optimality conditions for ``c``.

    On the support ``2 b_j^T r`` must equal ``beta * sign(c_j)``; elsewhere its
    magnitude must not exceed ``beta``.
    """
    grad = 2.0 * b.T @ (x - b @ c)
    on = c != 0
    worst_on = np.abs(grad[on] - beta * np.sign(c[on])).max(initial=0.0)
    worst_off = (np.abs(grad[~on]) - beta).max(initial=-np.inf)
    return max(worst_on, worst_off, 0.0)


def _basis(d):
    return np.asarray(d.b if hasattr(d, "b") else d, dtype=np.float64)


def lars_lasso(d, x, beta=0.1, gram=None, max_steps=None):
    """Encode one patch vector ``x`` (length m) against dictionary ``d``.

    ``gram`` may carry a precomputed ``B^T B`` to share across calls.
    All-zero atoms are ignored (with a warning) and get coefficient 0.
    """
    b = _basis(d)
    x = np.asarray(x, dtype=np.float64)
    m, k = b.shape
    if not beta > 0:
        raise ConfigError(f"beta must be > 0, got {beta}")
    if x.shape != (m,):
        raise ConfigError(f"patch length {x.shape} does not match dictionary "
                          f"dimension m={m}")
    if not np.all(np.isfinite(x)):
        raise ConfigError("patch contains non-finite values")
    if gram is None and k <= GRAM_LIMIT:
        gram = b.T @ b
    colsq = np.diag(gram) if gram is not None else np.einsum("ij,ij->j", b, b)
    usable = colsq > 0
    if not usable.all():
        warnings.warn(f"skipping {np.count_nonzero(~usable)} all-zero "
                      "dictionary column(s)")

    target = 0.5 * beta
    c = np.zeros(k)
    xcorr = b.T @ x
    corr = np.where(usable, xcorr, 0.0)
    lam = np.abs(corr).max(initial=0.0)
    if lam <= target:
        return SparseCode(c, np.zeros(0, dtype=np.int64), float(beta))

    cap = min(m, int(usable.sum()))
    if max_steps is None:
        max_steps = 50 * max(m, k) + 100

    def gram_column(j):
        return gram[:, j] if gram is not None else b.T @ b[:, j]

    # active atoms in insertion order; ga holds their Gram columns and chol
    # the lower Cholesky factor of the active Gram block
    idx = np.empty(cap, dtype=np.int64)
    signs = np.empty(cap)
    ga = np.empty((k, cap))
    chol = np.zeros((cap, cap))
    size = 0
    # atoms that may not join: active ones and all-zero columns
    blocked = ~usable

    def add(j, sign):
        nonlocal size
        if size >= cap:
            raise NumericError(f"active set would exceed min(m, k)={cap}")
        col = gram_column(j)
        if size:
            w, _ = _trtrs(chol[:size, :size], col[idx[:size]], lower=1)
            rest = col[j] - w @ w
            chol[size, :size] = w
        else:
            rest = col[j]
        if not rest > 1e-13 * col[j]:
            raise NumericError("active atoms became linearly dependent "
                               f"(|A|={size + 1})")
        chol[size, size] = np.sqrt(rest)
        idx[size], signs[size], ga[:, size] = j, sign, col
        blocked[j] = True
        size += 1

    def remove(pos):
        nonlocal size
        blocked[idx[pos]] = False
        keep = np.r_[0:pos, pos + 1:size]
        size -= 1
        idx[:size], signs[:size] = idx[keep], signs[keep]
        ga[:, :size] = ga[:, keep]
        if size:
            chol[:size, :size] = _cholesky(ga[idx[:size], :size], size)

    first = int(np.argmax(np.abs(corr)))
    add(first, np.sign(corr[first]))
    just_dropped = just_added = -1

    with np.errstate(divide="ignore", invalid="ignore"):
        for _ in range(max_steps):
            act = idx[:size]
            direction, _ = _potrs(chol[:size, :size], signs[:size], lower=1)
            a = ga[:, :size] @ direction
            gamma, event, which = lam - target, "end", -1
            eps_step = 1e-12 * max(lam, 1.0)

            # an inactive correlation reaches the shrinking active level
            den = 1.0 - a
            up = np.maximum(lam - corr, 0.0) / den
            up[den <= 1e-12] = np.inf
            den = 1.0 + a
            down = np.maximum(lam + corr, 0.0) / den
            down[den <= 1e-12] = np.inf
            join = np.minimum(up, down)
            join[blocked] = np.inf
            # an atom that just left sits on the boundary; only a later
            # crossing counts
            if just_dropped >= 0 and join[just_dropped] <= eps_step:
                join[just_dropped] = np.inf
            j = int(join.argmin())
            if join[j] < gamma:
                gamma, event, which = join[j], "join", j

            # an active coefficient crosses zero
            cross = -c[act] / direction
            cross[~(cross > 0)] = np.inf
            if just_added >= 0 and cross[-1] <= eps_step:
                cross[-1] = np.inf
            pos = int(cross.argmin())
            if cross[pos] < gamma:
                gamma, event, which = cross[pos], "drop", pos

            c[act] += gamma * direction
            lam -= gamma
            corr = xcorr - ga[:, :size] @ c[act]
            just_dropped = just_added = -1

            if event == "end":
                break
            if event == "join":
                # the bound that was hit fixes the sign if corr rounds to zero
                sign = np.sign(corr[which])
                if sign == 0:
                    sign = 1.0 if up[which] <= down[which] else -1.0
                add(which, sign)
                just_added = which
            else:
                just_dropped = int(idx[which])
                c[just_dropped] = 0.0
                remove(which)
                if not size:
                    break
        else:
            raise NumericError(f"LARS did not terminate within {max_steps} steps")

    c = _polish(b, x, c, idx[:size], signs[:size], chol[:size, :size], target)
    return SparseCode(c, np.flatnonzero(c), float(beta))


def _cholesky(g, size):
    factor, info = _potrf(g, lower=1, clean=1)
    if info != 0:
        raise NumericError("active atoms became linearly dependent "
                           f"(|A|={size})")
    return factor


def _polish(b, x, c, idx, signs, chol, target):
    """Re-solve the active-set stationarity equations at the final level.

    Path updates accumulate rounding; solving ``G_A c_A = B_A^T x - target s``
    once more brings the on-support conditions back to machine precision.
    """
    if not len(idx):
        return c
    refined, _ = _potrs(chol, b[:, idx].T @ x - target * signs, lower=1)
    if np.all(np.sign(refined) == signs):
        out = np.zeros_like(c)
        out[idx] = refined
        return out
    return c


def encode_batch(d, x, beta=0.1):
    """Encode every column of ``x`` (m x n).

    Returns the list of codes in column order and an ``EncodeReport``.
    """
    b = _basis(d)
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] != b.shape[0]:
        raise ConfigError(f"data shape {x.shape} does not match dictionary "
                          f"dimension m={b.shape[0]}")
    start = time.perf_counter()
    gram = b.T @ b if b.shape[1] <= GRAM_LIMIT else None
    codes, errors = [], []
    for i in range(x.shape[1]):
        try:
            code = lars_lasso(b, x[:, i], beta, gram=gram)
        except (ConfigError, NumericError) as exc:
            raise type(exc)(f"column {i}: {exc}") from exc
        codes.append(code)
        errors.append(np.linalg.norm(x[:, i] - b @ code.values))
    n = len(codes)
    report = EncodeReport(
        n=n,
        mean_reconstruction_error=float(np.mean(errors)) if n else 0.0,
        mean_support_size=float(np.mean([len(cd.support) for cd in codes]))
        if n else 0.0,
        wall_time=time.perf_counter() - start if n else 0.0)
    return codes, report


def densify(codes, k=None):
    """Stack codes into an ``(n, k)`` array."""
    if k is None:
        k = codes[0].k if codes else 0
    out = np.zeros((len(codes), k))
    for i, code in enumerate(codes):
        out[i, code.support] = code.values[code.support]
    return out


def save_codes(codes, path, beta, meta=None, k=None):
    """SPMC file: magic, version, k, beta, n, meta, per-code sparse entries, CRC32."""
    if k is None:
        k = codes[0].k if codes else 0
    w = Writer(MAGIC, VERSION)
    w.u32(k)
    w.f64(beta)
    w.u32(len(codes))
    w.meta(meta or {})
    for code in codes:
        if code.k != k:
            raise ConfigError(f"code length {code.k} differs from k={k}")
        entries = np.empty(len(code.support), dtype=_ENTRY)
        entries["index"] = code.support
        entries["value"] = code.values[code.support]
        w.u32(len(entries))
        w.raw(entries.tobytes())
    w.save(path)


def load_codes(path):
    """Return ``(codes, beta, meta)`` from an SPMC file."""
    r = Reader.open(path, MAGIC, {VERSION})
    k = r.u32()
    beta = r.f64()
    n = r.u32()
    meta = r.meta()
    codes = []
    for _ in range(n):
        nnz = r.u32()
        entries = np.frombuffer(r.raw(nnz * _ENTRY.itemsize), dtype=_ENTRY)
        if nnz and entries["index"].max() >= k:
            raise CorruptionError(f"{path}: code index out of range")
        values = np.zeros(k)
        values[entries["index"].astype(np.int64)] = entries["value"]
        codes.append(SparseCode(values, np.flatnonzero(values), beta))
    r.finish()
    return codes, beta, meta
