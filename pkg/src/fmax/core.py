"""F-measure evaluation and exact expected-F maximization.

The maximizer consumes the sufficient statistic P, an m x m matrix
with entry p_is = p(y_i = 1, s_y = s) where s_y counts the positive
labels, plus the probability p(y = 0) of the empty label set. For
each candidate prediction size k it scores every label by the gain
delta_ik = sum_s p_is * 2 / (s + k), keeps the k best, and finally
compares all sizes including the empty prediction.

Indices are 0-based internally; file formats and docstrings follow
the 1-based (i, s, k) convention.
"""

import json

import numpy as np

from . import _kernels
from .errors import DimensionError, DomainError, InconsistencyError

# Slack for validating probabilities that went through float arithmetic.
PROB_SLACK = 1e-9

# Exact-path tolerance for a recovered d_0 below zero; estimated paths
# pass something looser (see factor.recover_d).
D_ZERO_TOL = 1e-9


def _as_binary_vector(v, name):
    arr = np.asarray(v)
    if arr.ndim != 1 or arr.shape[0] < 1:
        raise DimensionError(f"{name} must be a non-empty 1-d sequence")
    if not np.isin(arr, (0, 1)).all():
        raise DomainError(f"{name} entries must be 0 or 1")
    return arr.astype(np.int64)


def f_measure(y, h):
    """F-measure 2(y.h)/(y.y + h.h) between binary vectors, 0/0 = 1."""
    y = _as_binary_vector(y, "y")
    h = _as_binary_vector(h, "h")
    if y.shape != h.shape:
        raise DimensionError(
            f"length mismatch: y has {y.shape[0]} entries, h has {h.shape[0]}"
        )
    denom = int(y.sum()) + int(h.sum())
    if denom == 0:
        return 1.0
    return 2.0 * int(y @ h) / denom


def f_measure_rows(y, h):
    """Row-wise f_measure for (n, m) arrays of binary labels."""
    y = np.asarray(y, dtype=np.int64)
    h = np.asarray(h, dtype=np.int64)
    if y.shape != h.shape or y.ndim != 2:
        raise DimensionError("y and h must be (n, m) arrays of equal shape")
    denom = y.sum(axis=1) + h.sum(axis=1)
    inter = (y & h).sum(axis=1)
    out = np.ones(y.shape[0], dtype=np.float64)
    nz = denom > 0
    out[nz] = 2.0 * inter[nz] / denom[nz]
    return out


def build_w(m):
    """The m x m matrix with entry [s-1, k-1] = 2 / (s + k)."""
    if m < 1:
        raise DimensionError("m must be at least 1")
    return _kernels.w_matrix(int(m))


def validate_p_matrix(p, tol=PROB_SLACK, strict=True):
    """Check P invariants and return the matrix as clean float64.

    Entries must lie in [0, 1] up to `tol` (they are clipped into the
    exact range). With strict=True, two facts that hold for any table
    marginalized from a real distribution are also enforced: an entry
    cannot exceed its column's implied count mass d_s, and the implied
    count masses cannot sum past 1. Estimated tables may break both,
    so estimation paths validate with strict=False and deal with the
    implied d separately.
    """
    p = np.asarray(p, dtype=np.float64)
    if p.ndim != 2 or p.shape[0] != p.shape[1] or p.shape[0] < 1:
        raise DimensionError("P must be a square matrix with m >= 1")
    if not np.isfinite(p).all():
        raise DomainError("P entries must be finite")
    if p.min() < -tol or p.max() > 1.0 + tol:
        raise DomainError("P entries must lie in [0, 1]")
    p = np.clip(p, 0.0, 1.0)
    if strict:
        m = p.shape[0]
        d_tail = p.sum(axis=0) / np.arange(1.0, m + 1.0)
        if (p > d_tail[None, :] + tol).any():
            raise DomainError("P entry exceeds its count-level mass sum_j p_js / s")
        if d_tail.sum() > 1.0 + max(tol, D_ZERO_TOL):
            raise InconsistencyError("implied count masses sum past 1")
    return p


def _validate_p_zero(p_zero):
    p_zero = float(p_zero)
    if not np.isfinite(p_zero) or p_zero < -PROB_SLACK or p_zero > 1.0 + PROB_SLACK:
        raise DomainError("p_zero must lie in [0, 1]")
    return min(max(p_zero, 0.0), 1.0)


def compute_delta(p):
    """Gain matrix Delta = P W, entry [i, k-1] = sum_s p_is * 2/(s+k)."""
    p = validate_p_matrix(p)
    return _kernels.delta_batch(p[None])[0]


def gfm(p, p_zero):
    """Expected-F maximizing prediction from P and p(y = 0).

    Returns (h, value) where h is the 0/1 prediction vector and value
    its expected F-measure under the distribution P summarizes. Label
    ties break toward the lower index, size ties toward the smaller
    prediction size (the empty prediction is considered first).
    """
    p = validate_p_matrix(p)
    p_zero = _validate_p_zero(p_zero)
    h, value = _kernels.gfm_batch(p[None], np.array([p_zero]))
    return h[0], float(value[0])


def gfm_from_p_only(p, tol=D_ZERO_TOL):
    """gfm with p(y = 0) inferred from P itself.

    The count distribution is recoverable from P, so the empty-set
    mass needs no separate input: d_0 = 1 - sum_{s>=1} sum_i p_is / s.
    A d_0 below -tol raises; a small negative d_0 is clamped to 0.
    """
    p = validate_p_matrix(p)
    d = _kernels.recover_d_batch(p[None])[0]
    if d[0] < -tol:
        raise InconsistencyError(
            f"recovered d_0 = {d[0]:.6g} is negative beyond tolerance {tol:g}"
        )
    h, value = _kernels.gfm_batch(p[None], np.array([max(d[0], 0.0)]))
    return h[0], float(value[0])


def p_matrix_to_json(p, p_zero=None):
    """Serialize P (and optionally p_zero) to a JSON string.

    Format: {"m": int, "entries": row-major m*m list, "p_zero": real},
    rows indexed by label i = 1..m, columns by count s = 1..m.
    """
    p = np.asarray(p, dtype=np.float64)
    obj = {"m": int(p.shape[0]), "entries": [float(v) for v in p.ravel()]}
    if p_zero is not None:
        obj["p_zero"] = float(p_zero)
    return json.dumps(obj)


def p_matrix_from_json(text):
    """Inverse of p_matrix_to_json; returns (P, p_zero or None)."""
    obj = json.loads(text)
    m = int(obj["m"])
    entries = np.asarray(obj["entries"], dtype=np.float64)
    if entries.shape != (m * m,):
        raise DimensionError(f"expected {m * m} entries, got {entries.shape[0]}")
    p_zero = obj.get("p_zero")
    return entries.reshape(m, m), None if p_zero is None else float(p_zero)
