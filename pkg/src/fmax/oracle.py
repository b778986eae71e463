"""Dense exact computations on small joint label distributions.

The ground-truth engine for everything else: expected F-measure by
full enumeration, brute-force maximization, and exact marginalization
into the P matrix and count distribution. Everything here is written
directly against the dense 2^m probability table and shares no code
with the fast paths it is used to verify.

Bit convention: a label vector maps to a table index little-endian,
label i (1-based) at bit i-1, so index = sum_i y_i * 2^(i-1).
"""

import numpy as np

from .errors import CapacityError, DimensionError, DomainError
from .rng import sample_simplex

MAX_LABELS = 16


def num_labels(probs):
    """Label count of a dense table; validates the length is 2^m."""
    n = len(probs)
    m = n.bit_length() - 1
    if n < 2 or n != 1 << m:
        raise DimensionError(f"table length {n} is not a power of two >= 2")
    return m


def validate_dist(probs, tol=1e-12):
    """Check a dense table is a distribution; returns it as float64."""
    probs = np.asarray(probs, dtype=np.float64)
    if probs.ndim != 1:
        raise DimensionError("probability table must be 1-d")
    m = num_labels(probs)
    if m > MAX_LABELS:
        raise CapacityError(f"at most {MAX_LABELS} labels supported, got {m}")
    if not np.isfinite(probs).all() or probs.min() < 0.0:
        raise DomainError("probabilities must be finite and non-negative")
    if abs(probs.sum() - 1.0) > max(tol, 1e-9):
        raise DomainError(f"probabilities sum to {probs.sum()!r}, not 1")
    return probs


def pattern_to_bits(pattern, m):
    """Bit pattern -> length-m 0/1 vector (label i at bit i-1)."""
    return (np.asarray(pattern) >> np.arange(m)) & 1


def bits_to_pattern(bits):
    """Length-m 0/1 vector -> bit pattern."""
    bits = np.asarray(bits)
    return int(bits @ (1 << np.arange(bits.shape[-1])))


def _popcounts(m):
    return np.bitwise_count(np.arange(1 << m, dtype=np.uint32))


def expected_f(probs, h):
    """Exact expected F-measure of prediction h under the dense table."""
    probs = validate_dist(probs)
    m = num_labels(probs)
    h = np.asarray(h)
    if h.shape != (m,):
        raise DimensionError(f"h must have length {m}, got {h.shape}")
    h_pat = bits_to_pattern(h)
    k = int(h.sum())
    patterns = np.arange(1 << m, dtype=np.uint32)
    sy = _popcounts(m)
    if k == 0:
        f = (patterns == 0).astype(np.float64)
    else:
        inter = np.bitwise_count(patterns & np.uint32(h_pat))
        f = 2.0 * inter / (sy + k)
    return float(probs @ f)


def brute_force_maximizer(probs):
    """Exhaustive argmax of expected_f over all 2^m predictions.

    Ties break toward the smaller bit pattern. Exponential in m on
    purpose; m is capped at MAX_LABELS and tests stay at m <= 12.
    """
    probs = validate_dist(probs)
    m = num_labels(probs)
    sy = _popcounts(m).astype(np.float64)
    patterns = np.arange(1 << m, dtype=np.uint32)
    best_pat = 0
    best_val = float(probs[0])
    for h_pat in range(1, 1 << m):
        k = int(np.bitwise_count(np.uint32(h_pat)))
        inter = np.bitwise_count(patterns & np.uint32(h_pat))
        val = float(probs @ (2.0 * inter / (sy + k)))
        if val > best_val:
            best_val = val
            best_pat = h_pat
    return pattern_to_bits(best_pat, m).astype(np.uint8), best_val


def exact_p_matrix(probs):
    """Exact (P, p_zero): P[i-1, s-1] = p(y_i = 1, s_y = s).

    Marginalizes the dense table directly; p_zero is the mass of the
    all-zero pattern.
    """
    probs = validate_dist(probs)
    m = num_labels(probs)
    sy = _popcounts(m)
    p = np.zeros((m, m), dtype=np.float64)
    for i in range(m):
        on = ((np.arange(1 << m) >> i) & 1).astype(bool)
        p[i] = np.bincount(sy[on], weights=probs[on], minlength=m + 1)[1:]
    return p, float(probs[0])


def exact_count_distribution(probs):
    """Exact d vector: d[s] = p(s_y = s), by direct tabulation."""
    probs = validate_dist(probs)
    m = num_labels(probs)
    return np.bincount(_popcounts(m), weights=probs, minlength=m + 1)


def product_joint(factors):
    """Dense table of independent factors, concatenated in order.

    The first factor's labels occupy the low bits, so the combined
    index is idx_1 + 2^(m_1) * idx_2 + ... for per-factor indices.
    """
    factors = [validate_dist(f) for f in factors]
    if not factors:
        raise DimensionError("need at least one factor")
    total = sum(num_labels(f) for f in factors)
    if total > MAX_LABELS:
        raise CapacityError(
            f"product would have {total} labels, above {MAX_LABELS}"
        )
    out = factors[0]
    for f in factors[1:]:
        out = np.kron(f, out)
    return out


def random_joint(rng, m):
    """Uniform random dense table over {0,1}^m (flat simplex draw)."""
    if m < 1 or m > MAX_LABELS:
        raise CapacityError(f"m must be in 1..{MAX_LABELS}, got {m}")
    return sample_simplex(rng, 1 << m)
