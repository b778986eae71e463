"""Numpy fallback implementations of the batched prediction kernels.

These are the reference semantics for the compiled backend: every
accumulation runs in a fixed order (count index ascending, then rank
ascending) and sorts are stable, so both backends return bit-identical
float64 results. Keep any change here in sync with _speedups.pyx.

Shapes use a leading batch axis B. A P matrix is (m, m) with entry
[i, s-1] = joint probability that label i+1 is positive and the total
number of positive labels equals s. A count distribution d is (m+1,)
with d[s] = probability that exactly s labels are positive.
"""

import numpy as np

BACKEND_NAME = "python"


def w_matrix(m):
    """The (m, m) matrix with entry [s-1, k-1] = 2 / (s + k)."""
    s = np.arange(1.0, m + 1.0)
    return 2.0 / (s[:, None] + s[None, :])


def delta_batch(p):
    """Per-label gain matrices for a batch of P matrices.

    Entry [b, i, k-1] is the gain in expected F from predicting label
    i+1 positive when exactly k labels are predicted positive:
    sum_s p[b, i, s-1] * 2 / (s + k). Accumulated over s ascending.
    """
    p = np.ascontiguousarray(p, dtype=np.float64)
    b, m, _ = p.shape
    w = w_matrix(m)
    out = np.zeros((b, m, m), dtype=np.float64)
    for s in range(m):
        out += p[:, :, s, None] * w[s]
    return out


def gfm_batch(p, p_zero):
    """Expected-F maximizing predictions for a batch of P matrices.

    Returns (h, value) with h of shape (B, m) in {0, 1} and value the
    expected F-measure of h. Ties between labels go to the lower label
    index; ties between prediction sizes go to the smaller size, with
    the empty prediction (worth p_zero) considered first.
    """
    p = np.ascontiguousarray(p, dtype=np.float64)
    b, m, _ = p.shape
    p_zero = np.ascontiguousarray(p_zero, dtype=np.float64)
    delta = delta_batch(p)

    # Stable sort keeps equal gains in label order.
    order = np.argsort(-delta, axis=1, kind="stable")
    top = np.take_along_axis(delta, order, axis=1)
    cum = np.cumsum(top, axis=1)
    diag = cum[:, np.arange(m), np.arange(m)]

    cand = np.empty((b, m + 1), dtype=np.float64)
    cand[:, 0] = p_zero
    cand[:, 1:] = diag
    best_k = np.argmax(cand, axis=1)
    value = cand[np.arange(b), best_k]

    col = np.maximum(best_k - 1, 0)
    chosen = np.take_along_axis(order, col[:, None, None], axis=2)[:, :, 0]
    inside = (np.arange(m)[None, :] < best_k[:, None]).astype(np.uint8)
    h = np.zeros((b, m), dtype=np.uint8)
    np.put_along_axis(h, chosen, inside, axis=1)
    return h, value


def recover_d_batch(p):
    """Count distributions implied by a batch of P matrices.

    d[b, s] = sum_i p[b, i, s-1] / s for s >= 1, accumulated over the
    label index ascending; d[b, 0] = 1 - sum_{s>=1} d[b, s], with the
    sum accumulated over s ascending. No validation: d[b, 0] can come
    out negative when p is not a consistent marginal table.
    """
    p = np.ascontiguousarray(p, dtype=np.float64)
    b, m, _ = p.shape
    d = np.zeros((b, m + 1), dtype=np.float64)
    if m == 0:
        d[:, 0] = 1.0
        return d
    for s in range(1, m + 1):
        acc = p[:, 0, s - 1].copy()
        for i in range(1, m):
            acc = acc + p[:, i, s - 1]
        d[:, s] = acc / s
    total = d[:, 1].copy()
    for s in range(2, m + 1):
        total = total + d[:, s]
    d[:, 0] = 1.0 - total
    return d


def merge_batch(p1, d1, p2, d2):
    """Combine P matrices of two independent label groups.

    p1 is (B, m1, m1) with count distribution d1 of shape (B, m1+1);
    likewise p2/d2 for the second group. Returns the (B, m, m) matrix
    of the union, m = m1 + m2, with the first group's labels in rows
    0..m1-1 and the second group's in rows m1..m-1. Each entry is a
    convolution over the split of the total count between the groups,
    accumulated with the own-group count ascending.
    """
    p1 = np.ascontiguousarray(p1, dtype=np.float64)
    p2 = np.ascontiguousarray(p2, dtype=np.float64)
    d1 = np.ascontiguousarray(d1, dtype=np.float64)
    d2 = np.ascontiguousarray(d2, dtype=np.float64)
    b = d1.shape[0]
    m1 = d1.shape[1] - 1
    m2 = d2.shape[1] - 1
    m = m1 + m2
    out = np.zeros((b, m, m), dtype=np.float64)
    for s1 in range(1, m1 + 1):
        for s2 in range(m2 + 1):
            out[:, :m1, s1 + s2 - 1] += p1[:, :, s1 - 1] * d2[:, s2, None]
    for s1 in range(1, m2 + 1):
        for s2 in range(m1 + 1):
            out[:, m1:, s1 + s2 - 1] += p2[:, :, s1 - 1] * d1[:, s2, None]
    return out
