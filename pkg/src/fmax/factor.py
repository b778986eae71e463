"""Label-factor bookkeeping and the factorized maximizer.

A partition splits the m labels into blocks that are conditionally
independent given the features. Per-block P matrices are cheap to
estimate (sum of squared block sizes parameters instead of m^2); this
module recovers per-block count distributions, merges the blocks back
into a full-size P by bounded convolution, and runs the maximizer on
the result, restoring the original label order at the end.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .core import validate_p_matrix
from .errors import DimensionError, DomainError, InconsistencyError

# Default tolerance for a negative recovered d_0 on estimated tables;
# exact paths use core.D_ZERO_TOL.
ESTIMATED_D_TOL = 0.05


@dataclass(frozen=True)
class LabelPartition:
    """Ordered disjoint blocks of 0-based label indices covering 0..m-1."""

    m: int
    blocks: tuple = field(default=())

    def __post_init__(self):
        blocks = tuple(tuple(int(i) for i in b) for b in self.blocks)
        object.__setattr__(self, "blocks", blocks)
        if self.m < 1:
            raise DimensionError("partition needs at least one label")
        if any(len(b) == 0 for b in blocks):
            raise DomainError("partition blocks must be non-empty")
        flat = [i for b in blocks for i in b]
        if sorted(flat) != list(range(self.m)):
            raise DomainError(
                f"blocks must disjointly cover labels 0..{self.m - 1}"
            )

    @classmethod
    def single(cls, m):
        """The trivial one-block partition (plain GFM regime)."""
        return cls(m, (tuple(range(m)),))

    @classmethod
    def singletons(cls, m):
        """One block per label (full independence)."""
        return cls(m, tuple((i,) for i in range(m)))

    @property
    def n_blocks(self):
        return len(self.blocks)

    @property
    def block_sizes(self):
        return tuple(len(b) for b in self.blocks)

    @property
    def permutation(self):
        """Array mapping concatenated-block position to original label."""
        return np.array([i for b in self.blocks for i in b], dtype=np.intp)

    def to_json(self):
        """JSON with 1-based label indices."""
        return json.dumps(
            {"m": self.m, "blocks": [[i + 1 for i in b] for b in self.blocks]}
        )

    @classmethod
    def from_json(cls, text):
        obj = json.loads(text)
        m = int(obj["m"])
        blocks = tuple(tuple(int(i) - 1 for i in b) for b in obj["blocks"])
        return cls(m, blocks)


@dataclass(frozen=True)
class FactorStats:
    """A block's labels plus its P matrix, rows in block order."""

    block: tuple
    p: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "block", tuple(int(i) for i in self.block))
        p = np.asarray(self.p, dtype=np.float64)
        if p.shape != (len(self.block), len(self.block)):
            raise DimensionError(
                f"stats for a block of {len(self.block)} labels need a "
                f"square matrix of that size, got {p.shape}"
            )
        object.__setattr__(self, "p", p)


def recover_d(p, tol=None, clamp=False):
    """Count distribution implied by P: d_s = sum_i p_is / s, s >= 1.

    d_0 is whatever mass remains. On an exact P that is exactly the
    probability of zero positive labels; on an estimated P it can come
    out negative, which raises once it passes -tol (default 1e-9, the
    exact-path tolerance; estimation uses ESTIMATED_D_TOL). With
    clamp=True, negative entries are clamped to 0 and d is rescaled to
    sum to 1; P itself is never touched.
    """
    from .core import D_ZERO_TOL

    if tol is None:
        tol = D_ZERO_TOL
    p = validate_p_matrix(p, strict=False)
    d = _kernels.recover_d_batch(p[None])[0]
    if d[0] < -tol:
        raise InconsistencyError(
            f"recovered d_0 = {d[0]:.6g} is negative beyond tolerance {tol:g}"
        )
    if clamp:
        d = _clamp_d_batch(d[None])[0]
    return d


def _clamp_d_batch(d):
    """Clamp negative entries to 0 and renormalize each row to sum 1."""
    d = np.maximum(d, 0.0)
    return d / d.sum(axis=-1, keepdims=True)


def merge(p1, d1, p2, d2):
    """P matrix of the union of two independent label groups.

    Callers supply d1 = recover_d(p1) and d2 = recover_d(p2) to avoid
    recomputation. The result has the first group's labels in rows
    1..m1 and the second group's after them; entry (i, s) convolves
    the own-group table with the other group's count distribution over
    the admissible split of s between the groups.
    """
    p1 = np.asarray(p1, dtype=np.float64)
    p2 = np.asarray(p2, dtype=np.float64)
    p1 = validate_p_matrix(p1, strict=False) if p1.size else p1.reshape(0, 0)
    p2 = validate_p_matrix(p2, strict=False) if p2.size else p2.reshape(0, 0)
    d1 = _validate_d(d1, p1.shape[0])
    d2 = _validate_d(d2, p2.shape[0])
    return _kernels.merge_batch(p1[None], d1[None], p2[None], d2[None])[0]


def _validate_d(d, m):
    d = np.asarray(d, dtype=np.float64)
    if d.shape != (m + 1,):
        raise DimensionError(f"d must have length {m + 1}, got {d.shape}")
    if not np.isfinite(d).all():
        raise DomainError("d entries must be finite")
    return d


def f_gfm(partition, stats, tol=None, clamp=False):
    """Expected-F maximization from per-block statistics (Algorithm: fold).

    Recovers each block's count distribution, folds the blocks into a
    full P matrix and count distribution by repeated merging, runs the
    maximizer with the recovered empty-set mass, and finally permutes
    the prediction back into original label order. tol/clamp control
    the treatment of negative recovered d entries as in recover_d.

    Returns (h, expected_f) with h indexed by original label.
    """
    if not isinstance(partition, LabelPartition):
        raise DimensionError("partition must be a LabelPartition")
    if len(stats) != partition.n_blocks or any(
        tuple(s.block) != partition.blocks[k] for k, s in enumerate(stats)
    ):
        raise DimensionError("stats blocks must match the partition blocks")
    block_ps = [
        validate_p_matrix(s.p, strict=not clamp)[None] for s in stats
    ]
    h, value, _ = _fold_and_maximize(partition, block_ps, tol=tol, clamp=clamp, lenient=False)
    return h[0], float(value[0])


def f_gfm_batch(partition, block_ps, tol=ESTIMATED_D_TOL, clamp=True):
    """Batched f_gfm for estimation paths; never raises on bad d.

    block_ps holds one (B, m_k, m_k) array per block. Rows whose
    recovered d_0 falls below -tol are counted instead of raising, so
    a sweep over many instances survives isolated bad estimates.
    Returns (h (B, m) uint8, values (B,), n_inconsistent).
    """
    return _fold_and_maximize(partition, block_ps, tol=tol, clamp=clamp, lenient=True)


def _fold_and_maximize(partition, block_ps, tol, clamp, lenient):
    from .core import D_ZERO_TOL

    if tol is None:
        tol = D_ZERO_TOL
    b = block_ps[0].shape[0]
    bad = np.zeros(b, dtype=bool)

    def policy(d):
        nonlocal bad
        bad |= d[:, 0] < -tol
        if not lenient and bad.any():
            worst = float(d[:, 0].min())
            raise InconsistencyError(
                f"recovered d_0 = {worst:.6g} is negative beyond tolerance {tol:g}"
            )
        return _clamp_d_batch(d) if clamp else d

    acc_p = np.zeros((b, 0, 0), dtype=np.float64)
    acc_d = np.ones((b, 1), dtype=np.float64)
    for pk in block_ps:
        dk = policy(_kernels.recover_d_batch(pk))
        acc_p = _kernels.merge_batch(acc_p, acc_d, pk, dk)
        acc_d = policy(_kernels.recover_d_batch(acc_p))

    h_cat, value = _kernels.gfm_batch(acc_p, np.maximum(acc_d[:, 0], 0.0))
    h = np.zeros_like(h_cat)
    h[:, partition.permutation] = h_cat
    return h, value, int(bad.sum())


def parameter_count(partition):
    """Parameters needed for per-block estimation: sum of m_k squared.

    The one-block partition gives m^2; equal blocks give m^2 / n; the
    worst unbalanced two-way split (one singleton off an m-1 block
    generalized to n-1 singletons) gives (n-1) + (m-n+1)^2.
    """
    return int(sum(len(b) ** 2 for b in partition.blocks))


def merge_operation_count(partition):
    """Multiply-accumulate count of the fold f_gfm performs.

    Counts, per block of size c folded onto an accumulator of size M:
    c^2 for recovering the block's d, (c+1)M^2 + (M+1)c^2 for the
    merge convolution, and (M+c)^2 for recovering the merged d. Used
    by tests as a loose check against the quoted cost envelopes.
    """
    total = 0
    acc = 0
    for c in partition.block_sizes:
        total += c * c
        total += (c + 1) * acc * acc + (acc + 1) * c * c
        acc += c
        total += acc * acc
    return total
