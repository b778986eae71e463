"""Synthetic data generator: Bayesian networks over features and labels.

The study design: 6 binary features and 8 binary labels. Features
x1..x4 are parents of every label, x5 and x6 are disconnected noise,
and the labels split into blocks that are fully connected internally
(edge y_i -> y_j for i < j within a block) with no edges across
blocks, so each block is conditionally independent of the rest given
the features. Four scenarios vary the block structure from four pairs
to one block of eight. Conditional probability table rows are drawn
uniformly from the two-outcome simplex, i.e. Uniform[0, 1].
"""

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import CapacityError, DataFormatError, DimensionError, DomainError
from .factor import LabelPartition
from .rng import sample_simplex

N_FEATURES = 6
N_LABELS = 8
N_RELEVANT_FEATURES = 4

SCENARIO_BLOCKS = {
    1: ((0, 1), (2, 3), (4, 5), (6, 7)),
    2: ((0, 1, 2, 3), (4, 5, 6, 7)),
    3: ((0, 1, 2, 3, 4, 5), (6, 7)),
    4: (tuple(range(8)),),
}


def parse_scenario(value):
    """Normalize a scenario id: 1..4, '3', or 'DAG3' -> int."""
    if isinstance(value, str):
        text = value.strip().upper()
        if text.startswith("DAG"):
            text = text[3:]
        try:
            value = int(text)
        except ValueError:
            raise DomainError(f"unknown scenario {value!r}") from None
    value = int(value)
    if value not in SCENARIO_BLOCKS:
        raise DomainError(f"scenario must be in 1..4, got {value}")
    return value


def scenario_name(sid):
    return f"DAG{parse_scenario(sid)}"


@dataclass(frozen=True)
class BayesNetSpec:
    """A DAG over binary nodes with optional CPTs.

    nodes lists features first (names x*), then labels (names y*);
    parents[j] holds indices strictly below j, so node order is
    topological. cpts[j], when present, has one row per parent
    assignment giving p(node_j = 1 | assignment), rows ordered
    lexicographically with the first listed parent most significant.
    """

    nodes: tuple
    parents: tuple
    cpts: tuple = None

    def __post_init__(self):
        nodes = tuple(str(s) for s in self.nodes)
        parents = tuple(tuple(int(p) for p in ps) for ps in self.parents)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "parents", parents)
        if len(parents) != len(nodes):
            raise DimensionError("need one parent list per node")
        for j, ps in enumerate(parents):
            if any(p < 0 or p >= j for p in ps):
                raise DomainError(
                    f"node {j} has a parent outside 0..{j - 1}; "
                    "nodes must be listed in topological order"
                )
        nf = sum(1 for s in nodes if s.startswith("x"))
        if nodes != tuple(f"x{i + 1}" for i in range(nf)) + tuple(
            f"y{i + 1}" for i in range(len(nodes) - nf)
        ):
            raise DomainError("nodes must be x1..xF followed by y1..yL")
        if self.cpts is not None:
            cpts = tuple(
                np.asarray(c, dtype=np.float64) for c in self.cpts
            )
            object.__setattr__(self, "cpts", cpts)
            for j, c in enumerate(cpts):
                if c.shape != (1 << len(parents[j]),):
                    raise DimensionError(
                        f"node {j} needs {1 << len(parents[j])} CPT rows, "
                        f"got {c.shape}"
                    )
                if not np.isfinite(c).all() or c.min() < 0.0 or c.max() > 1.0:
                    raise DomainError(f"node {j} CPT rows must lie in [0, 1]")

    @property
    def n_features(self):
        return sum(1 for s in self.nodes if s.startswith("x"))

    @property
    def n_labels(self):
        return len(self.nodes) - self.n_features

    def to_json(self):
        obj = {
            "nodes": list(self.nodes),
            "parents": [list(ps) for ps in self.parents],
        }
        if self.cpts is not None:
            obj["cpts"] = [[float(v) for v in c] for c in self.cpts]
        return json.dumps(obj)

    @classmethod
    def from_json(cls, text):
        try:
            obj = json.loads(text)
            return cls(
                tuple(obj["nodes"]),
                tuple(tuple(ps) for ps in obj["parents"]),
                tuple(obj["cpts"]) if "cpts" in obj else None,
            )
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, (DimensionError, DomainError)):
                raise
            raise DataFormatError(f"bad network JSON: {exc}") from exc


@dataclass(frozen=True)
class Dataset:
    """Binary feature and label matrices with matching row counts."""

    features: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        f = np.ascontiguousarray(np.asarray(self.features), dtype=np.uint8)
        l = np.ascontiguousarray(np.asarray(self.labels), dtype=np.uint8)
        if f.ndim != 2 or l.ndim != 2 or f.shape[0] != l.shape[0]:
            raise DimensionError("features and labels need equal row counts")
        if (f > 1).any() or (l > 1).any():
            raise DomainError("dataset entries must be 0 or 1")
        object.__setattr__(self, "features", f)
        object.__setattr__(self, "labels", l)

    @property
    def n(self):
        return self.features.shape[0]

    def head(self, n):
        """The first n rows (used for nested train-size sweeps)."""
        return Dataset(self.features[:n], self.labels[:n])


def scenario_structure(sid):
    """Skeleton network and true partition for a scenario.

    Every label gets parents x1..x4 plus the earlier labels of its own
    block; x5 and x6 have no edges at all.
    """
    sid = parse_scenario(sid)
    blocks = SCENARIO_BLOCKS[sid]
    nodes = tuple(f"x{i + 1}" for i in range(N_FEATURES)) + tuple(
        f"y{i + 1}" for i in range(N_LABELS)
    )
    parents = [()] * N_FEATURES
    label_parents = {}
    for block in blocks:
        for pos, i in enumerate(block):
            label_parents[i] = tuple(range(N_RELEVANT_FEATURES)) + tuple(
                N_FEATURES + j for j in block[:pos]
            )
    parents.extend(label_parents[i] for i in range(N_LABELS))
    skeleton = BayesNetSpec(nodes, tuple(parents))
    return skeleton, LabelPartition(N_LABELS, blocks)


def sample_cpts(skeleton, rng):
    """Fill a skeleton with CPT rows drawn Uniform[0, 1] per row.

    Each node consumes its own child stream of `rng`, so the tables
    are reproducible regardless of evaluation order.
    """
    streams = rng.spawn(len(skeleton.nodes))
    cpts = []
    for j, ps in enumerate(skeleton.parents):
        rows = 1 << len(ps)
        cpts.append(sample_simplex(streams[j], 2, size=rows)[:, 0])
    return BayesNetSpec(skeleton.nodes, skeleton.parents, tuple(cpts))


def _parent_weights(k):
    # First listed parent most significant in the CPT row index.
    return (1 << np.arange(k - 1, -1, -1)).astype(np.int64)


def ancestral_sample(bn, n, rng):
    """Draw n joint samples by sampling nodes in listed order."""
    if bn.cpts is None:
        raise DomainError("network has no CPTs; call sample_cpts first")
    n = int(n)
    if n < 0:
        raise DomainError("sample count must be non-negative")
    streams = rng.spawn(len(bn.nodes))
    values = np.zeros((n, len(bn.nodes)), dtype=np.uint8)
    for j, ps in enumerate(bn.parents):
        if ps:
            idx = values[:, ps].astype(np.int64) @ _parent_weights(len(ps))
            p1 = bn.cpts[j][idx]
        else:
            p1 = bn.cpts[j][0]
        values[:, j] = streams[j].random(n) < p1
    nf = bn.n_features
    return Dataset(values[:, :nf], values[:, nf:])


def exact_conditional(bn, x):
    """Dense p(y | x) table implied by the network at feature vector x.

    Enumerates all label patterns (little-endian bit convention of the
    oracle module); capacity-limited to 16 labels.
    """
    if bn.cpts is None:
        raise DomainError("network has no CPTs; call sample_cpts first")
    m = bn.n_labels
    if m > 16:
        raise CapacityError(f"at most 16 labels supported, got {m}")
    nf = bn.n_features
    x = np.asarray(x).ravel()
    if x.shape != (nf,):
        raise DimensionError(f"x must have {nf} entries, got {x.shape}")
    n_pat = 1 << m
    bits = (np.arange(n_pat)[:, None] >> np.arange(m)[None, :]) & 1
    probs = np.ones(n_pat, dtype=np.float64)
    for i in range(m):
        j = nf + i
        ps = bn.parents[j]
        if ps:
            weights = _parent_weights(len(ps))
            idx = np.zeros(n_pat, dtype=np.int64)
            for t, p in enumerate(ps):
                v = int(x[p]) if p < nf else bits[:, p - nf]
                idx += v * weights[t]
            p1 = bn.cpts[j][idx]
        else:
            p1 = np.full(n_pat, bn.cpts[j][0])
        probs *= np.where(bits[:, i] == 1, p1, 1.0 - p1)
    return probs
