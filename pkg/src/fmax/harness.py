"""Experiment orchestration: scenario sweeps at desk scale.

A run crosses scenarios with repetitions; each repetition samples a
fresh network, one training pool (train sizes are nested prefixes, so
growing n only adds rows), and one test set. Methods share these
datasets so comparisons are paired: GFM trains on the single-block
partition, FGFM_true on the scenario's true partition, FGFM_ilf on
whatever discover_partition finds in the training rows. Estimator
cross-validation streams depend only on (seed, scenario, repetition,
train size), never on the method, so methods that arrive at the same
partition produce bit-identical estimators and predictions.

Everything is deterministic given the seed, including under process
parallelism: repetitions run in disjoint RNG streams and rows are
sorted before emission.
"""

import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .core import f_measure_rows
from .discover import discover_partition
from .errors import CapacityError, DomainError
from .estimate import DEFAULT_LAMBDA_GRID, fit_estimator
from .factor import LabelPartition
from .oracle import brute_force_maximizer, expected_f
from .rng import stream
from .synth import (
    ancestral_sample,
    exact_conditional,
    parse_scenario,
    sample_cpts,
    scenario_name,
    scenario_structure,
)

METHODS = ("GFM", "FGFM_true", "FGFM_ilf")

# Stream purposes under (seed, scenario, repetition, ...): keep these
# stable or archived seeds stop reproducing.
_STREAM_CPTS = 0
_STREAM_TRAIN = 1
_STREAM_TEST = 2
_STREAM_FIT = 3


@dataclass(frozen=True)
class ExperimentConfig:
    scenarios: tuple = (1, 2, 3, 4)
    train_sizes: tuple = (50, 100, 200, 500, 1000)
    test_size: int = 2000
    repetitions: int = 20
    seed: int = 0
    methods: tuple = METHODS
    alpha: float = 0.01
    lambda_grid: tuple = DEFAULT_LAMBDA_GRID
    truth_inputs: int = 0
    timing: bool = False

    def __post_init__(self):
        object.__setattr__(
            self, "scenarios", tuple(parse_scenario(s) for s in self.scenarios)
        )
        object.__setattr__(
            self, "train_sizes", tuple(int(n) for n in self.train_sizes)
        )
        object.__setattr__(self, "methods", tuple(self.methods))
        object.__setattr__(self, "lambda_grid", tuple(float(v) for v in self.lambda_grid))
        if not self.scenarios:
            raise DomainError("need at least one scenario")
        if not self.train_sizes or min(self.train_sizes) < 1:
            raise DomainError("train sizes must be positive")
        if self.test_size < 1 or self.repetitions < 1:
            raise DomainError("test_size and repetitions must be positive")
        if not self.methods:
            raise DomainError("need at least one method")
        unknown = set(self.methods) - set(METHODS)
        if unknown:
            raise DomainError(f"unknown methods {sorted(unknown)}; pick from {METHODS}")
        if not 0.0 < self.alpha < 1.0:
            raise DomainError("alpha must lie strictly between 0 and 1")
        if self.truth_inputs < 0:
            raise DomainError("truth_inputs must be non-negative")

    def to_json(self):
        return json.dumps(
            {
                "scenarios": list(self.scenarios),
                "train_sizes": list(self.train_sizes),
                "test_size": self.test_size,
                "repetitions": self.repetitions,
                "seed": self.seed,
                "methods": list(self.methods),
                "alpha": self.alpha,
                "lambda_grid": list(self.lambda_grid),
                "truth_inputs": self.truth_inputs,
                "timing": self.timing,
            }
        )

    @classmethod
    def from_json(cls, text):
        obj = json.loads(text)
        defaults = cls()
        return cls(
            **{
                key: obj.get(key, getattr(defaults, key))
                for key in (
                    "scenarios",
                    "train_sizes",
                    "test_size",
                    "repetitions",
                    "seed",
                    "methods",
                    "alpha",
                    "lambda_grid",
                    "truth_inputs",
                    "timing",
                )
            }
        )


@dataclass(frozen=True)
class ResultRow:
    scenario: str
    method: str
    train_size: int
    repetition: int
    mean_f: float
    wall_time_ms: float = None


@dataclass(frozen=True)
class TruthRow:
    scenario: str
    method: str
    train_size: int
    repetition: int
    mean_true_f: float
    mean_envelope: float


@dataclass(frozen=True)
class SummaryRow:
    scenario: str
    method: str
    train_size: int
    mean_f: float
    stderr: float
    n_reps: int


def _resolve_threads(n_threads):
    if n_threads is None:
        n_threads = os.environ.get("FMAX_THREADS", "1")
    n_threads = int(n_threads)
    if n_threads < 1:
        raise DomainError("thread count must be at least 1")
    return n_threads


def run_experiment(cfg, n_threads=None):
    """Run the sweep; returns (result_rows, truth_rows), both sorted.

    n_threads (default: the FMAX_THREADS environment variable, else 1)
    caps process parallelism across (scenario, repetition) units. The
    output is byte-identical for any thread count.
    """
    n_threads = _resolve_threads(n_threads)
    tasks = [(cfg, sid, rep) for sid in cfg.scenarios for rep in range(cfg.repetitions)]
    if n_threads == 1:
        outcomes = [_run_repetition(*t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=n_threads) as pool:
            outcomes = list(pool.map(_run_repetition_star, tasks))
    rows = [row for rows, _ in outcomes for row in rows]
    truth = [row for _, truths in outcomes for row in truths]
    key = lambda r: (r.scenario, r.method, r.train_size, r.repetition)
    return sorted(rows, key=key), sorted(truth, key=key)


def _run_repetition_star(args):
    return _run_repetition(*args)


def _partition_for(method, true_partition, train, cfg):
    if method == "GFM":
        return LabelPartition.single(true_partition.m)
    if method == "FGFM_true":
        return true_partition
    return discover_partition(train, alpha=cfg.alpha)


def _run_repetition(cfg, sid, rep):
    skeleton, true_partition = scenario_structure(sid)
    name = scenario_name(sid)
    bn = sample_cpts(skeleton, stream(cfg.seed, sid, rep, _STREAM_CPTS))
    pool = ancestral_sample(bn, max(cfg.train_sizes), stream(cfg.seed, sid, rep, _STREAM_TRAIN))
    test = ancestral_sample(bn, cfg.test_size, stream(cfg.seed, sid, rep, _STREAM_TEST))

    conditionals = envelope = None
    if cfg.truth_inputs:
        k = min(cfg.truth_inputs, test.n)
        conditionals = [exact_conditional(bn, test.features[t]) for t in range(k)]
        envelope = float(
            np.mean([brute_force_maximizer(c)[1] for c in conditionals])
        )

    rows = []
    truths = []
    for size_idx, n_train in enumerate(cfg.train_sizes):
        train = pool.head(n_train)
        fitted = {}
        for method in cfg.methods:
            start = time.perf_counter()
            partition = _partition_for(method, true_partition, train, cfg)
            key = partition.blocks
            if key not in fitted:
                fitted[key] = fit_estimator(
                    train,
                    partition,
                    lambda_grid=cfg.lambda_grid,
                    rng=stream(cfg.seed, sid, rep, _STREAM_FIT, size_idx),
                )
            h = fitted[key].predict(test.features)
            mean_f = float(f_measure_rows(test.labels, h).mean())
            elapsed_ms = (time.perf_counter() - start) * 1000.0
            rows.append(
                ResultRow(
                    name,
                    method,
                    n_train,
                    rep,
                    mean_f,
                    elapsed_ms if cfg.timing else None,
                )
            )
            if conditionals:
                mean_true = float(
                    np.mean(
                        [
                            expected_f(c, h[t])
                            for t, c in enumerate(conditionals)
                        ]
                    )
                )
                truths.append(
                    TruthRow(name, method, n_train, rep, mean_true, envelope)
                )
    return rows, truths


def evaluate_on_truth(bn, predict, x):
    """Expected F of predict(x) under the network's true p(y | x).

    predict maps one feature vector to a 0/1 prediction vector; use a
    closure over a trained estimator, or brute-force maximization of
    the exact conditional for the envelope.
    """
    if bn.n_labels > 16:
        raise CapacityError("truth evaluation enumerates at most 16 labels")
    x = np.asarray(x).ravel()
    dist = exact_conditional(bn, x)
    return expected_f(dist, np.asarray(predict(x)))


def summarize(rows):
    """Group rows by (scenario, method, train_size): mean and stderr.

    The standard error is the sample standard deviation (ddof=1) over
    repetitions divided by sqrt(n_reps); a single repetition gets 0.
    """
    if not rows:
        raise DomainError("summarize needs at least one row")
    groups = {}
    for r in rows:
        groups.setdefault((r.scenario, r.method, r.train_size), []).append(r.mean_f)
    out = []
    for key in sorted(groups):
        values = np.asarray(groups[key], dtype=np.float64)
        n = len(values)
        stderr = float(values.std(ddof=1) / np.sqrt(n)) if n > 1 else 0.0
        out.append(SummaryRow(key[0], key[1], key[2], float(values.mean()), stderr, n))
    return out
