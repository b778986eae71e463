"""Command-line surface for generation, training, prediction,
discovery, experiment sweeps, and oracle self-checks.

Exit codes: 0 success; 1 usage error (bad flags or values, requests
beyond capacity bounds); 2 data error (unreadable or malformed files,
mismatched dimensions); 3 numerical or consistency failure (including
oracle-check deviations beyond tolerance).
"""

import argparse
import sys

import numpy as np

from . import serialize
from .discover import DEFAULT_CORRECTION, DEFAULT_METHOD, discover_partition, pairwise_tests
from .errors import (
    CapacityError,
    DataFormatError,
    DimensionError,
    DomainError,
    FmaxError,
    InconsistencyError,
    NumericalError,
)
from .estimate import DEFAULT_LAMBDA_GRID, TrainedEstimator, fit_estimator
from .factor import FactorStats, LabelPartition, f_gfm
from .harness import ExperimentConfig, run_experiment, summarize
from .oracle import brute_force_maximizer, exact_p_matrix, expected_f, product_joint, random_joint
from .rng import stream
from .synth import ancestral_sample, parse_scenario, sample_cpts, scenario_structure
from .core import gfm, gfm_from_p_only

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3

ORACLE_CHECK_MAX_M = 10
ORACLE_CHECK_TOL = 1e-10


class _Parser(argparse.ArgumentParser):
    """argparse exits with 2 on usage problems; the contract says 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _int_list(text):
    return tuple(int(v) for v in text.split(",") if v.strip())


def _float_list(text):
    return tuple(float(v) for v in text.split(",") if v.strip())


def _str_list(text):
    return tuple(v.strip() for v in text.split(",") if v.strip())


def _scenario_list(text):
    return tuple(parse_scenario(v) for v in text.split(",") if v.strip())


def build_parser():
    parser = _Parser(prog="fmax", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    g = sub.add_parser("generate", help="sample a scenario network and dataset")
    g.add_argument("--dag", type=parse_scenario, required=True, help="scenario: 1..4 or DAG1..DAG4")
    g.add_argument("--n", type=int, required=True, help="number of rows to sample")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True, help="output directory")
    g.set_defaults(func=cmd_generate)

    t = sub.add_parser("train", help="fit per-block models on a dataset CSV")
    t.add_argument("--data", required=True)
    t.add_argument("--partition", default="single",
                   help="'single', 'discover', or a partition JSON path")
    t.add_argument("--alpha", type=float, default=0.01, help="discovery test level")
    t.add_argument("--ci-method", choices=("gtest", "lrt"), default=DEFAULT_METHOD)
    t.add_argument("--correction", choices=("holm", "none"), default=DEFAULT_CORRECTION)
    t.add_argument("--lambda-grid", type=_float_list, default=DEFAULT_LAMBDA_GRID)
    t.add_argument("--folds", type=int, default=3)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--s-encoding", choices=("numeric", "onehot"), default="numeric")
    t.add_argument("--estimator", choices=("two-step", "direct"), default="two-step")
    t.add_argument("--out", required=True, help="model JSON path")
    t.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="predict labels for a feature CSV")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_predict)

    d = sub.add_parser("discover", help="find label blocks by pairwise tests")
    d.add_argument("--data", required=True)
    d.add_argument("--alpha", type=float, default=0.01)
    d.add_argument("--method", choices=("gtest", "lrt"), default=DEFAULT_METHOD)
    d.add_argument("--correction", choices=("holm", "none"), default=DEFAULT_CORRECTION)
    d.add_argument("--out", required=True, help="partition JSON path")
    d.add_argument("--report", help="optional per-pair CSV report path")
    d.set_defaults(func=cmd_discover)

    e = sub.add_parser("experiment", help="run the scenario sweep")
    e.add_argument("--config", help="ExperimentConfig JSON path")
    e.add_argument("--scenarios", type=_scenario_list)
    e.add_argument("--train-sizes", type=_int_list)
    e.add_argument("--test-size", type=int)
    e.add_argument("--repetitions", type=int)
    e.add_argument("--seed", type=int)
    e.add_argument("--methods", type=_str_list)
    e.add_argument("--alpha", type=float)
    e.add_argument("--lambda-grid", type=_float_list)
    e.add_argument("--truth-inputs", type=int)
    e.add_argument("--timing", action="store_true", default=None,
                   help="record wall times (off by default so outputs are reproducible)")
    e.add_argument("--threads", type=int, help="override FMAX_THREADS")
    e.add_argument("--out", required=True, help="results CSV path")
    e.add_argument("--summary", help="optional summary CSV path")
    e.add_argument("--truth", help="optional truth-evaluation CSV path")
    e.set_defaults(func=cmd_experiment)

    o = sub.add_parser("oracle-check", help="verify the maximizers against brute force")
    o.add_argument("--m", type=int, required=True, help=f"label count, 1..{ORACLE_CHECK_MAX_M}")
    o.add_argument("--trials", type=int, default=200)
    o.add_argument("--seed", type=int, default=0)
    o.set_defaults(func=cmd_oracle_check)
    return parser


def cmd_generate(args):
    if args.n < 0:
        raise DomainError("--n must be non-negative")
    skeleton, partition = scenario_structure(args.dag)
    bn = sample_cpts(skeleton, stream(args.seed, args.dag, 0, 0))
    data = ancestral_sample(bn, args.n, stream(args.seed, args.dag, 0, 1))
    out = args.out
    serialize.write_dataset_csv(f"{out}/data.csv", data)
    serialize.atomic_write(f"{out}/network.json", bn.to_json())
    serialize.atomic_write(f"{out}/partition.json", partition.to_json())
    print(f"wrote {data.n} rows, network, and partition under {out}")
    return EXIT_OK


def _resolve_partition(args, data):
    if args.partition == "single":
        return LabelPartition.single(data.labels.shape[1])
    if args.partition == "discover":
        return discover_partition(
            data, alpha=args.alpha, method=args.ci_method, correction=args.correction
        )
    with open(args.partition) as handle:
        partition = LabelPartition.from_json(handle.read())
    if partition.m != data.labels.shape[1]:
        raise DimensionError(
            f"partition covers {partition.m} labels, dataset has {data.labels.shape[1]}"
        )
    return partition


def cmd_train(args):
    data = serialize.read_dataset_csv(args.data)
    if data.labels.shape[1] == 0:
        raise DataFormatError("training data has no label columns")
    partition = _resolve_partition(args, data)
    est = fit_estimator(
        data,
        partition,
        lambda_grid=args.lambda_grid,
        folds=args.folds,
        rng=stream(args.seed, 0),
        s_encoding=args.s_encoding,
        method=args.estimator,
    )
    serialize.atomic_write(args.out, est.to_json())
    print(f"trained {partition.n_blocks} block(s) on {data.n} rows -> {args.out}")
    return EXIT_OK


def cmd_predict(args):
    with open(args.model) as handle:
        est = TrainedEstimator.from_json(handle.read())
    data = serialize.read_dataset_csv(args.data)
    if data.features.shape[1] != est.n_features:
        raise DimensionError(
            f"model expects {est.n_features} features, data has {data.features.shape[1]}"
        )
    h = est.predict(data.features)
    serialize.write_predictions_csv(args.out, h)
    print(f"wrote {h.shape[0]} predictions -> {args.out}")
    return EXIT_OK


def cmd_discover(args):
    data = serialize.read_dataset_csv(args.data)
    if data.labels.shape[1] == 0:
        raise DataFormatError("data has no label columns")
    partition = discover_partition(
        data, alpha=args.alpha, method=args.method, correction=args.correction
    )
    serialize.atomic_write(args.out, partition.to_json())
    if args.report:
        serialize.write_report_csv(
            args.report, pairwise_tests(data, alpha=args.alpha, method=args.method)
        )
    blocks = [[i + 1 for i in b] for b in partition.blocks]
    print(f"discovered blocks {blocks} -> {args.out}")
    return EXIT_OK


def cmd_experiment(args):
    if args.config:
        with open(args.config) as handle:
            cfg = ExperimentConfig.from_json(handle.read())
    else:
        cfg = ExperimentConfig()
    overrides = {
        "scenarios": args.scenarios,
        "train_sizes": args.train_sizes,
        "test_size": args.test_size,
        "repetitions": args.repetitions,
        "seed": args.seed,
        "methods": args.methods,
        "alpha": args.alpha,
        "lambda_grid": args.lambda_grid,
        "truth_inputs": args.truth_inputs,
        "timing": args.timing,
    }
    overrides = {k: v for k, v in overrides.items() if v is not None}
    if overrides:
        merged = {k: getattr(cfg, k) for k in cfg.__dataclass_fields__}
        merged.update(overrides)
        cfg = ExperimentConfig(**merged)
    rows, truth = run_experiment(cfg, n_threads=args.threads)
    serialize.write_results_csv(args.out, rows)
    print(f"wrote {len(rows)} result rows -> {args.out}")
    if args.summary:
        serialize.write_summary_csv(args.summary, summarize(rows))
        print(f"wrote summary -> {args.summary}")
    if args.truth:
        serialize.write_truth_csv(args.truth, truth)
        print(f"wrote {len(truth)} truth rows -> {args.truth}")
    return EXIT_OK


def _random_partition(rng, m):
    cuts = np.flatnonzero(rng.random(m - 1) < 0.5) + 1 if m > 1 else np.array([], dtype=int)
    edges = [0, *cuts.tolist(), m]
    blocks = tuple(tuple(range(a, b)) for a, b in zip(edges, edges[1:]))
    return LabelPartition(m, blocks)


def cmd_oracle_check(args):
    if args.m < 1 or args.m > ORACLE_CHECK_MAX_M:
        raise CapacityError(
            f"--m must lie in 1..{ORACLE_CHECK_MAX_M}; brute force beyond that is off by default"
        )
    if args.trials < 1:
        raise DomainError("--trials must be positive")
    rng = stream(args.seed, args.m)
    worst_gfm = 0.0
    worst_fgfm = 0.0
    worst_dzero = 0.0
    for _ in range(args.trials):
        probs = random_joint(rng, args.m)
        p, p_zero = exact_p_matrix(probs)
        h, _ = gfm(p, p_zero)
        _, envelope = brute_force_maximizer(probs)
        worst_gfm = max(worst_gfm, abs(expected_f(probs, h) - envelope))
        h2, _ = gfm_from_p_only(p)
        worst_dzero = max(worst_dzero, abs(expected_f(probs, h2) - envelope))

        partition = _random_partition(rng, args.m)
        factors = [random_joint(rng, len(b)) for b in partition.blocks]
        joint = product_joint(factors)
        stats = [
            FactorStats(b, exact_p_matrix(f)[0])
            for b, f in zip(partition.blocks, factors)
        ]
        hf, _ = f_gfm(partition, stats)
        _, envelope_f = brute_force_maximizer(joint)
        worst_fgfm = max(worst_fgfm, abs(expected_f(joint, hf) - envelope_f))
    print(f"m={args.m} trials={args.trials}")
    print(f"max |F(GFM) - F(brute force)|:          {worst_gfm:.3e}")
    print(f"max |F(GFM, inferred d0) - envelope|:   {worst_dzero:.3e}")
    print(f"max |F(F-GFM) - F(brute force)|:        {worst_fgfm:.3e}")
    if max(worst_gfm, worst_fgfm, worst_dzero) > ORACLE_CHECK_TOL:
        print(f"deviation above {ORACLE_CHECK_TOL:g}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (DataFormatError, DimensionError) as exc:
        print(f"fmax: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"fmax: i/o error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (DomainError, CapacityError) as exc:
        print(f"fmax: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (InconsistencyError, NumericalError) as exc:
        print(f"fmax: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except FmaxError as exc:
        print(f"fmax: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
