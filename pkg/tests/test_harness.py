"""Experiment orchestration: config, repetitions, truth, summaries."""

import numpy as np
import pytest

from fmax.errors import DomainError
from fmax.harness import (
    ExperimentConfig,
    ResultRow,
    evaluate_on_truth,
    run_experiment,
    summarize,
)
from fmax.oracle import brute_force_maximizer
from fmax.rng import stream
from fmax.synth import ancestral_sample, exact_conditional, sample_cpts, scenario_structure


@pytest.fixture(scope="module")
def tiny_outcome():
    cfg = ExperimentConfig(
        scenarios=(1,),
        train_sizes=(50, 150),
        test_size=150,
        repetitions=2,
        lambda_grid=(0.1, 1.0),
        truth_inputs=10,
    )
    return cfg, run_experiment(cfg)


class TestConfig:
    def test_defaults_and_json_round_trip(self):
        cfg = ExperimentConfig()
        clone = ExperimentConfig.from_json(cfg.to_json())
        assert clone == cfg
        assert cfg.methods == ("GFM", "FGFM_true", "FGFM_ilf")

    def test_accepts_scenario_names(self):
        cfg = ExperimentConfig(scenarios=("DAG2", 3))
        assert cfg.scenarios == (2, 3)

    def test_validation(self):
        with pytest.raises(DomainError):
            ExperimentConfig(train_sizes=())
        with pytest.raises(DomainError):
            ExperimentConfig(repetitions=0)
        with pytest.raises(DomainError):
            ExperimentConfig(methods=("GFM", "other"))
        with pytest.raises(DomainError):
            ExperimentConfig(alpha=1.5)
        with pytest.raises(DomainError):
            ExperimentConfig(truth_inputs=-1)


class TestRunExperiment:
    def test_row_grid_is_complete_and_sorted(self, tiny_outcome):
        cfg, (rows, truth) = tiny_outcome
        assert len(rows) == 2 * 3 * 2  # sizes x methods x repetitions
        keys = [(r.scenario, r.method, r.train_size, r.repetition) for r in rows]
        assert keys == sorted(keys)
        assert {r.method for r in rows} == set(cfg.methods)
        assert all(r.scenario == "DAG1" for r in rows)
        assert all(0.0 <= r.mean_f <= 1.0 for r in rows)
        assert all(r.wall_time_ms is None for r in rows)

    def test_truth_rows_bounded_by_envelope(self, tiny_outcome):
        _, (rows, truth) = tiny_outcome
        assert len(truth) == len(rows)
        for t in truth:
            assert t.mean_true_f <= t.mean_envelope + 1e-12
            assert 0.0 <= t.mean_true_f <= 1.0

    def test_repeated_run_is_identical(self, tiny_outcome):
        cfg, (rows, truth) = tiny_outcome
        rows2, truth2 = run_experiment(cfg)
        assert rows2 == rows
        assert truth2 == truth

    def test_thread_count_does_not_change_results(self, tiny_outcome):
        cfg, (rows, truth) = tiny_outcome
        rows2, truth2 = run_experiment(cfg, n_threads=2)
        assert rows2 == rows
        assert truth2 == truth

    def test_timing_flag_fills_wall_times(self):
        cfg = ExperimentConfig(
            scenarios=(1,),
            train_sizes=(40,),
            test_size=50,
            repetitions=1,
            methods=("GFM",),
            lambda_grid=(0.1,),
            timing=True,
        )
        rows, _ = run_experiment(cfg)
        assert rows[0].wall_time_ms is not None
        assert rows[0].wall_time_ms > 0.0

    def test_rejects_bad_thread_count(self):
        cfg = ExperimentConfig(scenarios=(1,), train_sizes=(30,), test_size=30,
                               repetitions=1, methods=("GFM",), lambda_grid=(0.1,))
        with pytest.raises(DomainError):
            run_experiment(cfg, n_threads=0)


class TestEvaluateOnTruth:
    def test_envelope_prediction_attains_envelope(self):
        skeleton, _ = scenario_structure(1)
        bn = sample_cpts(skeleton, stream(130))
        x = ancestral_sample(bn, 1, stream(131)).features[0]

        def oracle_predict(features):
            return brute_force_maximizer(exact_conditional(bn, features))[0]

        value = evaluate_on_truth(bn, oracle_predict, x)
        _, envelope = brute_force_maximizer(exact_conditional(bn, x))
        assert value == pytest.approx(envelope, abs=1e-12)

    def test_all_zero_prediction_scores_empty_mass(self):
        skeleton, _ = scenario_structure(1)
        bn = sample_cpts(skeleton, stream(132))
        x = ancestral_sample(bn, 1, stream(133)).features[0]
        value = evaluate_on_truth(bn, lambda f: np.zeros(8, dtype=np.uint8), x)
        assert value == pytest.approx(exact_conditional(bn, x)[0])


class TestSummarize:
    def test_hand_check(self):
        rows = [
            ResultRow("DAG1", "GFM", 50, 0, 0.4),
            ResultRow("DAG1", "GFM", 50, 1, 0.6),
            ResultRow("DAG1", "GFM", 100, 0, 0.7),
        ]
        out = summarize(rows)
        assert len(out) == 2
        first = out[0]
        assert (first.scenario, first.method, first.train_size) == ("DAG1", "GFM", 50)
        assert first.mean_f == pytest.approx(0.5)
        assert first.stderr == pytest.approx(np.std([0.4, 0.6], ddof=1) / np.sqrt(2))
        assert first.n_reps == 2
        assert out[1].stderr == 0.0

    def test_rejects_empty(self):
        with pytest.raises(DomainError):
            summarize([])
