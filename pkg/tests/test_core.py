"""Core maximizer: scores, sufficient statistics, and the exact argmax."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fmax import (
    build_w,
    compute_delta,
    f_measure,
    f_measure_rows,
    gfm,
    gfm_from_p_only,
    p_matrix_from_json,
    p_matrix_to_json,
    validate_p_matrix,
)
from fmax.errors import DimensionError, DomainError, InconsistencyError
from fmax.oracle import brute_force_maximizer, exact_p_matrix, expected_f, random_joint
from fmax.rng import stream


class TestFMeasure:
    def test_hand_values(self):
        assert f_measure([1, 0, 1], [1, 1, 0]) == pytest.approx(0.5)
        assert f_measure([1, 1], [1, 1]) == 1.0
        assert f_measure([0, 0, 0], [0, 0, 0]) == 1.0
        assert f_measure([1, 0], [0, 0]) == 0.0
        assert f_measure([0, 1], [1, 0]) == 0.0

    def test_rows_matches_scalar(self):
        rng = stream(11)
        y = (rng.random((40, 5)) < 0.5).astype(np.uint8)
        h = (rng.random((40, 5)) < 0.5).astype(np.uint8)
        rows = f_measure_rows(y, h)
        for k in range(40):
            assert rows[k] == pytest.approx(f_measure(y[k], h[k]))

    def test_rejects_non_binary_and_mismatch(self):
        with pytest.raises(DomainError):
            f_measure([0, 2], [0, 1])
        with pytest.raises(DimensionError):
            f_measure([0, 1], [0, 1, 1])

    @given(st.integers(1, 10), st.integers(0, 2**10 - 1), st.integers(0, 2**10 - 1))
    def test_bounded_and_symmetric(self, m, a, b):
        y = np.array([(a >> i) & 1 for i in range(m)], dtype=np.uint8)
        h = np.array([(b >> i) & 1 for i in range(m)], dtype=np.uint8)
        v = f_measure(y, h)
        assert 0.0 <= v <= 1.0
        assert v == f_measure(h, y)
        assert (v == 1.0) == bool(np.array_equal(y, h))


class TestWAndDelta:
    def test_w_entries(self):
        w = build_w(2)
        assert np.allclose(w, [[1.0, 2.0 / 3.0], [2.0 / 3.0, 0.5]])
        w8 = build_w(8)
        s, k = np.indices((8, 8)) + 1
        assert np.array_equal(w8, 2.0 / (s + k))

    def test_delta_uniform_two_labels(self):
        p = np.full((2, 2), 0.25)
        delta = compute_delta(p)
        assert delta[0, 0] == pytest.approx(5.0 / 12.0)
        assert delta[1, 0] == pytest.approx(5.0 / 12.0)
        assert delta[0, 1] == pytest.approx(7.0 / 24.0)

    def test_delta_is_p_times_w(self):
        rng = stream(5)
        p, _ = exact_p_matrix(random_joint(rng, 4))
        assert np.allclose(compute_delta(p), p @ build_w(4), rtol=1e-13)


class TestValidation:
    def test_accepts_exact_matrix(self):
        p, _ = exact_p_matrix(random_joint(stream(7), 5))
        validate_p_matrix(p)

    def test_rejects_bad_shapes_and_values(self):
        with pytest.raises(DimensionError):
            validate_p_matrix(np.zeros((2, 3)))
        with pytest.raises(DomainError):
            validate_p_matrix(np.array([[1.5, 0.0], [0.0, 0.0]]))
        with pytest.raises(DomainError):
            validate_p_matrix(np.array([[-0.2, 0.0], [0.0, 0.0]]))

    def test_strict_mode_checks_count_consistency(self):
        # p_11 = 0.9 and p_21 = 0.9 would need d_1 = 1.8.
        bad = np.array([[0.9, 0.0], [0.9, 0.0]])
        with pytest.raises(InconsistencyError):
            validate_p_matrix(bad, strict=True)
        validate_p_matrix(bad, strict=False)


class TestGfm:
    def test_uniform_two_labels(self):
        p = np.full((2, 2), 0.25)
        h, value = gfm(p, 0.25)
        assert h.tolist() == [1, 1]
        assert value == pytest.approx(7.0 / 12.0)

    def test_empty_prediction_when_zero_dominates(self):
        p = np.array([[0.05, 0.0], [0.0, 0.0]])
        h, value = gfm(p, 0.95)
        assert h.tolist() == [0, 0]
        assert value == pytest.approx(0.95)

    def test_matches_brute_force(self):
        rng = stream(3)
        for m in range(1, 7):
            for _ in range(30):
                probs = random_joint(rng, m)
                p, p_zero = exact_p_matrix(probs)
                h, value = gfm(p, p_zero)
                h_star, envelope = brute_force_maximizer(probs)
                assert expected_f(probs, h) == pytest.approx(envelope, abs=1e-12)
                assert value == pytest.approx(envelope, abs=1e-12)

    def test_value_equals_expected_f_of_prediction(self):
        rng = stream(21)
        probs = random_joint(rng, 6)
        p, p_zero = exact_p_matrix(probs)
        h, value = gfm(p, p_zero)
        assert value == pytest.approx(expected_f(probs, h), abs=1e-12)

    def test_exact_tie_prefers_smaller_prediction_size(self):
        # One label present with probability 0.5: predicting it and
        # predicting nothing both score 0.5; the smaller size wins.
        h, value = gfm(np.array([[0.5]]), 0.5)
        assert h.tolist() == [0]
        assert value == pytest.approx(0.5)

    def test_from_p_only_matches_explicit_p_zero(self):
        rng = stream(9)
        for m in range(1, 7):
            probs = random_joint(rng, m)
            p, p_zero = exact_p_matrix(probs)
            h_a, v_a = gfm(p, p_zero)
            h_b, v_b = gfm_from_p_only(p)
            assert np.array_equal(h_a, h_b)
            assert v_a == pytest.approx(v_b, abs=1e-12)

    def test_from_p_only_rejects_overfull_mass(self):
        # Implied count distribution sums above one.
        p = np.array([[0.8, 0.0], [0.7, 0.0]])
        with pytest.raises(InconsistencyError):
            gfm_from_p_only(p)


class TestJsonRoundTrip:
    def test_round_trip(self):
        p, p_zero = exact_p_matrix(random_joint(stream(13), 4))
        text = p_matrix_to_json(p, p_zero)
        p2, z2 = p_matrix_from_json(text)
        assert np.array_equal(p, p2)
        assert z2 == p_zero

    def test_round_trip_without_p_zero(self):
        p, _ = exact_p_matrix(random_joint(stream(14), 3))
        p2, z2 = p_matrix_from_json(p_matrix_to_json(p))
        assert np.array_equal(p, p2)
        assert z2 is None


@settings(deadline=None, max_examples=60)
@given(st.integers(1, 6), st.integers(0, 2**32 - 1))
def test_gfm_never_beaten_by_any_pattern(m, seed):
    probs = random_joint(stream(seed), m)
    p, p_zero = exact_p_matrix(probs)
    h, value = gfm(p, p_zero)
    _, envelope = brute_force_maximizer(probs)
    assert expected_f(probs, h) >= envelope - 1e-12
